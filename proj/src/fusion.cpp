#include "geomcarve/fusion.hpp"

#include <cmath>
#include <string>

#include "geomcarve/error.hpp"
#include "geomcarve/random.hpp"

namespace geomcarve {

FusionBlock FusionBlock::random(std::size_t channels, std::size_t heads, std::uint64_t seed) {
  if (channels == 0 || heads == 0 || channels % heads != 0) {
    throw ShapeError("fusion block: channels must be a positive multiple of heads");
  }
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  const auto n = static_cast<Eigen::Index>(channels);
  auto init = [&] {
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rng.uniform(-bound, bound);
    }
    return m;
  };
  FusionBlock b;
  b.channels = channels;
  b.heads = heads;
  b.query = init();
  b.key = init();
  b.value = init();
  b.output = init();
  b.gate = 0.0;
  return b;
}

TokenGrid cross_attend_fuse(const TokenGrid& low, const TokenGrid& high, const FusionBlock& block,
                            FusionTrace* trace) {
  if (low.frames != high.frames) {
    throw ShapeError("cross_attend_fuse: " + std::to_string(low.frames) + " low-res vs " +
                     std::to_string(high.frames) + " high-res frames");
  }
  if (low.channels != high.channels || low.channels != block.channels) {
    throw ShapeError("cross_attend_fuse: channel counts differ");
  }
  if (block.heads == 0 || block.channels % block.heads != 0) {
    throw ShapeError("cross_attend_fuse: channels must be divisible by heads");
  }
  const auto c = static_cast<Eigen::Index>(block.channels);
  for (const Eigen::MatrixXd* m : {&block.query, &block.key, &block.value, &block.output}) {
    if (m->rows() != c || m->cols() != c) throw ShapeError("cross_attend_fuse: projections must be C x C");
  }
  if (high.tokens == 0) throw ShapeError("cross_attend_fuse: no high-resolution tokens");

  const auto d = static_cast<Eigen::Index>(block.channels / block.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  if (trace) trace->attention.clear();

  TokenGrid out = low;
  for (std::size_t t = 0; t < low.frames; ++t) {
    const Eigen::MatrixXd q = low.frame(t) * block.query;
    const Eigen::MatrixXd k = high.frame(t) * block.key;
    const Eigen::MatrixXd v = high.frame(t) * block.value;
    Eigen::MatrixXd heads_out(q.rows(), c);
    for (std::size_t h = 0; h < block.heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * d;
      Eigen::MatrixXd logits = scale * (q.middleCols(off, d) * k.middleCols(off, d).transpose());
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        row = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      heads_out.middleCols(off, d) = logits * v.middleCols(off, d);
      if (trace) trace->attention.push_back(std::move(logits));
    }
    // A closed gate leaves the low-resolution tokens untouched, bit for bit.
    if (block.gate != 0.0) out.frame(t) += block.gate * (heads_out * block.output);
  }
  return out;
}

TokenGrid fuse_stack(const TokenGrid& low, const TokenGrid& high, std::span<const FusionBlock> blocks) {
  TokenGrid x = low;
  for (const FusionBlock& b : blocks) x = cross_attend_fuse(x, high, b);
  return x;
}

double gate_sensitivity(const TokenGrid& low, const TokenGrid& high, const FusionBlock& block,
                        const ProbeLoss& probe, double step) {
  FusionBlock b = block;
  b.gate = step;
  const double up = probe(cross_attend_fuse(low, high, b));
  b.gate = -step;
  const double down = probe(cross_attend_fuse(low, high, b));
  return (up - down) / (2.0 * step);
}

double squared_norm_probe(const TokenGrid& tokens) {
  double s = 0.0;
  for (double v : tokens.values) s += v * v;
  return s;
}

TokenGrid random_tokens(std::size_t frames, std::size_t tokens, std::size_t channels, std::uint64_t seed) {
  Rng rng(seed);
  TokenGrid g(frames, tokens, channels);
  for (double& v : g.values) v = rng.normal();
  return g;
}

}  // namespace geomcarve
