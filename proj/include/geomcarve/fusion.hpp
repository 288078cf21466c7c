#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace geomcarve {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// frames x tokens x channels feature tokens, row-major.
struct TokenGrid {
  std::size_t frames = 0;
  std::size_t tokens = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  TokenGrid() = default;
  TokenGrid(std::size_t t, std::size_t p, std::size_t c, double fill = 0.0)
      : frames(t), tokens(p), channels(c), values(t * p * c, fill) {}

  Eigen::Map<const RowMatrix> frame(std::size_t t) const {
    return {values.data() + t * tokens * channels, static_cast<Eigen::Index>(tokens),
            static_cast<Eigen::Index>(channels)};
  }
  Eigen::Map<RowMatrix> frame(std::size_t t) {
    return {values.data() + t * tokens * channels, static_cast<Eigen::Index>(tokens),
            static_cast<Eigen::Index>(channels)};
  }
};

inline constexpr std::size_t kDefaultFusionHeads = 4;
inline constexpr std::size_t kDefaultFusionBlocks = 2;

/// Gated multi-head cross-attention from low-resolution queries to
/// high-resolution keys/values. Tokens are row vectors: Q = X * query.
struct FusionBlock {
  std::size_t channels = 0;
  std::size_t heads = kDefaultFusionHeads;
  Eigen::MatrixXd query, key, value, output;  // channels x channels
  double gate = 0.0;

  /// Uniform(-1/sqrt(C), 1/sqrt(C)) projections, gate exactly 0.
  static FusionBlock random(std::size_t channels, std::size_t heads, std::uint64_t seed);
};

/// Softmax attention weights of the last call, [frame * heads + head], each P_low x P_high.
struct FusionTrace {
  std::vector<Eigen::MatrixXd> attention;
};

/// low + gate * CrossAttn(low, high), attention confined to matching frames.
/// Throws ShapeError on frame or channel mismatch or channels % heads != 0.
TokenGrid cross_attend_fuse(const TokenGrid& low, const TokenGrid& high, const FusionBlock& block,
                            FusionTrace* trace = nullptr);

/// Applies blocks in sequence; each block queries with the previous output.
TokenGrid fuse_stack(const TokenGrid& low, const TokenGrid& high, std::span<const FusionBlock> blocks);

using ProbeLoss = std::function<double(const TokenGrid&)>;

/// Central difference of probe(fuse(low, high, block with gate = b)) at b = 0.
double gate_sensitivity(const TokenGrid& low, const TokenGrid& high, const FusionBlock& block,
                        const ProbeLoss& probe, double step = 1e-6);

/// Sum of squared token values.
double squared_norm_probe(const TokenGrid& tokens);

TokenGrid random_tokens(std::size_t frames, std::size_t tokens, std::size_t channels, std::uint64_t seed);

}  // namespace geomcarve
