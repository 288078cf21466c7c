#include "geomcarve/sequence.hpp"

#include <algorithm>
#include <string>

#include "geomcarve/error.hpp"

namespace geomcarve {

void SequenceSample::validate() const {
  if (frames.empty()) throw ShapeError("sequence has no frames");
  const std::size_t h = height();
  const std::size_t w = width();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const Frame& f = frames[t];
    const std::string where = "frame " + std::to_string(t) + ": ";
    if (f.depth.height != h || f.depth.width != w || f.depth.values.size() != h * w) {
      throw ShapeError(where + "depth dimensions differ from frame 0");
    }
    if (f.points.height != h || f.points.width != w || f.points.channels != 3 ||
        f.points.values.size() != h * w * 3) {
      throw ShapeError(where + "point map must be " + std::to_string(h) + "x" + std::to_string(w) + "x3");
    }
    if (f.mask.height != h || f.mask.width != w || f.mask.flags.size() != h * w) {
      throw ShapeError(where + "mask dimensions differ from depth");
    }
    for (const auto* conf : {&f.conf_depth, &f.conf_point}) {
      if (*conf && ((*conf)->height != h || (*conf)->width != w || (*conf)->values.size() != h * w)) {
        throw ShapeError(where + "confidence dimensions differ from depth");
      }
    }
  }
}

std::vector<CameraParams> SequenceSample::cameras() const {
  std::vector<CameraParams> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.camera);
  return out;
}

namespace {

template <typename Get>
Field stack(const SequenceSample& s, std::size_t channels, Get get) {
  s.validate();
  Field out(FieldShape{s.size(), s.height(), s.width(), channels});
  auto it = out.values.begin();
  for (const auto& f : s.frames) {
    const std::vector<double>& v = get(f);
    it = std::copy(v.begin(), v.end(), it);
  }
  return out;
}

}  // namespace

Field stack_depth(const SequenceSample& s) {
  return stack(s, 1, [](const Frame& f) -> const std::vector<double>& { return f.depth.values; });
}

Field stack_points(const SequenceSample& s) {
  return stack(s, 3, [](const Frame& f) -> const std::vector<double>& { return f.points.values; });
}

Field stack_conf_depth(const SequenceSample& s) {
  return stack(s, 1, [](const Frame& f) -> const std::vector<double>& {
    if (!f.conf_depth) throw Error("sequence lacks conf_depth");
    return f.conf_depth->values;
  });
}

Field stack_conf_point(const SequenceSample& s) {
  return stack(s, 1, [](const Frame& f) -> const std::vector<double>& {
    if (!f.conf_point) throw Error("sequence lacks conf_point");
    return f.conf_point->values;
  });
}

StackedMask stack_mask(const SequenceSample& s) {
  s.validate();
  StackedMask out{s.size(), s.height(), s.width(), {}};
  out.flags.reserve(out.frames * out.height * out.width);
  for (const auto& f : s.frames) out.flags.insert(out.flags.end(), f.mask.flags.begin(), f.mask.flags.end());
  return out;
}

StackedMask joint_mask(const SequenceSample& a, const SequenceSample& b) {
  StackedMask ma = stack_mask(a);
  const StackedMask mb = stack_mask(b);
  if (ma.frames != mb.frames || ma.height != mb.height || ma.width != mb.width) {
    throw ShapeError("sequences differ in frame count or image size");
  }
  for (std::size_t i = 0; i < ma.flags.size(); ++i) ma.flags[i] = (ma.flags[i] && mb.flags[i]) ? 1 : 0;
  return ma;
}

}  // namespace geomcarve
