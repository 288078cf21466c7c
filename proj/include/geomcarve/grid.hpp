#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace geomcarve {

/// Dense row-major H x W grid of scalars (depth in meters, weights, confidences).
struct ScalarGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  ScalarGrid() = default;
  ScalarGrid(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}

  std::size_t size() const { return values.size(); }
  double& at(std::size_t v, std::size_t u) { return values[v * width + u]; }
  double at(std::size_t v, std::size_t u) const { return values[v * width + u]; }
};

/// Dense row-major H x W x C grid; C = 3 for point maps, C = 2 for pixel coordinates.
struct VecGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<double> values;

  VecGrid() = default;
  VecGrid(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), values(h * w * c, fill) {}

  std::size_t pixels() const { return height * width; }
  double* pixel(std::size_t i) { return values.data() + i * channels; }
  const double* pixel(std::size_t i) const { return values.data() + i * channels; }
};

/// Per-pixel validity flags (1 = supervised / evaluated).
struct ValidMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> flags;

  ValidMask() = default;
  ValidMask(std::size_t h, std::size_t w, bool fill = true)
      : height(h), width(w), flags(h * w, fill ? 1 : 0) {}

  std::size_t size() const { return flags.size(); }
  bool operator[](std::size_t i) const { return flags[i] != 0; }
  std::size_t count() const;
};

/// Nonnegative per-pixel loss weights with the same layout as a ScalarGrid.
using WeightMap = ScalarGrid;

/// Shape of a frames x height x width x channels field.
struct FieldShape {
  std::size_t frames = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t frame_pixels() const { return height * width; }
  std::size_t pixels() const { return frames * height * width; }
  std::size_t size() const { return pixels() * channels; }
  bool same_pixels(const FieldShape& o) const {
    return frames == o.frames && height == o.height && width == o.width;
  }
  bool operator==(const FieldShape&) const = default;
};

/// Non-owning view over a (possibly multi-frame) grid. Losses and metrics take
/// these so single frames and stacked sequences share one code path.
struct FieldView {
  FieldShape shape;
  std::span<const double> values;

  FieldView() = default;
  FieldView(FieldShape s, std::span<const double> v) : shape(s), values(v) {}
  FieldView(const ScalarGrid& g) : shape{1, g.height, g.width, 1}, values(g.values) {}
  FieldView(const VecGrid& g) : shape{1, g.height, g.width, g.channels}, values(g.values) {}

  const double* pixel(std::size_t i) const { return values.data() + i * shape.channels; }
};

struct MaskView {
  std::size_t frames = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::span<const std::uint8_t> flags;

  MaskView() = default;
  MaskView(std::size_t t, std::size_t h, std::size_t w, std::span<const std::uint8_t> f)
      : frames(t), height(h), width(w), flags(f) {}
  MaskView(const ValidMask& m) : height(m.height), width(m.width), flags(m.flags) {}

  std::size_t pixels() const { return frames * height * width; }
  bool operator[](std::size_t i) const { return flags[i] != 0; }
  bool matches(const FieldShape& s) const {
    return frames == s.frames && height == s.height && width == s.width;
  }
};

/// Owning counterpart of FieldView, used when stacking sequence frames.
struct Field {
  FieldShape shape;
  std::vector<double> values;

  Field() = default;
  explicit Field(FieldShape s, double fill = 0.0) : shape(s), values(s.size(), fill) {}

  operator FieldView() const { return FieldView(shape, values); }
  FieldView view() const { return FieldView(shape, values); }
};

struct StackedMask {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> flags;

  operator MaskView() const { return MaskView(frames, height, width, flags); }
  MaskView view() const { return MaskView(frames, height, width, flags); }
};

/// Sum in a fixed pairwise order so results do not depend on how terms were produced.
double pairwise_sum(std::span<const double> terms);

}  // namespace geomcarve
