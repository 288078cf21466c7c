#include "geomcarve/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "geomcarve/error.hpp"
#include "json_text.hpp"

namespace geomcarve {

static_assert(std::endian::native == std::endian::little, "tensor files are little-endian; add byte swapping");

namespace fs = std::filesystem;
using detail::Json;

namespace detail {

namespace {

void dump_into(const Json& v, int indent, int depth, std::string& out) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) out += indent < 0 ? ", " : ",";
        first = false;
        newline(depth + 1);
        out += Json(key).dump();
        out += ": ";
        dump_into(item, indent, depth + 1, out);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const Json& item : v) {
        if (!first) out += indent < 0 ? ", " : ",";
        first = false;
        newline(depth + 1);
        dump_into(item, indent, depth + 1, out);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float:
      out += format_real(v.get<double>());
      return;
    default:
      out += v.dump();
  }
}

}  // namespace

std::string dump_json(const Json& value, int indent) {
  std::string out;
  dump_into(value, indent, 0, out);
  return out;
}

}  // namespace detail

std::string format_real(double value) {
  if (!std::isfinite(value)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace {

struct TensorSpec {
  std::string name;
  std::string dtype;
  std::vector<std::size_t> shape;
  std::string file;

  std::size_t elements() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }
  std::size_t element_bytes() const { return dtype == "u8" ? 1 : 4; }
};

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

std::string encode_f32(const std::vector<const std::vector<double>*>& chunks) {
  std::string bytes;
  for (const auto* chunk : chunks) {
    for (double v : *chunk) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      char b[4];
      std::memcpy(b, &bits, 4);
      bytes.append(b, 4);
    }
  }
  return bytes;
}

Json real_array(const auto& vec) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < vec.size(); ++i) a.push_back(static_cast<double>(vec[i]));
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> read_vector(const Json& j, const char* key, std::size_t frame) {
  const std::string where = std::string(kManifestName) + ": camera " + std::to_string(frame) + " " + key;
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != N) {
    throw Error(where + " must be an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!j[key][i].is_number()) throw Error(where + " must be numeric");
    v[i] = j[key][i].get<double>();
    if (!std::isfinite(v[i])) throw Error(where + " must be finite");
  }
  return v;
}

}  // namespace

SequenceSample read_sequence(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestName;
  if (!fs::exists(manifest_path)) throw Error("missing " + manifest_path.string());
  Json m;
  try {
    const std::vector<char> text = read_file(manifest_path);
    m = Json::parse(text.begin(), text.end());
  } catch (const Json::exception& e) {
    throw Error(manifest_path.string() + ": invalid JSON (" + e.what() + ")");
  }

  try {
    if (!m.contains("version") || m["version"] != kManifestVersion) {
      throw Error(manifest_path.string() + ": unsupported version " + (m.contains("version") ? m["version"].dump() : "<missing>"));
    }
    const auto frames = m.at("frames").get<std::size_t>();
    const auto width = m.at("width").get<std::size_t>();
    const auto height = m.at("height").get<std::size_t>();
    if (frames == 0 || width == 0 || height == 0) throw Error(manifest_path.string() + ": empty sequence");

    std::vector<TensorSpec> tensors;
    for (const Json& t : m.at("tensors")) {
      tensors.push_back({t.at("name").get<std::string>(), t.at("dtype").get<std::string>(),
                         t.at("shape").get<std::vector<std::size_t>>(), t.at("file").get<std::string>()});
    }
    const auto find = [&](const std::string& name) -> const TensorSpec* {
      for (const auto& t : tensors) {
        if (t.name == name) return &t;
      }
      return nullptr;
    };

    SequenceSample sample;
    sample.frames.resize(frames);
    const std::size_t hw = width * height;

    const auto load = [&](const std::string& name, std::size_t channels, bool required) -> std::vector<char> {
      const TensorSpec* spec = find(name);
      if (!spec) {
        if (required) throw Error(manifest_path.string() + ": missing tensor entry '" + name + "'");
        return {};
      }
      std::vector<std::size_t> expected = {frames, height, width};
      if (channels > 1) expected.push_back(channels);
      const fs::path path = dir / spec->file;
      if (spec->shape != expected) throw ShapeError(path.string() + ": shape does not match the manifest dimensions");
      const std::string dtype = name == "mask" ? "u8" : "f32";
      if (spec->dtype != dtype) throw Error(path.string() + ": dtype must be " + dtype);
      if (!fs::exists(path)) throw Error("missing tensor file " + path.string());
      std::vector<char> bytes = read_file(path);
      const std::size_t want = spec->elements() * spec->element_bytes();
      if (bytes.size() != want) {
        throw ShapeError(path.string() + ": expected " + std::to_string(want) + " bytes, found " +
                         std::to_string(bytes.size()));
      }
      return bytes;
    };
    const auto widen = [](const std::vector<char>& bytes, std::size_t offset, std::size_t count) {
      std::vector<double> out(count);
      for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, bytes.data() + 4 * (offset + i), 4);
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
      }
      return out;
    };

    const std::vector<char> depth = load("depth", 1, true);
    const std::vector<char> points = load("points", 3, true);
    const std::vector<char> mask = load("mask", 1, true);
    const std::vector<char> conf_depth = load("conf_depth", 1, false);
    const std::vector<char> conf_point = load("conf_point", 1, false);

    const Json& cams = m.at("cameras");
    if (!cams.is_array() || cams.size() != frames) {
      throw ShapeError(manifest_path.string() + ": expected " + std::to_string(frames) + " camera entries");
    }

    for (std::size_t t = 0; t < frames; ++t) {
      Frame& f = sample.frames[t];
      f.depth = ScalarGrid(height, width);
      f.depth.values = widen(depth, t * hw, hw);
      f.points = VecGrid(height, width, 3);
      f.points.values = widen(points, 3 * t * hw, 3 * hw);
      f.mask = ValidMask(height, width, false);
      for (std::size_t i = 0; i < hw; ++i) {
        const auto b = static_cast<std::uint8_t>(mask[t * hw + i]);
        if (b > 1) throw Error((dir / find("mask")->file).string() + ": mask bytes must be 0 or 1");
        f.mask.flags[i] = b;
      }
      if (!conf_depth.empty()) {
        f.conf_depth = ScalarGrid(height, width);
        f.conf_depth->values = widen(conf_depth, t * hw, hw);
      }
      if (!conf_point.empty()) {
        f.conf_point = ScalarGrid(height, width);
        f.conf_point->values = widen(conf_point, t * hw, hw);
      }
      const Json& c = cams[t];
      const Eigen::Vector4d q = read_vector<4>(c, "quaternion", t);
      if (q.norm() <= 1e-12) {
        throw DegenerateError(manifest_path.string() + ": camera " + std::to_string(t) + " has an invalid (zero) quaternion");
      }
      f.camera.quaternion = q / q.norm();
      f.camera.translation = read_vector<3>(c, "translation", t);
      f.camera.fov = read_vector<2>(c, "fov", t);
    }
    sample.validate();
    return sample;
  } catch (const Json::exception& e) {
    throw Error(manifest_path.string() + ": malformed manifest (" + e.what() + ")");
  }
}

void write_sequence(const SequenceSample& sample, const fs::path& dir, bool overwrite) {
  if (sample.frames.empty()) throw Error("write_sequence: refusing to write an empty sample");
  sample.validate();
  const fs::path manifest_path = dir / kManifestName;
  if (fs::exists(manifest_path) && !overwrite) {
    throw Error(manifest_path.string() + " already exists (use --force to overwrite)");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  const std::size_t frames = sample.size();
  const std::size_t height = sample.height();
  const std::size_t width = sample.width();
  const bool has_conf_depth = std::all_of(sample.frames.begin(), sample.frames.end(),
                                          [](const Frame& f) { return f.conf_depth.has_value(); });
  const bool has_conf_point = std::all_of(sample.frames.begin(), sample.frames.end(),
                                          [](const Frame& f) { return f.conf_point.has_value(); });

  Json m;
  m["version"] = kManifestVersion;
  m["frames"] = frames;
  m["width"] = width;
  m["height"] = height;
  Json tensors = Json::array();
  const auto entry = [&](const char* name, const char* dtype, std::vector<std::size_t> shape, const std::string& file) {
    Json t;
    t["name"] = name;
    t["dtype"] = dtype;
    t["shape"] = shape;
    t["file"] = file;
    tensors.push_back(std::move(t));
  };

  std::vector<const std::vector<double>*> depth, points, cd_values, cp_values;
  std::string mask;
  for (const Frame& f : sample.frames) {
    depth.push_back(&f.depth.values);
    points.push_back(&f.points.values);
    for (std::uint8_t b : f.mask.flags) mask.push_back(static_cast<char>(b ? 1 : 0));
    if (has_conf_depth) cd_values.push_back(&f.conf_depth->values);
    if (has_conf_point) cp_values.push_back(&f.conf_point->values);
  }

  write_file(dir / "depth.f32", encode_f32(depth));
  entry("depth", "f32", {frames, height, width}, "depth.f32");
  write_file(dir / "points.f32", encode_f32(points));
  entry("points", "f32", {frames, height, width, 3}, "points.f32");
  write_file(dir / "mask.u8", mask);
  entry("mask", "u8", {frames, height, width}, "mask.u8");
  if (has_conf_depth) {
    write_file(dir / "conf_depth.f32", encode_f32(cd_values));
    entry("conf_depth", "f32", {frames, height, width}, "conf_depth.f32");
  }
  if (has_conf_point) {
    write_file(dir / "conf_point.f32", encode_f32(cp_values));
    entry("conf_point", "f32", {frames, height, width}, "conf_point.f32");
  }
  m["tensors"] = std::move(tensors);

  Json cams = Json::array();
  for (const Frame& f : sample.frames) {
    Json c;
    c["quaternion"] = real_array(f.camera.quaternion);
    c["translation"] = real_array(f.camera.translation);
    c["fov"] = real_array(f.camera.fov);
    cams.push_back(std::move(c));
  }
  m["cameras"] = std::move(cams);
  write_file(manifest_path, detail::dump_json(m) + "\n");
}

}  // namespace geomcarve
