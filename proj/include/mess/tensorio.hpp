#pragma once

// Binary tensor files (.mt), dataset manifests and cost profiles.
//
// Tensor file layout, all integers little-endian:
//
//   offset 0   "MESS"            4-byte magic
//   offset 4   version           u8, currently 1
//   offset 5   dtype             u8, 0 = f32, 1 = u16
//   offset 6   rank              u8
//   offset 7   dims[rank]        u32 each
//   ...        payload           raw little-endian elements, row-major
//
// Prediction tensors are rank 3 with dims (M, R, C), class-major outermost.
// Label maps are rank 2 with dims (R, C).

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mess/error.hpp"

namespace mess {

inline constexpr std::uint16_t kIgnoreLabel = 65535;
inline constexpr double kSoftmaxSumTolerance = 1e-4;
inline constexpr double kProbabilitySlack = 1e-6;

struct PredictionTensor {
  int exit_id = -1;
  std::uint32_t classes = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;

  PredictionTensor() = default;
  PredictionTensor(std::uint32_t m, std::uint32_t r, std::uint32_t c)
      : classes(m), rows(r), cols(c), data(std::size_t{m} * r * c, 0.0f) {}

  std::size_t pixel_count() const { return std::size_t{rows} * cols; }

  float& at(std::uint32_t m, std::uint32_t r, std::uint32_t c) {
    return data[(std::size_t{m} * rows + r) * cols + c];
  }
  float at(std::uint32_t m, std::uint32_t r, std::uint32_t c) const {
    return data[(std::size_t{m} * rows + r) * cols + c];
  }
  /// Probability of class m at flat pixel index.
  float prob(std::uint32_t m, std::size_t pixel) const {
    return data[std::size_t{m} * pixel_count() + pixel];
  }

  friend bool operator==(const PredictionTensor&, const PredictionTensor&) = default;
};

struct LabelMap {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint16_t> data;
  std::uint16_t ignore_value = kIgnoreLabel;

  LabelMap() = default;
  LabelMap(std::uint32_t r, std::uint32_t c, std::uint16_t fill = 0)
      : rows(r), cols(c), data(std::size_t{r} * c, fill) {}

  std::size_t pixel_count() const { return std::size_t{rows} * cols; }
  std::uint16_t& at(std::uint32_t r, std::uint32_t c) { return data[std::size_t{r} * cols + c]; }
  std::uint16_t at(std::uint32_t r, std::uint32_t c) const { return data[std::size_t{r} * cols + c]; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Per-pixel argmax of a prediction; ties resolve to the lowest class id.
inline LabelMap argmax_labels(const PredictionTensor& pred) {
  LabelMap out(pred.rows, pred.cols);
  const std::size_t n = pred.pixel_count();
  for (std::size_t p = 0; p < n; ++p) {
    std::uint16_t best = 0;
    float best_value = pred.prob(0, p);
    for (std::uint32_t m = 1; m < pred.classes; ++m) {
      const float v = pred.prob(m, p);
      if (v > best_value) {
        best_value = v;
        best = static_cast<std::uint16_t>(m);
      }
    }
    out.data[p] = best;
  }
  return out;
}

/// Checks the softmax contract: finite entries in [-1e-6, 1+1e-6] and
/// per-pixel sums within 1e-4 of one.
inline void validate_softmax(const PredictionTensor& t, const std::string& origin = {}) {
  if (t.data.size() != std::size_t{t.classes} * t.rows * t.cols) {
    throw Error(ErrorCode::DimMismatch, "payload does not match dims " + origin);
  }
  for (float v : t.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite probability " + origin);
    if (v < -kProbabilitySlack || v > 1.0 + kProbabilitySlack) {
      throw Error(ErrorCode::InvalidSoftmax, "probability outside [0,1] " + origin);
    }
  }
  const std::size_t n = t.pixel_count();
  for (std::size_t p = 0; p < n; ++p) {
    double sum = 0.0;
    for (std::uint32_t m = 0; m < t.classes; ++m) sum += t.prob(m, p);
    if (std::abs(sum - 1.0) > kSoftmaxSumTolerance) {
      throw Error(ErrorCode::InvalidSoftmax,
                  "pixel " + std::to_string(p) + " sums to " + std::to_string(sum) + " " + origin);
    }
  }
}

inline void validate_labels(const LabelMap& labels, std::uint32_t class_count,
                            const std::string& origin = {}) {
  for (auto v : labels.data) {
    if (v != labels.ignore_value && v >= class_count) {
      throw Error(ErrorCode::OutOfRangeClass,
                  "label " + std::to_string(v) + " >= class count " + std::to_string(class_count) +
                      " " + origin);
    }
  }
}

namespace detail {

enum class DType : std::uint8_t { f32 = 0, u16 = 1 };

inline constexpr std::array<char, 4> kMagic = {'M', 'E', 'S', 'S'};
inline constexpr std::uint8_t kFormatVersion = 1;

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

template <typename T>
void append_le(std::vector<char>& out, const std::vector<T>& values) {
  const std::size_t offset = out.size();
  out.resize(offset + values.size() * sizeof(T));
  std::memcpy(out.data() + offset, values.data(), values.size() * sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      char* e = out.data() + offset + i * sizeof(T);
      for (std::size_t a = 0, b = sizeof(T) - 1; a < b; ++a, --b) std::swap(e[a], e[b]);
    }
  }
}

template <typename T>
std::vector<T> decode_le(const unsigned char* p, std::size_t count) {
  std::vector<T> values(count);
  std::memcpy(values.data(), p, count * sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<char*>(values.data());
    for (std::size_t i = 0; i < count; ++i) {
      char* e = bytes + i * sizeof(T);
      for (std::size_t a = 0, b = sizeof(T) - 1; a < b; ++a, --b) std::swap(e[a], e[b]);
    }
  }
  return values;
}

struct RawTensor {
  DType dtype = DType::f32;
  std::vector<std::uint32_t> dims;
  std::vector<unsigned char> payload;
};

inline std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string(), {path.string()});
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void dump(const std::filesystem::path& path, const std::vector<char>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string(), {path.string()});
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string(), {path.string()});
}

inline RawTensor read_raw(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string where = path.string();
  if (bytes.size() < 7 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw Error(ErrorCode::BadMagic, "missing MESS header in " + where, {where});
  }
  if (bytes[4] != kFormatVersion) {
    throw Error(ErrorCode::BadMagic, "unsupported version " + std::to_string(bytes[4]) + " in " + where,
                {where});
  }
  RawTensor raw;
  if (bytes[5] > 1) throw Error(ErrorCode::BadMagic, "unknown dtype code in " + where, {where});
  raw.dtype = static_cast<DType>(bytes[5]);
  const std::size_t rank = bytes[6];
  const std::size_t header = 7 + 4 * rank;
  if (bytes.size() < header) throw Error(ErrorCode::DimMismatch, "truncated dims in " + where, {where});
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    raw.dims.push_back(get_u32(bytes.data() + 7 + 4 * i));
    count *= raw.dims.back();
  }
  const std::size_t elem = raw.dtype == DType::f32 ? 4 : 2;
  if (bytes.size() - header != count * elem) {
    throw Error(ErrorCode::DimMismatch,
                "payload is " + std::to_string(bytes.size() - header) + " bytes, expected " +
                    std::to_string(count * elem) + " in " + where,
                {where});
  }
  raw.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return raw;
}

inline std::vector<char> header(DType dtype, const std::vector<std::uint32_t>& dims) {
  std::vector<char> out(kMagic.begin(), kMagic.end());
  out.push_back(static_cast<char>(kFormatVersion));
  out.push_back(static_cast<char>(dtype));
  out.push_back(static_cast<char>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  return out;
}

}  // namespace detail

inline void write_tensor(const PredictionTensor& t, const std::filesystem::path& path) {
  if (t.data.size() != std::size_t{t.classes} * t.rows * t.cols) {
    throw Error(ErrorCode::DimMismatch, "tensor payload does not match its dims");
  }
  auto bytes = detail::header(detail::DType::f32, {t.classes, t.rows, t.cols});
  detail::append_le(bytes, t.data);
  detail::dump(path, bytes);
}

/// Reads a rank-3 f32 prediction tensor. With `validate` the softmax
/// contract is enforced as well as finiteness.
inline PredictionTensor read_tensor(const std::filesystem::path& path, bool validate = true) {
  auto raw = detail::read_raw(path);
  const std::string where = path.string();
  if (raw.dtype != detail::DType::f32 || raw.dims.size() != 3) {
    throw Error(ErrorCode::DimMismatch, "expected rank-3 f32 tensor in " + where, {where});
  }
  PredictionTensor t;
  t.classes = raw.dims[0];
  t.rows = raw.dims[1];
  t.cols = raw.dims[2];
  t.data = detail::decode_le<float>(raw.payload.data(), raw.payload.size() / 4);
  for (float v : t.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite value in " + where, {where});
  }
  if (validate) validate_softmax(t, "in " + where);
  return t;
}

inline void write_labels(const LabelMap& labels, const std::filesystem::path& path) {
  if (labels.data.size() != labels.pixel_count()) {
    throw Error(ErrorCode::DimMismatch, "label payload does not match its dims");
  }
  auto bytes = detail::header(detail::DType::u16, {labels.rows, labels.cols});
  detail::append_le(bytes, labels.data);
  detail::dump(path, bytes);
}

inline LabelMap read_labels(const std::filesystem::path& path,
                            std::uint16_t ignore_value = kIgnoreLabel) {
  auto raw = detail::read_raw(path);
  const std::string where = path.string();
  if (raw.dtype != detail::DType::u16 || raw.dims.size() != 2) {
    throw Error(ErrorCode::DimMismatch, "expected rank-2 u16 label map in " + where, {where});
  }
  LabelMap labels;
  labels.rows = raw.dims[0];
  labels.cols = raw.dims[1];
  labels.ignore_value = ignore_value;
  labels.data = detail::decode_le<std::uint16_t>(raw.payload.data(), raw.payload.size() / 2);
  return labels;
}

// ---------------------------------------------------------------------------
// Dataset manifest
//
// {
//   "schema": "mess.manifest/1",
//   "class_count": 4, "background_class": 0, "ignore_value": 65535,
//   "exit_points": [2, 4, 6],
//   "images": [
//     { "id": "img0000", "labels": "labels/img0000.mt",
//       "output_strides": [8, 8, 8],
//       "predictions": [ {"0": "pred/img0000_e0_a0.mt"}, {...}, {...} ] }
//   ]
// }
//
// `predictions[n]` maps an exit-architecture id (0..63) to the tensor that
// head produced at candidate exit point n. Relative paths resolve against
// the manifest's directory.

struct ImageEntry {
  std::string id;
  std::string label_path;
  std::vector<std::map<int, std::string>> predictions;
  std::vector<int> output_strides;
};

struct DatasetManifest {
  std::uint32_t class_count = 0;
  std::uint16_t background_class = 0;
  std::uint16_t ignore_value = kIgnoreLabel;
  std::vector<int> exit_points;
  std::vector<ImageEntry> images;
  std::filesystem::path base_dir;

  std::size_t num_points() const { return exit_points.size(); }

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }

  /// Architecture ids available at exit point n (identical for every image).
  std::vector<int> archs_at(std::size_t point) const {
    std::vector<int> ids;
    if (images.empty()) return ids;
    for (const auto& [arch, path] : images.front().predictions.at(point)) ids.push_back(arch);
    return ids;
  }

  PredictionTensor read_prediction(std::size_t image, std::size_t point, int arch) const {
    const auto& entry = images.at(image);
    const auto it = entry.predictions.at(point).find(arch);
    if (it == entry.predictions.at(point).end()) {
      throw Error(ErrorCode::UnknownArch, "image " + entry.id + " has no arch " + std::to_string(arch) +
                                              " at exit point " + std::to_string(point));
    }
    auto t = read_tensor(resolve(it->second));
    if (t.classes != class_count) {
      throw Error(ErrorCode::DimMismatch, "class count of " + it->second + " disagrees with manifest");
    }
    t.exit_id = static_cast<int>(point);
    return t;
  }

  LabelMap read_ground_truth(std::size_t image) const {
    const auto& entry = images.at(image);
    auto labels = read_labels(resolve(entry.label_path), ignore_value);
    validate_labels(labels, class_count, "in " + entry.label_path);
    return labels;
  }
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["schema"] = "mess.manifest/1";
  j["class_count"] = m.class_count;
  j["background_class"] = m.background_class;
  j["ignore_value"] = m.ignore_value;
  j["exit_points"] = m.exit_points;
  j["images"] = nlohmann::json::array();
  for (const auto& img : m.images) {
    nlohmann::json e;
    e["id"] = img.id;
    e["labels"] = img.label_path;
    e["output_strides"] = img.output_strides;
    e["predictions"] = nlohmann::json::array();
    for (const auto& per_point : img.predictions) {
      nlohmann::json archs = nlohmann::json::object();
      for (const auto& [arch, path] : per_point) archs[std::to_string(arch)] = path;
      e["predictions"].push_back(archs);
    }
    j["images"].push_back(e);
  }
  return j;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  const std::string text = manifest_to_json(m).dump(2) + "\n";
  detail::dump(path, std::vector<char>(text.begin(), text.end()));
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string(), {path.string()});
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  const std::string text = j.dump(2) + "\n";
  detail::dump(path, std::vector<char>(text.begin(), text.end()));
}

/// Parses a manifest document. With `check_files`, every referenced tensor
/// must exist; absent ones are collected into one MissingReferencedFile.
inline DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                          bool check_files = true) {
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    m.class_count = j.at("class_count").get<std::uint32_t>();
    m.background_class = j.value("background_class", std::uint16_t{0});
    m.ignore_value = j.value("ignore_value", kIgnoreLabel);
    m.exit_points = j.at("exit_points").get<std::vector<int>>();
    std::vector<int> default_strides = j.value("output_strides", std::vector<int>{});
    for (const auto& e : j.at("images")) {
      ImageEntry img;
      img.id = e.at("id").get<std::string>();
      img.label_path = e.at("labels").get<std::string>();
      img.output_strides = e.value("output_strides", default_strides);
      for (const auto& per_point : e.at("predictions")) {
        std::map<int, std::string> archs;
        for (const auto& [key, value] : per_point.items()) archs[std::stoi(key)] = value.get<std::string>();
        img.predictions.push_back(std::move(archs));
      }
      m.images.push_back(std::move(img));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::ParseError, "manifest: architecture keys must be integers");
  }

  if (m.class_count < 1) throw Error(ErrorCode::ParseError, "manifest: class_count must be positive");
  if (m.exit_points.empty()) throw Error(ErrorCode::ParseError, "manifest: no exit points");
  for (std::size_t i = 1; i < m.exit_points.size(); ++i) {
    if (m.exit_points[i] <= m.exit_points[i - 1]) {
      throw Error(ErrorCode::ParseError, "manifest: exit points must be strictly increasing");
    }
  }
  for (const auto& img : m.images) {
    if (img.predictions.size() != m.exit_points.size()) {
      throw Error(ErrorCode::InconsistentExitSet,
                  "image " + img.id + " lists " + std::to_string(img.predictions.size()) + " of " +
                      std::to_string(m.exit_points.size()) + " exit points");
    }
    for (std::size_t n = 0; n < img.predictions.size(); ++n) {
      if (img.predictions[n].empty()) {
        throw Error(ErrorCode::InconsistentExitSet,
                    "image " + img.id + " has no prediction at exit point " + std::to_string(n));
      }
      const auto& first = m.images.front().predictions[n];
      bool same = first.size() == img.predictions[n].size();
      for (auto it = first.cbegin(), jt = img.predictions[n].cbegin(); same && it != first.cend(); ++it, ++jt) {
        same = it->first == jt->first;
      }
      if (!same) {
        throw Error(ErrorCode::InconsistentExitSet,
                    "image " + img.id + " has a different architecture set at exit point " + std::to_string(n));
      }
      for (const auto& [arch, path] : img.predictions[n]) {
        if (arch < 0 || arch > 63) throw Error(ErrorCode::ParseError, "architecture id out of range: " + path);
      }
    }
    if (img.output_strides.size() != m.exit_points.size()) {
      throw Error(ErrorCode::InconsistentExitSet, "image " + img.id + " lacks an output stride per exit point");
    }
    for (int os : img.output_strides) {
      if (os < 1) throw Error(ErrorCode::ParseError, "image " + img.id + " has a non-positive output stride");
    }
  }

  if (check_files) {
    std::vector<std::string> missing;
    for (const auto& img : m.images) {
      if (!std::filesystem::exists(m.resolve(img.label_path))) missing.push_back(img.label_path);
      for (const auto& per_point : img.predictions) {
        for (const auto& [arch, path] : per_point) {
          if (!std::filesystem::exists(m.resolve(path))) missing.push_back(path);
        }
      }
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& p : missing) list += (list.empty() ? "" : ", ") + p;
      throw Error(ErrorCode::MissingReferencedFile, "missing: " + list, missing);
    }
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true) {
  return manifest_from_json(read_json(path), path.parent_path(), check_files);
}

// ---------------------------------------------------------------------------
// Cost profile
//
// {
//   "schema": "mess.costs/1",
//   "blocks": [ {"gflops": 10.0, "latency_ms": 1.2}, 20.0, ... ],
//   "exit_heads": [ {"block": 2, "arch": 0, "gflops": 0.4, "latency_ms": 0.1} ]
// }
//
// Blocks are numbered 1..B. cost(b_{i:j}) is the sum over blocks i+1..j.

enum class CostKind { workload, latency };

struct StageCost {
  double gflops = 0.0;
  std::optional<double> latency_ms;

  double get(CostKind kind) const {
    if (kind == CostKind::workload) return gflops;
    if (!latency_ms) throw Error(ErrorCode::MissingLatency, "cost profile has no latency figures");
    return *latency_ms;
  }
  friend bool operator==(const StageCost&, const StageCost&) = default;
};

struct CostProfile {
  std::vector<StageCost> blocks;
  /// (block ordinal of the exit point, arch id) -> head overhead.
  std::map<std::pair<int, int>, StageCost> exit_heads;

  std::size_t block_count() const { return blocks.size(); }

  double segment_cost(std::size_t from, std::size_t to, CostKind kind = CostKind::workload) const {
    if (from > to || to > blocks.size()) {
      throw Error(ErrorCode::InvalidArgument, "segment b_{" + std::to_string(from) + ":" + std::to_string(to) +
                                                  "} outside a " + std::to_string(blocks.size()) + "-block profile");
    }
    double sum = 0.0;
    for (std::size_t b = from; b < to; ++b) sum += blocks[b].get(kind);
    return sum;
  }

  double total(CostKind kind = CostKind::workload) const { return segment_cost(0, blocks.size(), kind); }

  double head_cost(int block, int arch, CostKind kind = CostKind::workload) const {
    const auto it = exit_heads.find({block, arch});
    if (it == exit_heads.end()) {
      throw Error(ErrorCode::UnknownArch, "no head cost for arch " + std::to_string(arch) + " at block " +
                                              std::to_string(block));
    }
    return it->second.get(kind);
  }

  bool has_latency() const {
    for (const auto& b : blocks)
      if (!b.latency_ms) return false;
    for (const auto& [key, h] : exit_heads)
      if (!h.latency_ms) return false;
    return !blocks.empty();
  }

  friend bool operator==(const CostProfile&, const CostProfile&) = default;
};

namespace detail {

inline StageCost parse_stage(const nlohmann::json& j) {
  StageCost s;
  if (j.is_number()) {
    s.gflops = j.get<double>();
  } else {
    s.gflops = j.at("gflops").get<double>();
    if (j.contains("latency_ms")) s.latency_ms = j.at("latency_ms").get<double>();
  }
  const bool bad_latency = s.latency_ms && !(*s.latency_ms > 0.0 && std::isfinite(*s.latency_ms));
  if (!(s.gflops > 0.0 && std::isfinite(s.gflops)) || bad_latency) {
    throw Error(ErrorCode::NonPositiveCost, "costs must be finite and strictly positive, got " + j.dump());
  }
  return s;
}

inline nlohmann::json stage_to_json(const StageCost& s) {
  nlohmann::json j;
  j["gflops"] = s.gflops;
  if (s.latency_ms) j["latency_ms"] = *s.latency_ms;
  return j;
}

}  // namespace detail

inline CostProfile cost_profile_from_json(const nlohmann::json& j) {
  CostProfile profile;
  try {
    for (const auto& b : j.at("blocks")) profile.blocks.push_back(detail::parse_stage(b));
    if (j.contains("exit_heads")) {
      for (const auto& h : j.at("exit_heads")) {
        const int block = h.at("block").get<int>();
        const int arch = h.at("arch").get<int>();
        profile.exit_heads[{block, arch}] = detail::parse_stage(h);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("cost profile: ") + e.what());
  }
  if (profile.blocks.empty()) throw Error(ErrorCode::ParseError, "cost profile: block list is empty");
  return profile;
}

inline nlohmann::json cost_profile_to_json(const CostProfile& profile) {
  nlohmann::json j;
  j["schema"] = "mess.costs/1";
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : profile.blocks) j["blocks"].push_back(detail::stage_to_json(b));
  j["exit_heads"] = nlohmann::json::array();
  for (const auto& [key, h] : profile.exit_heads) {
    auto e = detail::stage_to_json(h);
    e["block"] = key.first;
    e["arch"] = key.second;
    j["exit_heads"].push_back(e);
  }
  return j;
}

inline CostProfile load_cost_profile(const std::filesystem::path& path) {
  return cost_profile_from_json(read_json(path));
}

inline void save_cost_profile(const CostProfile& profile, const std::filesystem::path& path) {
  write_json(cost_profile_to_json(profile), path);
}

}  // namespace mess
