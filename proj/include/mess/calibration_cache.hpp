#pragma once

// Memoised calibration-set statistics. Every (image, exit point, exit
// architecture) prediction is read once; its confusion matrix against the
// ground truth and its image confidence over the th_pix grid (with and
// without edge smoothing) are kept, so any MESS configuration can be scored
// by lookup instead of re-running inference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mess/confidence.hpp"
#include "mess/config.hpp"
#include "mess/cost_model.hpp"
#include "mess/error.hpp"
#include "mess/metrics.hpp"
#include "mess/profiling.hpp"
#include "mess/tensorio.hpp"

namespace mess {

inline double round_grid(double v) { return std::round(v * 1000.0) / 1000.0; }

/// {0.50, 0.55, ..., 0.95, 0.99}
inline std::vector<double> default_th_pix_grid() {
  std::vector<double> grid;
  for (int k = 0; k < 10; ++k) grid.push_back(round_grid(0.5 + 0.05 * k));
  grid.push_back(0.99);
  return grid;
}

/// {0.00, 0.05, ..., 1.00}
inline std::vector<double> default_th_img_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(round_grid(0.05 * k));
  return grid;
}

struct CacheOptions {
  std::vector<double> th_pix_grid = default_th_pix_grid();
  Estimator estimator = Estimator::top1;
  EdgeMorphology morphology = EdgeMorphology::dilate;
  /// Restrict to these architecture ids; empty keeps every one in the manifest.
  std::vector<int> arch_filter;
  unsigned threads = 0;
};

/// Scores of one configuration on the calibration set.
struct Evaluation {
  double accuracy = 0.0;  // dataset mIoU under the setting's accuracy rule
  double cost = 0.0;
  std::vector<double> exit_rates;          // fraction reaching each selected exit
  std::vector<std::size_t> exit_counts;    // images finishing at each selected exit
  ConfusionMatrix confusion;
};

struct EvalOptions {
  CostKind cost_kind = CostKind::workload;
  bool exclude_background = false;
};

class CalibrationCache {
 public:
  CalibrationCache() = default;

  std::uint32_t class_count() const { return class_count_; }
  std::uint16_t background_class() const { return background_class_; }
  Estimator estimator() const { return estimator_; }
  EdgeMorphology morphology() const { return morphology_; }
  const std::vector<double>& th_pix_grid() const { return th_pix_grid_; }
  const ExitPlacement& placement() const { return placement_; }
  const CostProfile& profile() const { return profile_; }
  void set_profile(CostProfile profile) { profile_ = std::move(profile); }
  const std::vector<std::string>& image_ids() const { return image_ids_; }
  std::size_t image_count() const { return image_ids_.size(); }
  std::size_t num_points() const { return archs_.size(); }
  const std::vector<int>& archs_at(std::size_t point) const { return archs_.at(point); }
  std::size_t slot_count() const { return slot_offset_.empty() ? 0 : slot_offset_.back(); }

  std::optional<std::size_t> slot(std::size_t point, int arch) const {
    if (point >= archs_.size()) return std::nullopt;
    const auto& ids = archs_[point];
    const auto it = std::find(ids.begin(), ids.end(), arch);
    if (it == ids.end()) return std::nullopt;
    return slot_offset_[point] + static_cast<std::size_t>(it - ids.begin());
  }

  std::optional<std::size_t> th_pix_index(double th_pix) const {
    for (std::size_t g = 0; g < th_pix_grid_.size(); ++g)
      if (std::abs(th_pix_grid_[g] - th_pix) <= 1e-9) return g;
    return std::nullopt;
  }

  std::span<const std::uint64_t> confusion(std::size_t image, std::size_t slot) const {
    const std::size_t mm = std::size_t{class_count_} * class_count_;
    return {confusion_.data() + (image * slot_count() + slot) * mm, mm};
  }

  double image_confidence(std::size_t image, std::size_t slot, bool edge, std::size_t grid_index) const {
    return confidence_[((image * slot_count() + slot) * 2 + (edge ? 1 : 0)) * th_pix_grid_.size() + grid_index];
  }

  friend bool operator==(const CalibrationCache&, const CalibrationCache&) = default;

  friend CalibrationCache build_calibration_cache(const DatasetManifest&, const ExitPlacement&, const CostProfile&,
                                                  const CacheOptions&);
  friend void save_cache(const CalibrationCache&, const std::filesystem::path&);
  friend CalibrationCache load_cache(const std::filesystem::path&);

 private:
  void allocate() {
    slot_offset_.assign(1, 0);
    for (const auto& ids : archs_) slot_offset_.push_back(slot_offset_.back() + ids.size());
    confusion_.assign(image_ids_.size() * slot_count() * class_count_ * class_count_, 0);
    confidence_.assign(image_ids_.size() * slot_count() * 2 * th_pix_grid_.size(), 0.0);
  }

  std::uint32_t class_count_ = 0;
  std::uint16_t background_class_ = 0;
  Estimator estimator_ = Estimator::top1;
  EdgeMorphology morphology_ = EdgeMorphology::dilate;
  std::vector<double> th_pix_grid_;
  ExitPlacement placement_;
  CostProfile profile_;
  std::vector<std::string> image_ids_;
  std::vector<std::vector<int>> archs_;
  std::vector<std::size_t> slot_offset_;
  std::vector<std::uint64_t> confusion_;
  std::vector<double> confidence_;
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; each index is
/// visited by exactly one worker.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const unsigned k = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
  if (k <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(k);
  std::vector<std::thread> workers;
  for (unsigned t = 0; t < k; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += k) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline CalibrationCache build_calibration_cache(const DatasetManifest& manifest, const ExitPlacement& placement,
                                                const CostProfile& profile, const CacheOptions& options = {}) {
  if (manifest.exit_points != placement.exit_points) {
    throw Error(ErrorCode::ManifestMismatch, "manifest exit points differ from the placement");
  }
  if (options.th_pix_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty th_pix grid");
  for (double th : options.th_pix_grid) {
    if (!(th >= 0.0 && th <= 1.0)) throw Error(ErrorCode::InvalidArgument, "th_pix outside [0,1]");
  }
  CalibrationCache cache;
  cache.class_count_ = manifest.class_count;
  cache.background_class_ = manifest.background_class;
  cache.estimator_ = options.estimator;
  cache.morphology_ = options.morphology;
  cache.th_pix_grid_ = options.th_pix_grid;
  cache.placement_ = placement;
  cache.profile_ = profile;
  for (const auto& img : manifest.images) cache.image_ids_.push_back(img.id);
  for (std::size_t n = 0; n < manifest.num_points(); ++n) {
    std::vector<int> ids;
    for (int arch : manifest.archs_at(n)) {
      if (options.arch_filter.empty() ||
          std::find(options.arch_filter.begin(), options.arch_filter.end(), arch) != options.arch_filter.end()) {
        ids.push_back(arch);
      }
    }
    cache.archs_.push_back(std::move(ids));
  }
  cache.allocate();

  const std::size_t grid = cache.th_pix_grid_.size();
  const std::size_t mm = std::size_t{cache.class_count_} * cache.class_count_;
  parallel_for(manifest.images.size(), options.threads, [&](std::size_t i) {
    const auto gt = manifest.read_ground_truth(i);
    for (std::size_t n = 0; n < cache.archs_.size(); ++n) {
      const int os = manifest.images[i].output_strides[n];
      for (std::size_t a = 0; a < cache.archs_[n].size(); ++a) {
        const auto pred = manifest.read_prediction(i, n, cache.archs_[n][a]);
        if (pred.rows != gt.rows || pred.cols != gt.cols) {
          throw Error(ErrorCode::DimMismatch, "prediction of image " + manifest.images[i].id + " differs in size");
        }
        const std::size_t slot = cache.slot_offset_[n] + a;
        const auto cm = confusion_matrix(argmax_labels(pred), gt, cache.class_count_);
        std::copy(cm.raw().begin(), cm.raw().end(),
                  cache.confusion_.begin() + static_cast<std::ptrdiff_t>((i * cache.slot_count() + slot) * mm));
        for (int edge = 0; edge < 2; ++edge) {
          const auto cmap = exit_confidence_map(pred, cache.estimator_, edge == 1, os, cache.morphology_);
          for (std::size_t g = 0; g < grid; ++g) {
            cache.confidence_[((i * cache.slot_count() + slot) * 2 + static_cast<std::size_t>(edge)) * grid + g] =
                mess::image_confidence(cmap, cache.th_pix_grid_[g]);
          }
        }
      }
    }
  });
  return cache;
}

// ---------------------------------------------------------------------------
// Evaluation

/// A configuration bound to cache slots and grid indices.
struct ResolvedExit {
  std::size_t slot = 0;
  std::size_t th_pix_index = 0;
  double th_img = 0.0;
  bool edge = false;
};

inline std::vector<ResolvedExit> resolve_config(const MessConfig& config, const CalibrationCache& cache) {
  check_config(config);
  if (config.num_points != cache.num_points()) {
    throw Error(ErrorCode::ConfigSettingMismatch, "config has " + std::to_string(config.num_points) +
                                                      " exit points, cache has " + std::to_string(cache.num_points()));
  }
  std::vector<ResolvedExit> out;
  for (std::size_t k = 0; k < config.exits.size(); ++k) {
    const auto& e = config.exits[k];
    const auto slot = cache.slot(e.point, e.arch.id());
    if (!slot) {
      throw Error(ErrorCode::UnknownArch, "arch " + std::to_string(e.arch.id()) + " not cached at exit point " +
                                              std::to_string(e.point));
    }
    ResolvedExit r;
    r.slot = *slot;
    const bool decides = config.setting == InferenceSetting::input_dependent && k + 1 < config.exits.size();
    if (decides) {
      const auto g = cache.th_pix_index(e.thresholds.th_pix);
      if (!g) throw Error(ErrorCode::UnknownThreshold, "th_pix " + std::to_string(e.thresholds.th_pix) + " not cached");
      if (!(e.thresholds.th_img >= 0.0) || !std::isfinite(e.thresholds.th_img)) {
        throw Error(ErrorCode::InvalidArgument, "th_img must be finite and non-negative");
      }
      r.th_pix_index = *g;
      r.th_img = e.thresholds.th_img;
      r.edge = e.thresholds.edge_enhancement;
    }
    out.push_back(r);
  }
  return out;
}

namespace detail {

inline void add_counts(ConfusionMatrix& into, std::span<const std::uint64_t> counts) {
  auto& raw = into.raw();
  for (std::size_t i = 0; i < counts.size(); ++i) raw[i] += counts[i];
}

inline double accuracy_of(const ConfusionMatrix& cm, std::uint16_t background, const EvalOptions& options) {
  return options.exclude_background ? miou(cm, background) : miou(cm);
}

}  // namespace detail

/// Index of the selected exit each image finishes at (input-dependent walk).
inline std::vector<std::size_t> exit_assignment(const std::vector<ResolvedExit>& exits, const CalibrationCache& cache) {
  std::vector<std::size_t> finish(cache.image_count(), exits.size() - 1);
  for (std::size_t i = 0; i < cache.image_count(); ++i) {
    for (std::size_t k = 0; k + 1 < exits.size(); ++k) {
      const auto& e = exits[k];
      const double c = cache.image_confidence(i, e.slot, e.edge, e.th_pix_index);
      if (exit_decision(c, e.th_img, false) == ExitDecision::Exit) {
        finish[i] = k;
        break;
      }
    }
  }
  return finish;
}

/// Exit rates and counts from a per-image finishing index.
inline void rates_from_assignment(const std::vector<std::size_t>& finish, std::size_t selected, Evaluation& out) {
  out.exit_counts.assign(selected, 0);
  for (auto k : finish) ++out.exit_counts[k];
  out.exit_rates.assign(selected, 0.0);
  std::size_t remaining = finish.size();
  for (std::size_t k = 0; k < selected; ++k) {
    out.exit_rates[k] = finish.empty() ? (k == 0 ? 1.0 : 0.0)
                                       : static_cast<double>(remaining) / static_cast<double>(finish.size());
    remaining -= out.exit_counts[k];
  }
}

inline Evaluation evaluate_resolved(const MessConfig& config, const std::vector<ResolvedExit>& exits,
                                    const CalibrationCache& cache, const EvalOptions& options = {}) {
  Evaluation ev;
  ev.confusion = ConfusionMatrix(cache.class_count());
  const std::size_t images = cache.image_count();
  if (config.setting == InferenceSetting::input_dependent) {
    const auto finish = exit_assignment(exits, cache);
    rates_from_assignment(finish, exits.size(), ev);
    for (std::size_t i = 0; i < images; ++i) detail::add_counts(ev.confusion, cache.confusion(i, exits[finish[i]].slot));
    ev.cost = cost_of(config, cache.profile(), cache.placement(), options.cost_kind, ev.exit_rates);
  } else {
    // Static settings: every image runs every selected exit; accuracy is
    // read at the shallowest one (the only one for budgeted/final-only).
    ev.exit_rates.assign(exits.size(), 1.0);
    ev.exit_counts.assign(exits.size(), 0);
    ev.exit_counts.back() = images;
    for (std::size_t i = 0; i < images; ++i) detail::add_counts(ev.confusion, cache.confusion(i, exits.front().slot));
    ev.cost = cost_of(config, cache.profile(), cache.placement(), options.cost_kind);
  }
  ev.accuracy = detail::accuracy_of(ev.confusion, cache.background_class(), options);
  return ev;
}

inline Evaluation evaluate_config(const MessConfig& config, const CalibrationCache& cache,
                                  const EvalOptions& options = {}) {
  return evaluate_resolved(config, resolve_config(config, cache), cache, options);
}

// ---------------------------------------------------------------------------
// Persistence: "MESC" + u8 version, then little-endian fields in the order
// written by save_cache.

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void opt_f64(const std::optional<double>& v) {
    u8(v ? 1 : 0);
    f64(v.value_or(0.0));
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::optional<double> opt_f64() {
    const bool has = u8() != 0;
    const double v = f64();
    return has ? std::optional<double>(v) : std::nullopt;
  }
  std::size_t count(std::size_t elem_size) {
    const auto n = u64();
    if (elem_size > 0 && n > (bytes_.size() - pos_) / elem_size) {
      throw Error(ErrorCode::ParseError, "cache file is truncated");
    }
    return static_cast<std::size_t>(n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::ParseError, "cache file is truncated");
  }
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

inline constexpr char kCacheMagic[4] = {'M', 'E', 'S', 'C'};
inline constexpr std::uint8_t kCacheVersion = 1;

}  // namespace detail

inline void save_cache(const CalibrationCache& cache, const std::filesystem::path& path) {
  detail::ByteWriter w;
  for (char c : detail::kCacheMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(detail::kCacheVersion);
  w.u64(cache.class_count_);
  w.u64(cache.background_class_);
  w.u8(static_cast<std::uint8_t>(cache.estimator_));
  w.u8(static_cast<std::uint8_t>(cache.morphology_));
  w.u64(cache.th_pix_grid_.size());
  for (double g : cache.th_pix_grid_) w.f64(g);
  w.u64(cache.placement_.size());
  for (int k : cache.placement_.exit_points) w.u64(static_cast<std::uint64_t>(k));
  w.u64(cache.profile_.blocks.size());
  for (const auto& b : cache.profile_.blocks) {
    w.f64(b.gflops);
    w.opt_f64(b.latency_ms);
  }
  w.u64(cache.profile_.exit_heads.size());
  for (const auto& [key, h] : cache.profile_.exit_heads) {
    w.u64(static_cast<std::uint64_t>(key.first));
    w.u64(static_cast<std::uint64_t>(key.second));
    w.f64(h.gflops);
    w.opt_f64(h.latency_ms);
  }
  w.u64(cache.image_ids_.size());
  for (const auto& id : cache.image_ids_) w.str(id);
  w.u64(cache.archs_.size());
  for (const auto& ids : cache.archs_) {
    w.u64(ids.size());
    for (int a : ids) w.u64(static_cast<std::uint64_t>(a));
  }
  w.u64(cache.confusion_.size());
  for (auto c : cache.confusion_) w.u64(c);
  w.u64(cache.confidence_.size());
  for (double c : cache.confidence_) w.f64(c);
  detail::dump(path, w.bytes());
}

inline CalibrationCache load_cache(const std::filesystem::path& path) {
  detail::ByteReader r(detail::slurp(path));
  for (char c : detail::kCacheMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw Error(ErrorCode::BadMagic, path.string() + " is not a cache file");
  }
  if (r.u8() != detail::kCacheVersion) throw Error(ErrorCode::BadMagic, "unsupported cache version in " + path.string());
  CalibrationCache cache;
  cache.class_count_ = static_cast<std::uint32_t>(r.u64());
  cache.background_class_ = static_cast<std::uint16_t>(r.u64());
  cache.estimator_ = static_cast<Estimator>(r.u8());
  cache.morphology_ = static_cast<EdgeMorphology>(r.u8());
  cache.th_pix_grid_.resize(r.count(8));
  for (auto& g : cache.th_pix_grid_) g = r.f64();
  cache.placement_.exit_points.resize(r.count(8));
  for (auto& k : cache.placement_.exit_points) k = static_cast<int>(r.u64());
  cache.profile_.blocks.resize(r.count(9));
  for (auto& b : cache.profile_.blocks) {
    b.gflops = r.f64();
    b.latency_ms = r.opt_f64();
  }
  const std::size_t heads = r.count(33);
  for (std::size_t h = 0; h < heads; ++h) {
    const int block = static_cast<int>(r.u64());
    const int arch = static_cast<int>(r.u64());
    StageCost s;
    s.gflops = r.f64();
    s.latency_ms = r.opt_f64();
    cache.profile_.exit_heads[{block, arch}] = s;
  }
  cache.image_ids_.resize(r.count(8));
  for (auto& id : cache.image_ids_) id = r.str();
  cache.archs_.resize(r.count(8));
  for (auto& ids : cache.archs_) {
    ids.resize(r.count(8));
    for (auto& a : ids) a = static_cast<int>(r.u64());
  }
  cache.allocate();
  if (r.count(8) != cache.confusion_.size()) throw Error(ErrorCode::ParseError, "cache confusion table size mismatch");
  for (auto& c : cache.confusion_) c = r.u64();
  if (r.count(8) != cache.confidence_.size()) throw Error(ErrorCode::ParseError, "cache confidence table size mismatch");
  for (auto& c : cache.confidence_) c = r.f64();
  if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes in " + path.string());
  return cache;
}

}  // namespace mess
