#pragma once

// Deterministic synthetic calibration/test sets for desk-scale experiments.
//
// Randomness: every draw is `uniform(key, i)` where
//
//   mix(z)         = SplitMix64 finaliser:
//                      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//                      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//                      z ^ (z >> 31)
//   uniform(k, i)  = (mix(k + (i + 1) * 0x9E3779B97F4A7C15) >> 11) * 2^-53
//   derive(k, x)   = mix(k ^ mix(x + 0x9E3779B97F4A7C15))
//
// and keys are derived from the user seed by chaining `derive` over a
// purpose tag and the image / exit / architecture indices. No draw depends
// on evaluation order, so any language can reproduce the fixtures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "mess/config.hpp"
#include "mess/error.hpp"
#include "mess/profiling.hpp"
#include "mess/tensorio.hpp"

namespace mess {

namespace rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t key, std::uint64_t x) { return mix(key ^ mix(x + kGolden)); }

inline double uniform(std::uint64_t key, std::uint64_t i) {
  return static_cast<double>(mix(key + (i + 1) * kGolden) >> 11) * 0x1.0p-53;
}

/// Sequential view over one key: the n-th call returns uniform(key, n).
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}
  double uniform() { return rng::uniform(key_, counter_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Box-Muller from two consecutive uniforms.
  double normal(double mean, double sd) {
    const double u1 = std::max(uniform(), 0x1.0p-53);
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::size_t below(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n))); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum Tag : std::uint64_t { kOrder = 1, kHardness = 2, kLayout = 3, kPixel = 4, kPrediction = 5, kBlocks = 6, kSplit = 7 };

}  // namespace rng

struct FixtureSpec {
  std::uint64_t seed = 1;
  /// Image draw. Splits of one seed share the cost profile (the "network").
  std::uint64_t split = 0;
  std::size_t images = 200;
  std::uint32_t rows = 32;
  std::uint32_t cols = 32;
  std::uint32_t classes = 4;
  /// Target pixel accuracy of each exit point, shallow to deep.
  std::vector<double> ladder = {0.6, 0.8, 0.95};
  /// 0: confidence independent of correctness; 1: strongly separated.
  double correlation = 1.0;
  std::size_t archs_per_exit = 1;
  int output_stride = 1;
  /// Share of images that every exit segments almost perfectly.
  double easy_fraction = 0.5;
  double easy_hardness = 0.02;
  std::size_t blocks = 12;
};

struct FixtureSet {
  DatasetManifest manifest;
  CostProfile profile;
  ExitPlacement placement;
};

/// Architecture ids used for the variants at each exit point.
inline std::vector<int> fixture_arch_ids(std::size_t variants) {
  std::vector<int> ids;
  for (std::size_t v = 0; v < variants; ++v) ids.push_back(static_cast<int>(v * ExitArch::kCount / variants));
  return ids;
}

/// Writes manifest.json, costs.json, labels/ and pred/ under `out_dir`.
///
/// Image i has a hardness h_i with mean 1 over the set (a balanced share of
/// images is easy). Exit n, variant v classifies a pixel correctly when the
/// pixel's shared uniform u < 1 - (1 - ladder[n]) * (1 + 0.15 v) * h_i, so
/// correctness is nested across depth and the expected pixel accuracy of
/// variant 0 equals the ladder. Correct pixels draw their top-1 probability
/// around 0.7 + 0.2 * correlation, wrong ones around 0.7 - 0.2 * correlation.
inline FixtureSet gen_synthetic_fixtures(const FixtureSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.ladder.empty()) throw Error(ErrorCode::BadLadder, "ladder needs at least one exit");
  for (std::size_t n = 0; n < spec.ladder.size(); ++n) {
    if (!(spec.ladder[n] > 0.0 && spec.ladder[n] <= 1.0)) throw Error(ErrorCode::BadLadder, "ladder values lie in (0,1]");
    if (n > 0 && spec.ladder[n] < spec.ladder[n - 1]) throw Error(ErrorCode::BadLadder, "ladder must be non-decreasing");
  }
  if (spec.classes < 2 || spec.classes > 65535) throw Error(ErrorCode::InvalidArgument, "need 2..65535 classes");
  if (spec.images == 0 || spec.rows == 0 || spec.cols == 0) throw Error(ErrorCode::InvalidArgument, "empty fixture");
  if (!(spec.correlation >= 0.0 && spec.correlation <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "correlation lies in [0,1]");
  }
  if (spec.archs_per_exit < 1 || spec.archs_per_exit > 64) throw Error(ErrorCode::InvalidArgument, "1..64 archs per exit");
  if (!(spec.easy_fraction >= 0.0 && spec.easy_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "easy fraction lies in [0,1)");
  }
  if (spec.output_stride < 1) throw Error(ErrorCode::InvalidArgument, "output stride must be >= 1");
  if (spec.blocks < spec.ladder.size()) throw Error(ErrorCode::TooManyExits, "fewer blocks than exits");

  std::uint64_t root = rng::mix(spec.seed);
  const std::size_t exits = spec.ladder.size();
  const auto arch_ids = fixture_arch_ids(spec.archs_per_exit);

  // Backbone profile and placement.
  FixtureSet set;
  {
    rng::Stream s(rng::derive(root, rng::kBlocks));
    for (std::size_t b = 0; b < spec.blocks; ++b) {
      StageCost c;
      c.gflops = std::round((4.0 + 12.0 * s.uniform()) * 100.0) / 100.0;
      c.latency_ms = std::round((0.3 * c.gflops + 0.05) * 1000.0) / 1000.0;
      set.profile.blocks.push_back(c);
    }
    set.placement = place_exit_points(set.profile, exits);
    const double total = set.profile.total();
    for (std::size_t n = 0; n < exits; ++n) {
      for (std::size_t v = 0; v < arch_ids.size(); ++v) {
        StageCost h;
        h.gflops = std::round(total * 0.004 * static_cast<double>(n + 1) * (1.0 - 0.2 * static_cast<double>(v) /
                                                                                     static_cast<double>(arch_ids.size())) *
                              1000.0) /
                   1000.0;
        h.latency_ms = std::round((0.3 * h.gflops + 0.02) * 1000.0) / 1000.0;
        set.profile.exit_heads[{set.placement[n], arch_ids[v]}] = h;
      }
    }
  }

  // Everything below is per image and keyed by the split.
  root = rng::derive(rng::derive(root, rng::kSplit), spec.split);

  // Balanced easy/hard split: images are ranked by a seeded shuffle and the
  // first easy_fraction of the ranking is easy.
  std::vector<std::size_t> order(spec.images);
  for (std::size_t i = 0; i < spec.images; ++i) order[i] = i;
  {
    rng::Stream s(rng::derive(root, rng::kOrder));
    for (std::size_t i = spec.images; i > 1; --i) std::swap(order[i - 1], order[s.below(i)]);
  }
  const auto easy_count = static_cast<std::size_t>(std::llround(spec.easy_fraction * static_cast<double>(spec.images)));
  const double easy_mean = spec.easy_hardness / 2.0;
  const double hard_mean =
      (1.0 - spec.easy_fraction * easy_mean) / (1.0 - spec.easy_fraction);
  const double hard_spread = std::min(0.5, hard_mean * 0.5);
  std::vector<double> hardness(spec.images);
  for (std::size_t rank = 0; rank < spec.images; ++rank) {
    const std::size_t i = order[rank];
    rng::Stream s(rng::derive(rng::derive(root, rng::kHardness), i));
    hardness[i] = rank < easy_count ? s.uniform(0.0, spec.easy_hardness)
                                    : s.uniform(hard_mean - hard_spread, hard_mean + hard_spread);
  }

  DatasetManifest& manifest = set.manifest;
  manifest.class_count = spec.classes;
  manifest.background_class = 0;
  manifest.exit_points = set.placement.exit_points;
  manifest.base_dir = out_dir;

  const double floor_conf = 1.0 / spec.classes + 0.02;
  for (std::size_t i = 0; i < spec.images; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img%04zu", i);
    ImageEntry entry;
    entry.id = name;
    entry.label_path = std::string("labels/") + name + ".mt";
    entry.output_strides.assign(exits, spec.output_stride);

    // Ground truth: background plus one rectangle per foreground class, each
    // side between a quarter and a half of the image, painted in a random
    // class order.
    LabelMap gt(spec.rows, spec.cols, 0);
    {
      rng::Stream s(rng::derive(rng::derive(root, rng::kLayout), i));
      std::vector<std::uint16_t> classes;
      for (std::uint32_t m = 1; m < spec.classes; ++m) classes.push_back(static_cast<std::uint16_t>(m));
      for (std::size_t k = classes.size(); k > 1; --k) std::swap(classes[k - 1], classes[s.below(k)]);
      const std::uint32_t min_h = std::max<std::uint32_t>(1, spec.rows / 4), min_w = std::max<std::uint32_t>(1, spec.cols / 4);
      for (const auto cls : classes) {
        const auto h = min_h + static_cast<std::uint32_t>(s.below(std::max<std::uint32_t>(1, spec.rows / 2 - min_h + 1)));
        const auto w = min_w + static_cast<std::uint32_t>(s.below(std::max<std::uint32_t>(1, spec.cols / 2 - min_w + 1)));
        const auto r0 = static_cast<std::uint32_t>(s.below(spec.rows - std::min(h, spec.rows) + 1));
        const auto c0 = static_cast<std::uint32_t>(s.below(spec.cols - std::min(w, spec.cols) + 1));
        for (std::uint32_t r = r0; r < std::min(spec.rows, r0 + h); ++r)
          for (std::uint32_t c = c0; c < std::min(spec.cols, c0 + w); ++c) gt.at(r, c) = cls;
      }
    }
    write_labels(gt, out_dir / entry.label_path);

    const std::uint64_t pixel_key = rng::derive(rng::derive(root, rng::kPixel), i);
    const std::size_t pixels = gt.pixel_count();
    std::vector<double> u(pixels);
    for (std::size_t p = 0; p < pixels; ++p) u[p] = rng::uniform(pixel_key, p);

    for (std::size_t n = 0; n < exits; ++n) {
      std::map<int, std::string> per_arch;
      for (std::size_t v = 0; v < arch_ids.size(); ++v) {
        const double degrade = 1.0 + 0.15 * static_cast<double>(v);
        const double acc = std::clamp(1.0 - (1.0 - spec.ladder[n]) * degrade * hardness[i], 0.0, 1.0);
        rng::Stream s(rng::derive(rng::derive(rng::derive(rng::derive(root, rng::kPrediction), i), n), v));
        PredictionTensor pred(spec.classes, spec.rows, spec.cols);
        for (std::size_t p = 0; p < pixels; ++p) {
          const bool correct = u[p] < acc;
          const double wrong_pick = s.uniform();
          const double mean = correct ? 0.7 + 0.2 * spec.correlation : 0.7 - 0.2 * spec.correlation;
          const double conf = std::clamp(s.normal(mean, 0.08), floor_conf, 0.999);
          const std::uint32_t g = gt.data[p];
          const std::uint32_t label =
              correct ? g
                      : static_cast<std::uint32_t>(
                            (g + 1 + std::min<std::uint32_t>(spec.classes - 2,
                                                             static_cast<std::uint32_t>(wrong_pick * (spec.classes - 1)))) %
                            spec.classes);
          const float rest = static_cast<float>((1.0 - conf) / (spec.classes - 1));
          for (std::uint32_t m = 0; m < spec.classes; ++m) {
            pred.data[std::size_t{m} * pixels + p] = m == label ? static_cast<float>(conf) : rest;
          }
        }
        char pname[64];
        std::snprintf(pname, sizeof(pname), "pred/%s_p%zu_a%d.mt", name, n, arch_ids[v]);
        write_tensor(pred, out_dir / pname);
        per_arch[arch_ids[v]] = pname;
      }
      entry.predictions.push_back(std::move(per_arch));
    }
    manifest.images.push_back(std::move(entry));
  }

  save_manifest(manifest, out_dir / "manifest.json");
  save_cost_profile(set.profile, out_dir / "costs.json");
  return set;
}

}  // namespace mess
