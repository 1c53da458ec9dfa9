#pragma once

// Per-pixel confidence, semantic-edge smoothing and the image-level exit
// rule used by input-dependent inference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mess/error.hpp"
#include "mess/tensorio.hpp"

namespace mess {

enum class Estimator { top1, entropy };

inline std::string_view to_string(Estimator e) { return e == Estimator::top1 ? "top1" : "entropy"; }

inline Estimator parse_estimator(std::string_view s) {
  if (s == "top1") return Estimator::top1;
  if (s == "entropy") return Estimator::entropy;
  throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(s) + "'");
}

/// How the raw boundary set is turned into the smoothing mask.
enum class EdgeMorphology { dilate, erode };

inline std::string_view to_string(EdgeMorphology m) { return m == EdgeMorphology::dilate ? "dilate" : "erode"; }

inline EdgeMorphology parse_edge_morphology(std::string_view s) {
  if (s == "dilate") return EdgeMorphology::dilate;
  if (s == "erode") return EdgeMorphology::erode;
  throw Error(ErrorCode::InvalidArgument, "unknown edge morphology '" + std::string(s) + "'");
}

struct ConfidenceMap {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> values;

  ConfidenceMap() = default;
  ConfidenceMap(std::uint32_t r, std::uint32_t c, double fill = 0.0)
      : rows(r), cols(c), values(std::size_t{r} * c, fill) {}

  double& at(std::uint32_t r, std::uint32_t c) { return values[std::size_t{r} * cols + c]; }
  double at(std::uint32_t r, std::uint32_t c) const { return values[std::size_t{r} * cols + c]; }

  friend bool operator==(const ConfidenceMap&, const ConfidenceMap&) = default;
};

struct EdgeMask {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> values;

  EdgeMask() = default;
  EdgeMask(std::uint32_t r, std::uint32_t c) : rows(r), cols(c), values(std::size_t{r} * c, 0) {}

  std::uint8_t& at(std::uint32_t r, std::uint32_t c) { return values[std::size_t{r} * cols + c]; }
  std::uint8_t at(std::uint32_t r, std::uint32_t c) const { return values[std::size_t{r} * cols + c]; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(values.begin(), values.end(), 1)); }

  friend bool operator==(const EdgeMask&, const EdgeMask&) = default;
};

/// Thresholds of one selected exit. `th_img` above 1 disables early exiting.
struct ExitThresholds {
  double th_pix = 0.9;
  double th_img = 0.5;
  bool edge_enhancement = false;

  friend bool operator==(const ExitThresholds&, const ExitThresholds&) = default;
};

/// top1: max probability. entropy: 1 - H(p)/ln M on the renormalised pixel
/// distribution, so a one-hot pixel scores 1 and a uniform one 0.
inline ConfidenceMap pixel_confidence_map(const PredictionTensor& pred, Estimator estimator) {
  if (estimator == Estimator::entropy && pred.classes < 2) {
    throw Error(ErrorCode::DegenerateClassCount, "entropy confidence needs at least two classes");
  }
  ConfidenceMap out(pred.rows, pred.cols);
  const std::size_t n = pred.pixel_count();
  const double log_m = std::log(static_cast<double>(pred.classes));
  for (std::size_t p = 0; p < n; ++p) {
    if (estimator == Estimator::top1) {
      double best = pred.prob(0, p);
      for (std::uint32_t m = 1; m < pred.classes; ++m) best = std::max(best, double{pred.prob(m, p)});
      out.values[p] = std::clamp(best, 0.0, 1.0);
    } else {
      double sum = 0.0;
      for (std::uint32_t m = 0; m < pred.classes; ++m) sum += std::max(0.0, double{pred.prob(m, p)});
      double h = 0.0;
      if (sum > 0.0) {
        for (std::uint32_t m = 0; m < pred.classes; ++m) {
          const double q = std::max(0.0, double{pred.prob(m, p)}) / sum;
          if (q > 0.0) h -= q * std::log(q);
        }
      } else {
        h = log_m;
      }
      out.values[p] = std::clamp(1.0 - h / log_m, 0.0, 1.0);
    }
  }
  return out;
}

namespace detail {

/// Square structuring element of side `side`, anchored at its centre; for
/// even sides the extra row/column lies on the positive side.
inline EdgeMask morph(const EdgeMask& in, int side, EdgeMorphology op) {
  if (side <= 1) return in;
  const int lo = (side - 1) / 2;
  const int hi = side - 1 - lo;
  const int rows = static_cast<int>(in.rows);
  const int cols = static_cast<int>(in.cols);
  EdgeMask out(in.rows, in.cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool any = false;
      bool all = true;
      for (int dr = -lo; dr <= hi; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= rows) continue;
        for (int dc = -lo; dc <= hi; ++dc) {
          const int cc = c + dc;
          if (cc < 0 || cc >= cols) continue;
          const bool v = in.at(static_cast<std::uint32_t>(rr), static_cast<std::uint32_t>(cc)) != 0;
          any = any || v;
          all = all && v;
        }
      }
      out.at(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)) =
          (op == EdgeMorphology::dilate ? any : all) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace detail

/// Boundary pixels of a discrete label map (any 4-neighbour carries a
/// different label), then widened (or, literally, eroded) by a square of
/// side `output_stride`.
inline EdgeMask semantic_edge_mask(const LabelMap& labels, int output_stride,
                                   EdgeMorphology morphology = EdgeMorphology::dilate) {
  if (output_stride < 1) throw Error(ErrorCode::InvalidArgument, "output stride must be >= 1");
  EdgeMask edges(labels.rows, labels.cols);
  for (std::uint32_t r = 0; r < labels.rows; ++r) {
    for (std::uint32_t c = 0; c < labels.cols; ++c) {
      const auto v = labels.at(r, c);
      const bool edge = (r > 0 && labels.at(r - 1, c) != v) || (r + 1 < labels.rows && labels.at(r + 1, c) != v) ||
                        (c > 0 && labels.at(r, c - 1) != v) || (c + 1 < labels.cols && labels.at(r, c + 1) != v);
      edges.at(r, c) = edge ? 1 : 0;
    }
  }
  return detail::morph(edges, output_stride, morphology);
}

/// Replaces masked pixels with the lower median of the border-clamped
/// (4*os+1)^2 window of the input map. Unmasked pixels are copied.
inline ConfidenceMap enhance_confidence_map(const ConfidenceMap& cmap, const EdgeMask& mask, int output_stride) {
  if (cmap.rows != mask.rows || cmap.cols != mask.cols) {
    throw Error(ErrorCode::DimMismatch, "confidence map and edge mask differ in size");
  }
  if (output_stride < 1) throw Error(ErrorCode::InvalidArgument, "output stride must be >= 1");
  const int reach = 2 * output_stride;
  const int rows = static_cast<int>(cmap.rows);
  const int cols = static_cast<int>(cmap.cols);
  ConfidenceMap out = cmap;
  std::vector<double> window;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (mask.at(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)) == 0) continue;
      window.clear();
      const int r0 = std::max(0, r - reach), r1 = std::min(rows - 1, r + reach);
      const int c0 = std::max(0, c - reach), c1 = std::min(cols - 1, c + reach);
      for (int rr = r0; rr <= r1; ++rr)
        for (int cc = c0; cc <= c1; ++cc)
          window.push_back(cmap.at(static_cast<std::uint32_t>(rr), static_cast<std::uint32_t>(cc)));
      const auto mid = window.begin() + static_cast<std::ptrdiff_t>((window.size() - 1) / 2);
      std::nth_element(window.begin(), mid, window.end());
      out.at(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)) = *mid;
    }
  }
  return out;
}

/// Fraction of pixels whose confidence reaches `th_pix`.
inline double image_confidence(const ConfidenceMap& cmap, double th_pix) {
  if (cmap.values.empty()) return 0.0;
  std::size_t hits = 0;
  for (double v : cmap.values) hits += v >= th_pix ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(cmap.values.size());
}

enum class ExitDecision { Exit, Continue };

inline ExitDecision exit_decision(double c_img, double th_img, bool is_last_selected_exit) {
  return (c_img >= th_img || is_last_selected_exit) ? ExitDecision::Exit : ExitDecision::Continue;
}

/// Confidence map of one prediction, optionally smoothed along the edges of
/// its own argmax segmentation.
inline ConfidenceMap exit_confidence_map(const PredictionTensor& pred, Estimator estimator, bool edge_enhancement,
                                         int output_stride, EdgeMorphology morphology = EdgeMorphology::dilate) {
  auto cmap = pixel_confidence_map(pred, estimator);
  if (!edge_enhancement) return cmap;
  const auto mask = semantic_edge_mask(argmax_labels(pred), output_stride, morphology);
  return enhance_confidence_map(cmap, mask, output_stride);
}

}  // namespace mess
