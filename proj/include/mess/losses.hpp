#pragma once

// Forward-only evaluation of the exit-dropout pre-training loss and the
// positive-filtering distillation loss. No gradients are computed; these
// exist to check external training pipelines and fixtures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mess/confidence.hpp"
#include "mess/error.hpp"
#include "mess/tensorio.hpp"

namespace mess {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kDefaultAlpha = 0.5;

enum class KlDirection {
  teacher_student,  // KL(y_N || y_i), the final exit is the reference
  student_teacher,  // KL(y_i || y_N)
};

enum class DropoutSchedule {
  divisors,     // every early exit i with j mod i == 0
  round_robin,  // exactly one early exit per batch, cycling 1..N-1
};

struct ExitTerm {
  int exit_id = 0;  // 1-based
  double ce_term = 0.0;
  double kl_term = 0.0;
};

struct LossReport {
  double total = 0.0;
  std::vector<ExitTerm> per_exit_terms;
  std::vector<int> active_exit_set;
};

/// One image of a batch: the prediction of every exit (shallow to deep) and
/// its ground truth.
struct LossSample {
  std::vector<PredictionTensor> exits;
  LabelMap gt;
};

namespace detail {

struct MeanAccumulator {
  double sum = 0.0;
  std::size_t count = 0;

  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

inline void check_same_dims(const PredictionTensor& a, const PredictionTensor& b) {
  if (a.classes != b.classes || a.rows != b.rows || a.cols != b.cols) {
    throw Error(ErrorCode::DimMismatch, "prediction tensors differ in shape");
  }
}

inline void accumulate_ce(MeanAccumulator& acc, const PredictionTensor& pred, const LabelMap& gt,
                          const EdgeMask* mask, const LabelMap* must_match) {
  if (pred.rows != gt.rows || pred.cols != gt.cols) {
    throw Error(ErrorCode::DimMismatch, "prediction and ground truth differ in size");
  }
  if (mask && (mask->rows != gt.rows || mask->cols != gt.cols)) {
    throw Error(ErrorCode::DimMismatch, "pixel mask differs in size");
  }
  const std::size_t n = gt.pixel_count();
  for (std::size_t p = 0; p < n; ++p) {
    const auto g = gt.data[p];
    if (g == gt.ignore_value) continue;
    if (mask && mask->values[p] == 0) continue;
    if (must_match && must_match->data[p] != g) continue;
    if (g >= pred.classes) throw Error(ErrorCode::OutOfRangeClass, "label " + std::to_string(g));
    const double q = std::clamp(double{pred.prob(g, p)}, kProbabilityFloor, 1.0);
    acc.sum -= std::log(q);
    ++acc.count;
  }
}

// Both distributions are renormalised per pixel so the Gibbs inequality
// holds despite f32 export rounding.
inline void accumulate_kl(MeanAccumulator& acc, const PredictionTensor& student, const PredictionTensor& teacher) {
  check_same_dims(student, teacher);
  const std::size_t n = student.pixel_count();
  for (std::size_t p = 0; p < n; ++p) {
    double ts = 0.0, ss = 0.0;
    for (std::uint32_t m = 0; m < teacher.classes; ++m) {
      ts += std::max(0.0, double{teacher.prob(m, p)});
      ss += std::max(0.0, double{student.prob(m, p)});
    }
    double kl = 0.0;
    for (std::uint32_t m = 0; m < teacher.classes; ++m) {
      const double t = std::max(0.0, double{teacher.prob(m, p)}) / ts;
      if (t <= 0.0) continue;
      const double s = std::max(kProbabilityFloor, std::max(0.0, double{student.prob(m, p)}) / ss);
      kl += t * (std::log(t) - std::log(s));
    }
    acc.sum += kl;
    ++acc.count;
  }
}

inline void check_batch(std::span<const LossSample> batch) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  const std::size_t n = batch.front().exits.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least two exits");
  for (const auto& s : batch) {
    if (s.exits.size() != n) throw Error(ErrorCode::DimMismatch, "samples disagree on the number of exits");
  }
}

inline double sum_terms(const std::vector<ExitTerm>& terms) {
  double total = 0.0;
  for (const auto& t : terms) total += t.ce_term + t.kl_term;
  return total;
}

}  // namespace detail

/// Mean of -ln p[gt] over non-ignored pixels selected by `mask` (all when
/// null). Probabilities are floored at 1e-12.
inline double cross_entropy(const PredictionTensor& pred, const LabelMap& gt, const EdgeMask* mask = nullptr) {
  detail::MeanAccumulator acc;
  detail::accumulate_ce(acc, pred, gt, mask, nullptr);
  if (acc.count == 0) throw Error(ErrorCode::EmptySelection, "no pixel selected for cross-entropy");
  return acc.mean();
}

/// Pixel-mean KL divergence. The default direction treats `teacher` as the
/// reference distribution: KL(teacher || student).
inline double kl_divergence(const PredictionTensor& student, const PredictionTensor& teacher,
                            KlDirection direction = KlDirection::teacher_student) {
  detail::MeanAccumulator acc;
  if (direction == KlDirection::teacher_student) {
    detail::accumulate_kl(acc, student, teacher);
  } else {
    detail::accumulate_kl(acc, teacher, student);
  }
  return acc.mean();
}

/// Early exits whose cross-entropy term is active in batch j, plus exit N.
inline std::vector<int> active_exits(std::size_t num_exits, long long batch_index,
                                     DropoutSchedule schedule = DropoutSchedule::divisors) {
  if (num_exits < 2) throw Error(ErrorCode::InvalidArgument, "need at least two exits");
  if (batch_index < 1) throw Error(ErrorCode::InvalidArgument, "batch index starts at 1");
  std::vector<int> active;
  const auto early = static_cast<long long>(num_exits) - 1;
  if (schedule == DropoutSchedule::divisors) {
    for (long long i = 1; i <= early; ++i)
      if (batch_index % i == 0) active.push_back(static_cast<int>(i));
  } else {
    active.push_back(static_cast<int>((batch_index - 1) % early + 1));
  }
  active.push_back(static_cast<int>(num_exits));
  return active;
}

/// Exit-dropout loss of batch j. Per-exit cross-entropy is the pixel mean
/// over the whole batch.
inline LossReport pretrain_loss(std::span<const LossSample> batch, long long batch_index,
                                DropoutSchedule schedule = DropoutSchedule::divisors) {
  detail::check_batch(batch);
  LossReport report;
  report.active_exit_set = active_exits(batch.front().exits.size(), batch_index, schedule);
  for (int exit_id : report.active_exit_set) {
    detail::MeanAccumulator acc;
    for (const auto& s : batch) detail::accumulate_ce(acc, s.exits[exit_id - 1], s.gt, nullptr, nullptr);
    if (acc.count == 0) throw Error(ErrorCode::EmptySelection, "no labelled pixel in batch");
    report.per_exit_terms.push_back({exit_id, acc.mean(), 0.0});
  }
  report.total = detail::sum_terms(report.per_exit_terms);
  return report;
}

inline LossReport pretrain_loss(const std::vector<PredictionTensor>& preds, const LabelMap& gt,
                                long long batch_index, DropoutSchedule schedule = DropoutSchedule::divisors) {
  const LossSample sample{preds, gt};
  return pretrain_loss(std::span<const LossSample>(&sample, 1), batch_index, schedule);
}

struct PfdOptions {
  double alpha = kDefaultAlpha;
  bool include_final_exit = true;
  KlDirection kl_direction = KlDirection::teacher_student;
};

/// Positive-filtering distillation: alpha * CE restricted to pixels the
/// final exit gets right, plus (1 - alpha) * KL towards the final exit.
/// An empty correct-pixel set contributes a zero CE term.
inline LossReport pfd_loss(std::span<const LossSample> batch, const PfdOptions& options = {}) {
  detail::check_batch(batch);
  if (!(options.alpha >= 0.0 && options.alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0,1]");
  }
  const std::size_t n = batch.front().exits.size();
  std::vector<LabelMap> final_labels;
  final_labels.reserve(batch.size());
  for (const auto& s : batch) final_labels.push_back(argmax_labels(s.exits.back()));

  LossReport report;
  const std::size_t last = options.include_final_exit ? n : n - 1;
  for (std::size_t i = 0; i < last; ++i) {
    detail::MeanAccumulator ce, kl;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& s = batch[b];
      detail::accumulate_ce(ce, s.exits[i], s.gt, nullptr, &final_labels[b]);
      if (options.kl_direction == KlDirection::teacher_student) {
        detail::accumulate_kl(kl, s.exits[i], s.exits.back());
      } else {
        detail::accumulate_kl(kl, s.exits.back(), s.exits[i]);
      }
    }
    const int id = static_cast<int>(i + 1);
    report.active_exit_set.push_back(id);
    report.per_exit_terms.push_back({id, options.alpha * ce.mean(), (1.0 - options.alpha) * kl.mean()});
  }
  report.total = detail::sum_terms(report.per_exit_terms);
  return report;
}

inline LossReport pfd_loss(const std::vector<PredictionTensor>& preds, const LabelMap& gt,
                           const PfdOptions& options = {}) {
  const LossSample sample{preds, gt};
  return pfd_loss(std::span<const LossSample>(&sample, 1), options);
}

}  // namespace mess
