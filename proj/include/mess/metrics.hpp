#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mess/error.hpp"
#include "mess/tensorio.hpp"

namespace mess {

/// M x M pixel counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::uint32_t classes) : classes_(classes), counts_(std::size_t{classes} * classes, 0) {}

  std::uint32_t classes() const { return classes_; }

  std::uint64_t operator()(std::uint32_t gt, std::uint32_t pred) const {
    return counts_[std::size_t{gt} * classes_ + pred];
  }
  void add(std::uint32_t gt, std::uint32_t pred, std::uint64_t n = 1) {
    counts_[std::size_t{gt} * classes_ + pred] += n;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw Error(ErrorCode::DimMismatch, "merging matrices of different class count");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) { return a += b; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::uint32_t k = 0; k < classes_; ++k) t += (*this)(k, k);
    return t;
  }

  const std::vector<std::uint64_t>& raw() const { return counts_; }
  std::vector<std::uint64_t>& raw() { return counts_; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::uint32_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& gt, std::uint32_t classes) {
  if (pred.rows != gt.rows || pred.cols != gt.cols) {
    throw Error(ErrorCode::DimMismatch, "prediction " + std::to_string(pred.rows) + "x" + std::to_string(pred.cols) +
                                            " vs ground truth " + std::to_string(gt.rows) + "x" +
                                            std::to_string(gt.cols));
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const auto g = gt.data[i];
    if (g == gt.ignore_value) continue;
    const auto p = pred.data[i];
    if (g >= classes || p >= classes) {
      throw Error(ErrorCode::OutOfRangeClass, "class id " + std::to_string(g >= classes ? g : p) + " >= " +
                                                  std::to_string(classes));
    }
    cm.add(g, p);
  }
  return cm;
}

/// IoU per class; nullopt where the class is neither present nor predicted.
inline std::vector<std::optional<double>> per_class_iou(const ConfusionMatrix& cm) {
  const auto m = cm.classes();
  std::vector<std::uint64_t> row(m, 0), col(m, 0);
  for (std::uint32_t g = 0; g < m; ++g) {
    for (std::uint32_t p = 0; p < m; ++p) {
      row[g] += cm(g, p);
      col[p] += cm(g, p);
    }
  }
  std::vector<std::optional<double>> iou(m);
  for (std::uint32_t k = 0; k < m; ++k) {
    const std::uint64_t tp = cm(k, k);
    const std::uint64_t denom = row[k] + col[k] - tp;
    if (denom > 0) iou[k] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return iou;
}

/// Mean IoU over classes with a non-empty union. `exclude_class` drops one
/// class (typically background) from the mean.
inline double miou(const ConfusionMatrix& cm, std::optional<std::uint32_t> exclude_class = std::nullopt) {
  const auto iou = per_class_iou(cm);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint32_t k = 0; k < iou.size(); ++k) {
    if (!iou[k] || (exclude_class && *exclude_class == k)) continue;
    sum += *iou[k];
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyMatrix, "no class has any pixel");
  return sum / static_cast<double>(n);
}

/// Pixel accuracy with true positives on the background class removed from
/// both numerator and denominator.
inline double pixel_accuracy(const ConfusionMatrix& cm, std::uint32_t background_class) {
  const std::uint64_t bg_tp = background_class < cm.classes() ? cm(background_class, background_class) : 0;
  const std::uint64_t denom = cm.total() - bg_tp;
  if (denom == 0) throw Error(ErrorCode::EmptyMatrix, "no pixels left after removing background true positives");
  return static_cast<double>(cm.trace() - bg_tp) / static_cast<double>(denom);
}

}  // namespace mess
