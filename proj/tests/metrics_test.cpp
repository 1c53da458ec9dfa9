#include "mess/metrics.hpp"

#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace mess {
namespace {

using testing::make_labels;

TEST(Confusion, PerfectPredictionIsDiagonal) {
  std::mt19937_64 gen(2);
  const auto gt = testing::random_labels(gen, 5, 9, 7);
  const auto cm = confusion_matrix(gt, gt, 5);
  EXPECT_EQ(cm.trace(), gt.pixel_count());
  EXPECT_EQ(cm.total(), gt.pixel_count());
}

TEST(Confusion, RowsAreGroundTruth) {
  const auto cm = confusion_matrix(make_labels(2, 1, {0, 0}), make_labels(2, 1, {0, 1}), 2);
  EXPECT_EQ(cm(0, 0), 1u);
  EXPECT_EQ(cm(1, 0), 1u);
  EXPECT_EQ(cm(0, 1), 0u);
  EXPECT_EQ(cm(1, 1), 0u);
}

TEST(Confusion, IgnoreLabelSkipped) {
  const auto gt = LabelMap(3, 3, kIgnoreLabel);
  EXPECT_EQ(confusion_matrix(LabelMap(3, 3, 1), gt, 2).total(), 0u);
}

TEST(Confusion, DimensionAndRangeErrors) {
  EXPECT_THROW(confusion_matrix(LabelMap(2, 2), LabelMap(2, 3), 2), Error);
  try {
    confusion_matrix(LabelMap(1, 1, 4), LabelMap(1, 1, 0), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfRangeClass);
  }
}

TEST(Miou, Examples) {
  EXPECT_DOUBLE_EQ(miou(confusion_matrix(make_labels(1, 2, {0, 1}), make_labels(1, 2, {0, 1}), 2)), 1.0);
  EXPECT_DOUBLE_EQ(miou(confusion_matrix(make_labels(1, 2, {0, 0}), make_labels(1, 2, {0, 1}), 2)), 0.25);
  // Class 1 never appears in either map and drops out of the mean.
  EXPECT_DOUBLE_EQ(miou(confusion_matrix(make_labels(1, 3, {0, 0, 0}), make_labels(1, 3, {0, 0, 0}), 2)), 1.0);
}

TEST(Miou, ExcludedClassAndEmpty) {
  const auto cm = confusion_matrix(make_labels(1, 4, {0, 0, 1, 1}), make_labels(1, 4, {0, 1, 1, 1}), 2);
  // IoU0 = 1/2, IoU1 = 2/3
  EXPECT_DOUBLE_EQ(miou(cm), (0.5 + 2.0 / 3.0) / 2.0);
  EXPECT_DOUBLE_EQ(miou(cm, 0u), 2.0 / 3.0);
  try {
    miou(ConfusionMatrix(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMatrix);
  }
}

TEST(PixelAccuracy, Examples) {
  EXPECT_DOUBLE_EQ(pixel_accuracy(confusion_matrix(make_labels(1, 2, {1, 2}), make_labels(1, 2, {1, 2}), 3), 0), 1.0);
  // two background TPs, one foreground TP, one foreground error
  const auto cm = confusion_matrix(make_labels(1, 4, {0, 0, 1, 0}), make_labels(1, 4, {0, 0, 1, 2}), 3);
  EXPECT_DOUBLE_EQ(pixel_accuracy(cm, 0), 0.5);
  try {
    pixel_accuracy(confusion_matrix(LabelMap(2, 2, 0), LabelMap(2, 2, 0), 2), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMatrix);
  }
}

TEST(Miou, MergedMatricesEqualGlobalCounting) {
  std::mt19937_64 gen(9);
  const std::uint32_t m = 6;
  ConfusionMatrix merged(m);
  std::vector<std::uint64_t> inter(m, 0), uni_gt(m, 0), uni_pred(m, 0);
  for (int i = 0; i < 10; ++i) {
    auto gt = testing::random_labels(gen, m, 16, 16);
    const auto pred = testing::random_labels(gen, m, 16, 16);
    for (std::size_t p = 0; p < gt.data.size(); p += 7) gt.data[p] = kIgnoreLabel;
    merged += confusion_matrix(pred, gt, m);
    for (std::size_t p = 0; p < gt.data.size(); ++p) {
      if (gt.data[p] == kIgnoreLabel) continue;
      ++uni_gt[gt.data[p]];
      ++uni_pred[pred.data[p]];
      if (gt.data[p] == pred.data[p]) ++inter[gt.data[p]];
    }
  }
  double sum = 0.0;
  int n = 0;
  for (std::uint32_t k = 0; k < m; ++k) {
    const auto u = uni_gt[k] + uni_pred[k] - inter[k];
    if (u == 0) continue;
    sum += static_cast<double>(inter[k]) / static_cast<double>(u);
    ++n;
  }
  EXPECT_NEAR(miou(merged), sum / n, 1e-12);
}

}  // namespace
}  // namespace mess
