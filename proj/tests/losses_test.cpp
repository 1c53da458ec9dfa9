#include "mess/losses.hpp"

#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace mess {
namespace {

using testing::make_labels;
using testing::make_pred;

double d(float v) { return static_cast<double>(v); }

TEST(CrossEntropy, OneHotCorrectIsZero) {
  const auto p = make_pred(1, 3, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  EXPECT_NEAR(cross_entropy(p, make_labels(1, 3, {0, 1, 2})), 0.0, 1e-12);
}

TEST(CrossEntropy, HalfHalf) {
  EXPECT_NEAR(cross_entropy(make_pred(1, 1, {{0.5f, 0.5f}}), make_labels(1, 1, {0})), std::log(2.0), 1e-12);
}

TEST(CrossEntropy, MaskSelectsPixels) {
  const auto p = make_pred(1, 2, {{0.5f, 0.5f}, {0.25f, 0.75f}});
  EdgeMask mask(1, 2);
  mask.values = {1, 0};
  EXPECT_NEAR(cross_entropy(p, make_labels(1, 2, {0, 0}), &mask), std::log(2.0), 1e-12);
  EXPECT_NEAR(cross_entropy(p, make_labels(1, 2, {0, 0})), (std::log(2.0) + std::log(4.0)) / 2, 1e-12);
  mask.values = {0, 0};
  try {
    cross_entropy(p, make_labels(1, 2, {0, 0}), &mask);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySelection);
  }
}

TEST(CrossEntropy, FloorsZeroProbability) {
  EXPECT_NEAR(cross_entropy(make_pred(1, 1, {{0.0f, 1.0f}}), make_labels(1, 1, {0})), -std::log(1e-12), 1e-9);
}

TEST(Kl, Examples) {
  const auto half = make_pred(1, 1, {{0.5f, 0.5f}});
  EXPECT_EQ(kl_divergence(half, half), 0.0);
  EXPECT_NEAR(kl_divergence(half, make_pred(1, 1, {{1.0f, 0.0f}})), std::log(2.0), 1e-12);
  EXPECT_NEAR(kl_divergence(half, make_pred(1, 1, {{0.75f, 0.25f}})),
              0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-12);
  EXPECT_NEAR(kl_divergence(half, make_pred(1, 1, {{0.75f, 0.25f}})), 0.13081203594113697, 1e-12);
}

TEST(Kl, DirectionFlag) {
  const auto a = make_pred(1, 1, {{0.5f, 0.5f}});
  const auto b = make_pred(1, 1, {{0.75f, 0.25f}});
  EXPECT_DOUBLE_EQ(kl_divergence(a, b, KlDirection::student_teacher), kl_divergence(b, a));
}

TEST(Kl, NonNegativeAndZeroOnSelf) {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 300; ++i) {
    const auto a = testing::random_softmax(gen, 2 + gen() % 6, 3, 4, 0.5 + (i % 5));
    const auto b = testing::random_softmax(gen, a.classes, 3, 4, 0.5 + (i % 7));
    EXPECT_GE(kl_divergence(a, b), -1e-12);
    EXPECT_EQ(kl_divergence(a, a), 0.0);
  }
}

TEST(ActiveExits, DivisorSchedule) {
  EXPECT_EQ(active_exits(6, 1), (std::vector<int>{1, 6}));
  EXPECT_EQ(active_exits(6, 6), (std::vector<int>{1, 2, 3, 6}));
  EXPECT_EQ(active_exits(6, 7), (std::vector<int>{1, 6}));
  EXPECT_EQ(active_exits(6, 60), (std::vector<int>{1, 2, 3, 4, 5, 6}));
}

TEST(ActiveExits, RoundRobinSchedule) {
  for (long long j = 1; j <= 12; ++j) {
    const auto a = active_exits(6, j, DropoutSchedule::round_robin);
    EXPECT_EQ(a, (std::vector<int>{static_cast<int>((j - 1) % 5 + 1), 6}));
  }
  EXPECT_THROW(active_exits(6, 0), Error);
  EXPECT_THROW(active_exits(1, 1), Error);
}

TEST(PretrainLoss, SumsActiveCrossEntropies) {
  std::mt19937_64 gen(8);
  std::vector<PredictionTensor> preds;
  for (int n = 0; n < 6; ++n) preds.push_back(testing::random_softmax(gen, 3, 4, 4));
  const auto gt = testing::random_labels(gen, 3, 4, 4);
  const auto r = pretrain_loss(preds, gt, 6);
  EXPECT_EQ(r.active_exit_set, (std::vector<int>{1, 2, 3, 6}));
  double expected = 0.0;
  for (int i : {1, 2, 3, 6}) expected += cross_entropy(preds[i - 1], gt);
  EXPECT_NEAR(r.total, expected, 1e-12);
  ASSERT_EQ(r.per_exit_terms.size(), 4u);
  EXPECT_EQ(r.per_exit_terms[3].exit_id, 6);
}

TEST(PretrainLoss, BatchPoolsPixels) {
  const LabelMap gt = make_labels(1, 1, {0});
  LossSample a{{make_pred(1, 1, {{0.5f, 0.5f}}), make_pred(1, 1, {{1.0f, 0.0f}})}, gt};
  LossSample b{{make_pred(1, 1, {{0.25f, 0.75f}}), make_pred(1, 1, {{1.0f, 0.0f}})}, gt};
  const std::vector<LossSample> batch{a, b};
  const auto r = pretrain_loss(batch, 1);
  EXPECT_NEAR(r.per_exit_terms[0].ce_term, (std::log(2.0) + std::log(4.0)) / 2, 1e-12);
}

TEST(PfdLoss, ScalarExample) {
  const auto y1 = make_pred(1, 1, {{0.6f, 0.4f}});
  const auto yn = make_pred(1, 1, {{0.9f, 0.1f}});
  const auto gt = make_labels(1, 1, {0});
  // KL is taken between the renormalised f32 distributions.
  const double t0 = d(0.9f) / (d(0.9f) + d(0.1f)), t1 = d(0.1f) / (d(0.9f) + d(0.1f));
  const double s0 = d(0.6f) / (d(0.6f) + d(0.4f)), s1 = d(0.4f) / (d(0.6f) + d(0.4f));
  const double kl = t0 * std::log(t0 / s0) + t1 * std::log(t1 / s1);

  PfdOptions early_only;
  early_only.include_final_exit = false;
  const auto r = pfd_loss({y1, yn}, gt, early_only);
  EXPECT_NEAR(r.total, 0.5 * -std::log(d(0.6f)) + 0.5 * kl, 1e-12);
  EXPECT_NEAR(r.total, 0.3685573924756748, 1e-7);
  EXPECT_EQ(r.active_exit_set, std::vector<int>{1});

  const auto full = pfd_loss({y1, yn}, gt);
  EXPECT_NEAR(full.total, r.total + 0.5 * -std::log(d(0.9f)), 1e-12);
  ASSERT_EQ(full.per_exit_terms.size(), 2u);
  EXPECT_EQ(full.per_exit_terms[1].kl_term, 0.0);
}

TEST(PfdLoss, AllWrongFinalWithAlphaOneIsZero) {
  const auto y1 = make_pred(1, 2, {{0.6f, 0.4f}, {0.3f, 0.7f}});
  const auto yn = make_pred(1, 2, {{0.2f, 0.8f}, {0.9f, 0.1f}});
  PfdOptions o;
  o.alpha = 1.0;
  EXPECT_NEAR(pfd_loss({y1, yn}, make_labels(1, 2, {0, 1}), o).total, 0.0, 1e-12);
}

TEST(PfdLoss, AlphaZeroIsPureDistillation) {
  std::mt19937_64 gen(12);
  std::vector<PredictionTensor> preds;
  for (int n = 0; n < 4; ++n) preds.push_back(testing::random_softmax(gen, 3, 5, 5));
  const auto gt = testing::random_labels(gen, 3, 5, 5);
  PfdOptions o;
  o.alpha = 0.0;
  double expected = 0.0;
  for (int i = 0; i < 4; ++i) expected += kl_divergence(preds[i], preds[3]);
  EXPECT_NEAR(pfd_loss(preds, gt, o).total, expected, 1e-12);
}

TEST(PfdLoss, TotalIsSumOfTerms) {
  std::mt19937_64 gen(13);
  std::vector<PredictionTensor> preds;
  for (int n = 0; n < 3; ++n) preds.push_back(testing::random_softmax(gen, 4, 6, 6, 1.0 + n));
  const auto gt = testing::random_labels(gen, 4, 6, 6);
  PfdOptions o;
  o.alpha = 0.3;
  o.kl_direction = KlDirection::student_teacher;
  const auto r = pfd_loss(preds, gt, o);
  double s = 0.0;
  for (const auto& t : r.per_exit_terms) {
    EXPECT_GE(t.ce_term, 0.0);
    EXPECT_GE(t.kl_term, -1e-12);
    s += t.ce_term + t.kl_term;
  }
  EXPECT_DOUBLE_EQ(r.total, s);
  o.alpha = 1.5;
  EXPECT_THROW(pfd_loss(preds, gt, o), Error);
}

}  // namespace
}  // namespace mess
