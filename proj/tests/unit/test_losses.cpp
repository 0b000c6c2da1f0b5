#include <gtest/gtest.h>

#include <cmath>

#include "fpref/core/error.hpp"
#include "fpref/losses/losses.hpp"
#include "../support/test_support.hpp"

using namespace fpref;
using namespace fpref::losses;
using fpref::testing::finite_difference;
using fpref::testing::relative_error;

namespace {

struct Fixture {
  model::BaseModel m = fpref::testing::tiny_model(50);
  ParamVector reference = fpref::testing::random_adapters(m, 51, 0.2);
  ParamVector policy = fpref::testing::random_adapters(m, 52, 0.3);
};

DpoBatch dpo_batch(double beta = 0.1) {
  DpoBatch b;
  b.beta = beta;
  b.items.push_back({{3, 4}, {5, 6, 1}, {7, 1}});
  b.items.push_back({{5}, {3, 3}, {4, 7, 6}});
  b.items.push_back({{6, 7, 3}, {4}, {5}});
  return b;
}

KtoBatch kto_batch(double beta = 0.1) {
  KtoBatch b;
  b.beta = beta;
  b.items.push_back({{3, 4}, {5, 6, 1}, Label::kDesirable});
  b.items.push_back({{5}, {4, 7, 6}, Label::kUndesirable});
  b.items.push_back({{6, 7, 3}, {4}, Label::kDesirable});
  b.items.push_back({{7}, {3, 5}, Label::kUndesirable});
  return b;
}

}  // namespace

TEST(Scalars, SoftplusAndSigmoid) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(-1.0), 0.313262, 1e-6);
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
  EXPECT_NEAR(softplus(-800.0), 0.0, 1e-300);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
  EXPECT_NEAR(1.0 - sigmoid(1.0), 0.268941, 1e-6);
  EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
}

TEST(Scalars, ItemLosses) {
  EXPECT_NEAR(dpo_item_loss(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(dpo_item_loss(1.0), 0.313262, 1e-6);
  EXPECT_NEAR(kto_item_loss(0.0, 0.0, Label::kDesirable, 1.0, 1.0), 0.5, 1e-15);
  EXPECT_NEAR(kto_item_loss(0.0, 0.0, Label::kUndesirable, 1.0, 1.0), 0.5, 1e-15);
  EXPECT_NEAR(kto_item_loss(1.0, 0.0, Label::kDesirable, 1.0, 1.0), 0.268941, 1e-6);
  EXPECT_NEAR(kto_item_loss(-1.0, 0.0, Label::kUndesirable, 1.0, 1.0), 0.268941, 1e-6);
  const double tail = 1.0 / (1.0 + std::exp(1.0));
  EXPECT_NEAR(kto_item_loss(1.0, 0.0, Label::kDesirable, 2.0, 1.0), 2.0 * tail, 1e-15);
  EXPECT_NEAR(kto_item_loss(-1.0, 0.0, Label::kUndesirable, 1.0, 3.0), 3.0 * tail, 1e-15);
}

TEST(Scalars, KtoLabelsMirror) {
  for (double r : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    EXPECT_NEAR(kto_item_loss(r, 0.4, Label::kDesirable, 1.0, 1.0),
                kto_item_loss(0.8 - r, 0.4, Label::kUndesirable, 1.0, 1.0), 1e-14);
  }
}

TEST(Dpo, PolicyEqualsReferenceGivesLn2) {
  Fixture f;
  EXPECT_NEAR(dpo_loss(f.m, f.reference, f.reference, dpo_batch()), std::log(2.0), 1e-14);
}

TEST(Dpo, DegeneratePairHasZeroGradient) {
  Fixture f;
  DpoBatch b;
  b.items.push_back({{3}, {4, 5}, {4, 5}});
  const auto lg = dpo_loss_and_grad(f.m, f.policy, f.reference, b);
  EXPECT_NEAR(lg.loss, std::log(2.0), 1e-14);
  for (double g : lg.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(Dpo, GradientMatchesFiniteDifferences) {
  Fixture f;
  for (double beta : {0.1, 1.0}) {
    const auto b = dpo_batch(beta);
    const auto lg = dpo_loss_and_grad(f.m, f.policy, f.reference, b);
    EXPECT_NEAR(lg.loss, dpo_loss(f.m, f.policy, f.reference, b), 1e-14);
    const auto fd = finite_difference(
        [&](const ParamVector& x) { return dpo_loss(f.m, x, f.reference, b); }, f.policy);
    EXPECT_LT(relative_error(lg.grad.values(), fd), 1e-4);
  }
}

TEST(Dpo, GradientStepRaisesMargin) {
  Fixture f;
  DpoBatch b;
  b.beta = 1.0;
  b.items.push_back({{3, 4}, {5, 6}, {7, 3}});
  const auto lg = dpo_loss_and_grad(f.m, f.policy, f.reference, b);
  const ParamVector step = axpy(-0.01, lg.grad, f.policy);
  EXPECT_LT(dpo_loss(f.m, step, f.reference, b), lg.loss);
  // Descent direction agrees with the chosen response's logprob gradient.
  const auto gc = model::logprob_grad(f.m, f.policy, b.items[0].prompt, b.items[0].chosen);
  const auto gr = model::logprob_grad(f.m, f.policy, b.items[0].prompt, b.items[0].rejected);
  EXPECT_GT(-dot(lg.grad, gc.grad), -dot(lg.grad, gr.grad));
}

TEST(Dpo, ReferenceGetsNoGradient) {
  Fixture f;
  const auto b = dpo_batch();
  const auto before = f.reference;
  const auto lg = dpo_loss_and_grad(f.m, f.policy, f.reference, b);
  EXPECT_EQ(f.reference, before);
  EXPECT_EQ(lg.grad.layout_id(), f.m.adapter_layout_id());
}

TEST(Dpo, RejectsBadInput) {
  Fixture f;
  DpoBatch empty;
  EXPECT_THROW(dpo_loss(f.m, f.policy, f.reference, empty), InvalidArgument);
  auto b = dpo_batch(0.0);
  EXPECT_THROW(dpo_loss(f.m, f.policy, f.reference, b), InvalidArgument);
  EXPECT_THROW(dpo_loss(f.m, ParamVector("x", {1.0}), f.reference, dpo_batch()), LayoutMismatch);
}

TEST(Kto, PolicyEqualsReferenceGivesHalf) {
  Fixture f;
  EXPECT_NEAR(kto_loss(f.m, f.reference, f.reference, kto_batch()), 0.5, 1e-14);
}

TEST(Kto, ReferencePointSingleItemIsZero) {
  Fixture f;
  KtoBatch b;
  b.items.push_back({{3}, {4}, Label::kDesirable});
  EXPECT_EQ(kto_reference_point(f.m, f.policy, f.reference, b), 0.0);
}

TEST(Kto, ReferencePointMatchesMismatchedPairs) {
  Fixture f;
  const auto b = kto_batch(0.5);
  const std::size_t m = b.items.size();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& p = b.items[i].prompt;
    const auto& r = b.items[(i + 1) % m].response;
    total += 0.5 * (model::response_logprob(f.m, f.policy, p, r) -
                    model::response_logprob(f.m, f.reference, p, r));
  }
  EXPECT_NEAR(kto_reference_point(f.m, f.policy, f.reference, b), std::max(0.0, total / m), 1e-14);
}

TEST(Kto, ReferencePointClampsAtZero) {
  Fixture f;
  const auto b = kto_batch(1.0);
  // Swapping policy and reference flips the sign of the raw estimate, so one
  // of the two orders must clamp.
  const double z1 = kto_reference_point(f.m, f.policy, f.reference, b);
  const double z2 = kto_reference_point(f.m, f.reference, f.policy, b);
  EXPECT_GE(z1, 0.0);
  EXPECT_GE(z2, 0.0);
  EXPECT_TRUE(z1 == 0.0 || z2 == 0.0);
}

TEST(Kto, GradientMatchesFiniteDifferencesAtFixedZ0) {
  Fixture f;
  for (double beta : {0.1, 1.0}) {
    const auto b = kto_batch(beta);
    const double z0 = kto_reference_point(f.m, f.policy, f.reference, b);
    const auto lg = kto_loss_and_grad(f.m, f.policy, f.reference, b);
    EXPECT_NEAR(lg.loss, kto_loss_at(f.m, f.policy, f.reference, b, z0), 1e-14);
    const auto fd = finite_difference(
        [&](const ParamVector& x) { return kto_loss_at(f.m, x, f.reference, b, z0); }, f.policy);
    EXPECT_LT(relative_error(lg.grad.values(), fd), 1e-4);
  }
}

TEST(Kto, WeightsScaleTheirLabels) {
  Fixture f;
  auto b = kto_batch();
  const double z0 = 0.05;
  const auto base = kto_loss_and_grad_at(f.m, f.policy, f.reference, b, z0);
  b.lambda_d = 2.0;
  b.lambda_u = 2.0;
  const auto doubled = kto_loss_and_grad_at(f.m, f.policy, f.reference, b, z0);
  EXPECT_NEAR(doubled.loss, 2.0 * base.loss, 1e-13);
  EXPECT_LT(relative_error(doubled.grad.values(), scale(2.0, base.grad).values()), 1e-12);
}

TEST(Kto, DesirableStepRaisesLogprob) {
  Fixture f;
  KtoBatch b;
  b.beta = 1.0;
  b.items.push_back({{3, 4}, {5, 6}, Label::kDesirable});
  const auto lg = kto_loss_and_grad_at(f.m, f.policy, f.reference, b, 0.0);
  const ParamVector step = axpy(-0.05, lg.grad, f.policy);
  const auto& it = b.items[0];
  EXPECT_GT(model::response_logprob(f.m, step, it.prompt, it.response),
            model::response_logprob(f.m, f.policy, it.prompt, it.response));
  b.items[0].label = Label::kUndesirable;
  const auto lu = kto_loss_and_grad_at(f.m, f.policy, f.reference, b, 0.0);
  const ParamVector down = axpy(-0.05, lu.grad, f.policy);
  EXPECT_LT(model::response_logprob(f.m, down, it.prompt, it.response),
            model::response_logprob(f.m, f.policy, it.prompt, it.response));
}
