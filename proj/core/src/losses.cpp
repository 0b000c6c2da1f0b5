#include "fpref/losses/losses.hpp"

#include <algorithm>
#include <cmath>

#include "fpref/core/error.hpp"

namespace fpref::losses {
namespace {

void validate(const DpoBatch& b) {
  if (b.items.empty()) throw InvalidArgument("DPO batch is empty");
  if (!(b.beta > 0.0)) throw InvalidArgument("DPO beta must be positive");
}

void validate(const KtoBatch& b) {
  if (b.items.empty()) throw InvalidArgument("KTO batch is empty");
  if (!(b.beta > 0.0) || !(b.lambda_d > 0.0) || !(b.lambda_u > 0.0)) {
    throw InvalidArgument("KTO beta, lambda_d and lambda_u must be positive");
  }
}

void check_layouts(const model::BaseModel& m, const ParamVector& adapters,
                   const ParamVector& reference) {
  require_same_layout(adapters, reference);
  if (adapters.layout_id() != m.adapter_layout_id()) {
    throw LayoutMismatch(m.adapter_layout_id(), adapters.layout_id());
  }
}

// Runs fn, re-throwing ContextOverflow tagged with the batch item index.
template <typename Fn>
auto with_item(std::size_t i, Fn fn) {
  try {
    return fn();
  } catch (const ContextOverflow& e) {
    throw ContextOverflow(e.needed(), e.context_len(), i);
  }
}

// g += a * x, in place.
void accumulate(std::vector<double>& g, double a, const ParamVector& x) {
  auto xv = x.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += a * xv[i];
}

double kto_value_slope(double reward, double z0, Label label, double lambda_d,
                       double lambda_u) {
  // d(item loss)/d(reward)
  if (label == Label::kDesirable) {
    const double s = sigmoid(reward - z0);
    return -lambda_d * s * (1.0 - s);
  }
  const double s = sigmoid(z0 - reward);
  return lambda_u * s * (1.0 - s);
}

}  // namespace

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dpo_item_loss(double margin) noexcept { return softplus(-margin); }

double kto_item_loss(double reward, double z0, Label label, double lambda_d,
                     double lambda_u) noexcept {
  if (label == Label::kDesirable) return lambda_d - lambda_d * sigmoid(reward - z0);
  return lambda_u - lambda_u * sigmoid(z0 - reward);
}

double dpo_loss(const model::BaseModel& model, const ParamVector& adapters,
                const ParamVector& reference, const DpoBatch& batch) {
  validate(batch);
  check_layouts(model, adapters, reference);
  model::AdaptedModel policy(model, adapters);
  model::AdaptedModel ref(model, reference);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& it = batch.items[i];
    total += with_item(i, [&] {
      const double chosen = policy.response_logprob(it.prompt, it.chosen) -
                            ref.response_logprob(it.prompt, it.chosen);
      const double rejected = policy.response_logprob(it.prompt, it.rejected) -
                              ref.response_logprob(it.prompt, it.rejected);
      return dpo_item_loss(batch.beta * (chosen - rejected));
    });
  }
  return total / static_cast<double>(batch.items.size());
}

LossAndGrad dpo_loss_and_grad(const model::BaseModel& model,
                              const ParamVector& adapters,
                              const ParamVector& reference,
                              const DpoBatch& batch) {
  validate(batch);
  check_layouts(model, adapters, reference);
  model::AdaptedModel policy(model, adapters);
  model::AdaptedModel ref(model, reference);
  const double m = static_cast<double>(batch.items.size());
  std::vector<double> g(adapters.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& it = batch.items[i];
    with_item(i, [&] {
      auto c = policy.logprob_grad(it.prompt, it.chosen);
      auto r = policy.logprob_grad(it.prompt, it.rejected);
      const double margin =
          batch.beta * ((c.value - ref.response_logprob(it.prompt, it.chosen)) -
                        (r.value - ref.response_logprob(it.prompt, it.rejected)));
      total += dpo_item_loss(margin);
      // d/dmargin softplus(-margin) = -sigmoid(-margin)
      const double coef = -sigmoid(-margin) * batch.beta / m;
      accumulate(g, coef, subtract(c.grad, r.grad));
      return 0;
    });
  }
  ParamVector grad(adapters.layout_id(), std::move(g));
  require_finite(grad, "dpo_loss_and_grad");
  return {total / m, std::move(grad)};
}

double kto_reference_point(const model::BaseModel& model,
                           const ParamVector& adapters,
                           const ParamVector& reference, const KtoBatch& batch) {
  validate(batch);
  check_layouts(model, adapters, reference);
  const std::size_t m = batch.items.size();
  if (m < 2) return 0.0;
  model::AdaptedModel policy(model, adapters);
  model::AdaptedModel ref(model, reference);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& prompt = batch.items[i].prompt;
    const auto& response = batch.items[(i + 1) % m].response;
    total += with_item(i, [&] {
      return batch.beta * (policy.response_logprob(prompt, response) -
                           ref.response_logprob(prompt, response));
    });
  }
  return std::max(0.0, total / static_cast<double>(m));
}

double kto_loss_at(const model::BaseModel& model, const ParamVector& adapters,
                   const ParamVector& reference, const KtoBatch& batch, double z0) {
  validate(batch);
  check_layouts(model, adapters, reference);
  model::AdaptedModel policy(model, adapters);
  model::AdaptedModel ref(model, reference);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& it = batch.items[i];
    total += with_item(i, [&] {
      const double reward = batch.beta * (policy.response_logprob(it.prompt, it.response) -
                                          ref.response_logprob(it.prompt, it.response));
      return kto_item_loss(reward, z0, it.label, batch.lambda_d, batch.lambda_u);
    });
  }
  return total / static_cast<double>(batch.items.size());
}

LossAndGrad kto_loss_and_grad_at(const model::BaseModel& model,
                                 const ParamVector& adapters,
                                 const ParamVector& reference,
                                 const KtoBatch& batch, double z0) {
  validate(batch);
  check_layouts(model, adapters, reference);
  model::AdaptedModel policy(model, adapters);
  model::AdaptedModel ref(model, reference);
  const double m = static_cast<double>(batch.items.size());
  std::vector<double> g(adapters.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& it = batch.items[i];
    with_item(i, [&] {
      auto lp = policy.logprob_grad(it.prompt, it.response);
      const double reward =
          batch.beta * (lp.value - ref.response_logprob(it.prompt, it.response));
      total += kto_item_loss(reward, z0, it.label, batch.lambda_d, batch.lambda_u);
      const double coef =
          kto_value_slope(reward, z0, it.label, batch.lambda_d, batch.lambda_u) *
          batch.beta / m;
      accumulate(g, coef, lp.grad);
      return 0;
    });
  }
  ParamVector grad(adapters.layout_id(), std::move(g));
  require_finite(grad, "kto_loss_and_grad");
  return {total / m, std::move(grad)};
}

LossAndGrad kto_loss_and_grad(const model::BaseModel& model,
                              const ParamVector& adapters,
                              const ParamVector& reference, const KtoBatch& batch) {
  const double z0 = kto_reference_point(model, adapters, reference, batch);
  return kto_loss_and_grad_at(model, adapters, reference, batch, z0);
}

double kto_loss(const model::BaseModel& model, const ParamVector& adapters,
                const ParamVector& reference, const KtoBatch& batch) {
  const double z0 = kto_reference_point(model, adapters, reference, batch);
  return kto_loss_at(model, adapters, reference, batch, z0);
}

}  // namespace fpref::losses
