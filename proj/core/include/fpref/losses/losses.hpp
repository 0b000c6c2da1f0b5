#pragma once

#include <vector>

#include "fpref/core/param_vector.hpp"
#include "fpref/core/types.hpp"
#include "fpref/model/transformer.hpp"

namespace fpref::losses {

using model::TokenId;

struct TokenizedPair {
  std::vector<TokenId> prompt;
  std::vector<TokenId> chosen;
  std::vector<TokenId> rejected;
};

struct TokenizedFeedback {
  std::vector<TokenId> prompt;
  std::vector<TokenId> response;
  Label label = Label::kDesirable;
};

struct DpoBatch {
  std::vector<TokenizedPair> items;
  double beta = 0.1;
};

struct KtoBatch {
  std::vector<TokenizedFeedback> items;
  double beta = 0.1;
  double lambda_d = 1.0;
  double lambda_u = 1.0;
};

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;  // adapter layout; the reference never receives gradient
};

// softplus(x) = log(1 + e^x), stable for large |x|.
double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

// -log sigmoid(margin), with margin = beta * (chosen log-ratio - rejected
// log-ratio).
double dpo_item_loss(double margin) noexcept;

// lambda_y - v(r, z0), where v = lambda_d * sigmoid(r - z0) for desirable
// and lambda_u * sigmoid(z0 - r) for undesirable items.
double kto_item_loss(double reward, double z0, Label label, double lambda_d,
                     double lambda_u) noexcept;

// Mean over items of -log sigmoid(beta * [(log pi(c) - log ref(c)) -
// (log pi(r) - log ref(r))]). Items are summed left to right.
double dpo_loss(const model::BaseModel& model, const ParamVector& adapters,
                const ParamVector& reference, const DpoBatch& batch);
LossAndGrad dpo_loss_and_grad(const model::BaseModel& model,
                              const ParamVector& adapters,
                              const ParamVector& reference,
                              const DpoBatch& batch);

// max(0, mean_i beta * [log pi(y_{i+1 mod m} | x_i) - log ref(y_{i+1 mod m} | x_i)])
// over the mismatched (shift-by-one) pairing; 0 when m == 1. Treated as a
// constant by the KTO gradient.
double kto_reference_point(const model::BaseModel& model,
                           const ParamVector& adapters,
                           const ParamVector& reference, const KtoBatch& batch);

// Loss and gradient at a caller-supplied reference point z0.
double kto_loss_at(const model::BaseModel& model, const ParamVector& adapters,
                   const ParamVector& reference, const KtoBatch& batch, double z0);
LossAndGrad kto_loss_and_grad_at(const model::BaseModel& model,
                                 const ParamVector& adapters,
                                 const ParamVector& reference,
                                 const KtoBatch& batch, double z0);

// As above with z0 = kto_reference_point(...), detached.
LossAndGrad kto_loss_and_grad(const model::BaseModel& model,
                              const ParamVector& adapters,
                              const ParamVector& reference, const KtoBatch& batch);
double kto_loss(const model::BaseModel& model, const ParamVector& adapters,
                const ParamVector& reference, const KtoBatch& batch);

}  // namespace fpref::losses
