#include "fpref/federation/client.hpp"

#include <cmath>

#include "fpref/core/error.hpp"

namespace fpref::fed {
namespace {

using model::TokenId;

std::vector<TokenId> clip_prompt(std::vector<TokenId> ids, std::size_t max) {
  if (ids.size() > max) ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(max));
  return ids;
}

std::vector<TokenId> clip_response(std::vector<TokenId> ids, std::size_t max) {
  if (ids.size() > max) ids.resize(max);
  if (ids.empty()) ids.push_back(model::Vocab::kEos);
  return ids;
}

// Epoch-wise shuffled minibatch cursor.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, RngStream& rng)
      : n_(n), batch_(std::min(batch, n)), rng_(rng) {
    reshuffle();
  }

  std::vector<std::size_t> next() {
    if (cursor_ + batch_ > n_) reshuffle();
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
    cursor_ += batch_;
    return out;
  }

 private:
  void reshuffle() {
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    rng_.shuffle(order_);
    cursor_ = 0;
  }

  std::size_t n_;
  std::size_t batch_;
  RngStream& rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace

std::size_t ClientState::size() const noexcept {
  return std::visit([](const auto& r) { return r.size(); }, records);
}

losses::TokenizedPair tokenize(const model::Vocab& vocab, const PreferencePair& p,
                               const TokenLimits& limits) {
  return {clip_prompt(vocab.encode_lossy(p.prompt), limits.max_prompt),
          clip_response(vocab.encode_lossy(p.chosen), limits.max_response),
          clip_response(vocab.encode_lossy(p.rejected), limits.max_response)};
}

losses::TokenizedFeedback tokenize(const model::Vocab& vocab, const FeedbackExample& e,
                                   const TokenLimits& limits) {
  return {clip_prompt(vocab.encode_lossy(e.prompt), limits.max_prompt),
          clip_response(vocab.encode_lossy(e.response), limits.max_response), e.label};
}

std::vector<ClientState> make_clients(const model::Vocab& vocab,
                                      const data::FederatedPairDataset& data,
                                      const TokenLimits& limits) {
  std::vector<ClientState> out;
  for (const auto& [id, pairs] : data.clients) {
    std::vector<losses::TokenizedPair> recs;
    for (const auto& p : pairs) recs.push_back(tokenize(vocab, p, limits));
    out.push_back({id, std::move(recs), std::nullopt});
  }
  return out;
}

std::vector<ClientState> make_clients(const model::Vocab& vocab,
                                      const data::FederatedFeedbackDataset& data,
                                      const TokenLimits& limits) {
  std::vector<ClientState> out;
  for (const auto& [id, examples] : data.clients) {
    std::vector<losses::TokenizedFeedback> recs;
    for (const auto& e : examples) recs.push_back(tokenize(vocab, e, limits));
    out.push_back({id, std::move(recs), std::nullopt});
  }
  return out;
}

ClientUpdate local_train(const model::BaseModel& model, const ClientState& client,
                         const ParamVector& global, const ParamVector& reference,
                         const ParamVector* server_cv, RngStream stream,
                         const LocalTrainOptions& opts) {
  const bool is_pairs =
      std::holds_alternative<std::vector<losses::TokenizedPair>>(client.records);
  if (opts.method == Method::kDpo && !is_pairs) {
    throw DpoRequiresPairs("client '" + client.client_id + "' holds single-label feedback");
  }
  if (opts.method == Method::kKto && is_pairs) {
    throw InvalidConfig("KTO expects split feedback examples on client '" +
                        client.client_id + "'");
  }
  const std::size_t n = client.size();
  if (n == 0) throw EmptyClient(client.client_id);
  require_same_layout(global, reference);

  const bool scaffold = opts.aggregator == AggregatorKind::kScaffold;
  const bool prox = opts.aggregator == AggregatorKind::kFedProx && opts.local.prox_mu != 0.0;
  std::optional<ParamVector> correction;  // c - c_i
  if (scaffold) {
    ParamVector zero = ParamVector::zeros(global.layout_id(), global.size());
    const ParamVector& c = server_cv ? *server_cv : zero;
    const ParamVector& ci = client.control_variate ? *client.control_variate : zero;
    correction = subtract(c, ci);
  }

  const auto& L = opts.local;
  std::vector<double> w(global.values().begin(), global.values().end());
  std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0);
  BatchSampler sampler(n, static_cast<std::size_t>(L.batch_size), stream);
  double loss_sum = 0.0;

  for (int step = 1; step <= L.steps; ++step) {
    const ParamVector current(global.layout_id(), w);
    const auto idx = sampler.next();
    losses::LossAndGrad lg;
    if (opts.method == Method::kDpo) {
      const auto& recs = std::get<std::vector<losses::TokenizedPair>>(client.records);
      losses::DpoBatch batch{{}, opts.loss.beta};
      for (auto i : idx) batch.items.push_back(recs[i]);
      lg = losses::dpo_loss_and_grad(model, current, reference, batch);
    } else {
      const auto& recs = std::get<std::vector<losses::TokenizedFeedback>>(client.records);
      losses::KtoBatch batch{{}, opts.loss.beta, opts.loss.lambda_d, opts.loss.lambda_u};
      for (auto i : idx) batch.items.push_back(recs[i]);
      lg = losses::kto_loss_and_grad(model, current, reference, batch);
    }
    loss_sum += lg.loss;

    auto g = lg.grad.mutable_values();
    if (prox) {
      auto gv = global.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += L.prox_mu * (w[i] - gv[i]);
    }
    if (correction) {
      auto cv = correction->values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += cv[i];
    }

    if (L.optimizer == LocalOptimizer::kSgd) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= L.lr * g[i];
    } else {
      const double c1 = 1.0 - std::pow(L.adam_beta1, step);
      const double c2 = 1.0 - std::pow(L.adam_beta2, step);
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = L.adam_beta1 * m[i] + (1.0 - L.adam_beta1) * g[i];
        v[i] = L.adam_beta2 * v[i] + (1.0 - L.adam_beta2) * g[i] * g[i];
        w[i] -= L.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + L.adam_eps);
      }
    }
  }

  ClientUpdate u;
  u.delta = subtract(ParamVector(global.layout_id(), std::move(w)), global);
  u.n_examples = n;
  u.mean_loss = L.steps > 0 ? loss_sum / L.steps : 0.0;
  if (scaffold) {
    if (L.steps > 0) {
      // c_i+ - c_i = -c + (global - w_final) / (K * lr) = -c - delta / (K * lr)
      ParamVector zero = ParamVector::zeros(global.layout_id(), global.size());
      const ParamVector& c = server_cv ? *server_cv : zero;
      u.cv_delta = axpy(-1.0 / (static_cast<double>(L.steps) * L.lr), u.delta, scale(-1.0, c));
    } else {
      u.cv_delta = ParamVector::zeros(global.layout_id(), global.size());
    }
  }
  return u;
}

}  // namespace fpref::fed
