#include "fpref/federation/aggregator.hpp"

#include "fpref/core/error.hpp"

namespace fpref::fed {
namespace {

ParamVector unweighted_mean(std::span<const ClientUpdate> updates,
                            const ParamVector& (*pick)(const ClientUpdate&)) {
  const double w = 1.0 / static_cast<double>(updates.size());
  ParamVector acc = ParamVector::zeros(pick(updates[0]).layout_id(), pick(updates[0]).size());
  for (const auto& u : updates) acc = axpy(w, pick(u), acc);
  return acc;
}

const ParamVector& pick_delta(const ClientUpdate& u) { return u.delta; }

const ParamVector& pick_cv(const ClientUpdate& u) {
  if (!u.cv_delta) throw InvalidArgument("SCAFFOLD update is missing cv_delta");
  return *u.cv_delta;
}

}  // namespace

const ParamVector* ServerState::control_variate() const noexcept {
  if (auto* s = std::get_if<ScaffoldState>(&aggregator_state)) return &s->c;
  return nullptr;
}

ServerState init_server(ParamVector global, AggregatorKind algo) {
  ServerState s;
  const auto zero = ParamVector::zeros(global.layout_id(), global.size());
  switch (algo) {
    case AggregatorKind::kFedAvg:
    case AggregatorKind::kFedProx:
      s.aggregator_state = NoServerState{};
      break;
    case AggregatorKind::kFedAvgM:
      s.aggregator_state = MomentumState{zero};
      break;
    case AggregatorKind::kFedAdam:
    case AggregatorKind::kFedYogi:
      s.aggregator_state = AdaptiveMomentState{zero, zero};
      break;
    case AggregatorKind::kFedAdagrad:
      s.aggregator_state = AdagradState{zero};
      break;
    case AggregatorKind::kScaffold:
      s.aggregator_state = ScaffoldState{zero};
      break;
  }
  s.global_adapters = std::move(global);
  return s;
}

ParamVector weighted_pseudo_update(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw EmptyUpdateSet();
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.n_examples == 0) throw InvalidArgument("client update with zero examples");
    total += static_cast<double>(u.n_examples);
  }
  const auto& first = updates[0].delta;
  ParamVector acc = ParamVector::zeros(first.layout_id(), first.size());
  for (const auto& u : updates) {
    acc = axpy(static_cast<double>(u.n_examples) / total, u.delta, acc);
  }
  return acc;
}

ServerState aggregate(const ServerState& server, std::span<const ClientUpdate> updates,
                      AggregatorKind algo, const ServerConfig& cfg,
                      std::size_t total_clients) {
  if (updates.empty()) throw EmptyUpdateSet();
  for (const auto& u : updates) require_same_layout(server.global_adapters, u.delta);

  ServerState next = server;
  next.round = server.round + 1;
  const ParamVector& w = server.global_adapters;

  switch (algo) {
    case AggregatorKind::kFedAvg:
    case AggregatorKind::kFedProx: {
      next.global_adapters = add(w, weighted_pseudo_update(updates));
      break;
    }
    case AggregatorKind::kFedAvgM: {
      const auto d = weighted_pseudo_update(updates);
      const auto& st = std::get<MomentumState>(server.aggregator_state);
      auto m = axpy(cfg.momentum, st.m, d);
      next.global_adapters = axpy(cfg.avgm_lr, m, w);
      next.aggregator_state = MomentumState{std::move(m)};
      break;
    }
    case AggregatorKind::kScaffold: {
      const auto& st = std::get<ScaffoldState>(server.aggregator_state);
      next.global_adapters = axpy(cfg.scaffold_lr, unweighted_mean(updates, pick_delta), w);
      const double frac = static_cast<double>(updates.size()) /
                          static_cast<double>(std::max(total_clients, updates.size()));
      auto c = axpy(frac, unweighted_mean(updates, pick_cv), st.c);
      next.aggregator_state = ScaffoldState{std::move(c)};
      break;
    }
    case AggregatorKind::kFedAdagrad: {
      const auto d = weighted_pseudo_update(updates);
      const auto& st = std::get<AdagradState>(server.aggregator_state);
      auto v = add(st.v, square(d));
      next.global_adapters = axpy(cfg.adaptive_lr, adaptive_ratio(d, v, cfg.tau), w);
      next.aggregator_state = AdagradState{std::move(v)};
      break;
    }
    case AggregatorKind::kFedAdam:
    case AggregatorKind::kFedYogi: {
      const auto d = weighted_pseudo_update(updates);
      const auto& st = std::get<AdaptiveMomentState>(server.aggregator_state);
      auto m = axpy(cfg.beta1, st.m, scale(1.0 - cfg.beta1, d));
      const auto d2 = square(d);
      // Both variants add the same (1 - beta2) * d^2 term; Yogi flips its sign
      // by sign(v - d^2) instead of decaying v.
      const auto step = scale(1.0 - cfg.beta2, d2);
      ParamVector v;
      if (algo == AggregatorKind::kFedAdam) {
        v = add(scale(cfg.beta2, st.v), step);
      } else {
        std::vector<double> out(step.size());
        auto sv = st.v.values();
        auto s = step.values();
        auto dd = d2.values();
        for (std::size_t i = 0; i < out.size(); ++i) {
          const double diff = sv[i] - dd[i];
          const double sgn = static_cast<double>((diff > 0.0) - (diff < 0.0));
          out[i] = sv[i] - s[i] * sgn;
        }
        v = ParamVector(st.v.layout_id(), std::move(out));
        require_finite(v, "FedYogi second moment");
      }
      next.global_adapters = axpy(cfg.adaptive_lr, adaptive_ratio(m, v, cfg.tau), w);
      next.aggregator_state = AdaptiveMomentState{std::move(m), std::move(v)};
      break;
    }
  }
  return next;
}

}  // namespace fpref::fed
