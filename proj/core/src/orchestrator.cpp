#include "fpref/federation/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "fpref/core/error.hpp"

namespace fpref::fed {
namespace {

struct Probe {
  std::optional<losses::DpoBatch> dpo;
  std::optional<losses::KtoBatch> kto;
};

template <typename Record>
std::vector<Record> sample_records(const std::map<std::string, std::vector<Record>>& clients,
                                   std::size_t k, RngStream rng) {
  std::vector<const Record*> flat;
  for (const auto& [id, recs] : clients) {
    for (const auto& r : recs) flat.push_back(&r);
  }
  std::vector<std::size_t> idx(flat.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  k = std::min(k, idx.size());
  // Partial Fisher-Yates from the front.
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<Record> out;
  for (auto i : idx) out.push_back(*flat[i]);
  return out;
}

Probe build_probe(const RunConfig& cfg, const FederatedData& source,
                  const model::Vocab& vocab, const TokenLimits& limits, bool sample,
                  RngStream rng) {
  Probe probe;
  const std::size_t k = sample ? static_cast<std::size_t>(cfg.probe_size)
                               : std::numeric_limits<std::size_t>::max();
  if (k == 0) return probe;
  if (const auto* pairs = std::get_if<data::FederatedPairDataset>(&source)) {
    auto recs = sample_records(pairs->clients, k, rng);
    if (cfg.method == Method::kDpo) {
      losses::DpoBatch b{{}, cfg.loss.beta};
      for (const auto& p : recs) b.items.push_back(tokenize(vocab, p, limits));
      if (!b.items.empty()) probe.dpo = std::move(b);
      return probe;
    }
    // KTO on a pair-format probe file: score both halves.
    data::FederatedPairDataset sub;
    for (auto& p : recs) sub.clients[p.client_id].push_back(p);
    auto split = data::split_pairs(sub);
    losses::KtoBatch b{{}, cfg.loss.beta, cfg.loss.lambda_d, cfg.loss.lambda_u};
    for (const auto& [id, exs] : split.clients) {
      for (const auto& e : exs) b.items.push_back(tokenize(vocab, e, limits));
    }
    if (!b.items.empty()) probe.kto = std::move(b);
    return probe;
  }
  const auto& fb = std::get<data::FederatedFeedbackDataset>(source);
  if (cfg.method == Method::kDpo) {
    throw DpoRequiresPairs("probe set holds single-label feedback");
  }
  auto recs = sample_records(fb.clients, k, rng);
  losses::KtoBatch b{{}, cfg.loss.beta, cfg.loss.lambda_d, cfg.loss.lambda_u};
  for (const auto& e : recs) b.items.push_back(tokenize(vocab, e, limits));
  if (!b.items.empty()) probe.kto = std::move(b);
  return probe;
}

double probe_loss(const Probe& probe, const model::BaseModel& model,
                  const ParamVector& adapters, const ParamVector& reference) {
  if (probe.dpo) return losses::dpo_loss(model, adapters, reference, *probe.dpo);
  if (probe.kto) return losses::kto_loss(model, adapters, reference, *probe.kto);
  return 0.0;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first failure by
// index is rethrown after all tasks finish.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

nlohmann::json RoundMetrics::to_json() const {
  return nlohmann::json::parse(to_json_line());
}

std::string RoundMetrics::to_json_line() const {
  nlohmann::ordered_json j;
  j["round"] = round;
  j["algo"] = algo;
  j["method"] = method;
  j["mean_client_loss"] = mean_client_loss;
  j["update_norm"] = update_norm;
  j["probe_loss"] = probe_loss;
  return j.dump();
}

FederatedData prepare_training_data(const RunConfig& cfg,
                                    const data::FederatedPairDataset& pairs) {
  if (cfg.method == Method::kDpo) {
    if (cfg.data_mode == DataMode::kRedistributed) {
      throw DpoRequiresPairs("data_mode=redistributed scatters each pair across clients");
    }
    return pairs;
  }
  auto split = data::split_pairs(pairs);
  if (cfg.data_mode == DataMode::kRedistributed) {
    return data::redistribute(split, cfg.redistribute_seed);
  }
  return split;
}

void check_applicability(const RunConfig& cfg, const FederatedData& data) {
  const bool pairs = std::holds_alternative<data::FederatedPairDataset>(data);
  if (cfg.method == Method::kDpo) {
    if (cfg.data_mode == DataMode::kRedistributed) {
      throw DpoRequiresPairs("data_mode=redistributed scatters each pair across clients");
    }
    if (!pairs) throw DpoRequiresPairs("dataset holds single-label feedback examples");
  } else if (pairs) {
    throw InvalidConfig("KTO needs feedback examples; split the pairs first");
  }
}

RunArtifacts run_rounds(const RunConfig& cfg, const FederatedData& data,
                        const model::BaseModel& model, const RoundObserver& observer,
                        const FederatedData* probe_data) {
  validate(cfg);
  check_applicability(cfg, data);

  const TokenLimits limits{static_cast<std::size_t>(cfg.model.max_prompt_tokens),
                           static_cast<std::size_t>(cfg.model.max_response_tokens)};
  std::vector<ClientState> clients = std::visit(
      [&](const auto& d) { return make_clients(model.vocab(), d, limits); }, data);
  if (clients.empty()) throw EmptyDataset("training data has no clients");
  const std::size_t N = clients.size();
  const bool scaffold = cfg.aggregator == AggregatorKind::kScaffold;
  if (scaffold) {
    for (auto& c : clients) {
      c.control_variate = ParamVector::zeros(model.adapter_layout_id(), model.adapter_size());
    }
  }

  const RngStream root(cfg.root_seed);
  auto adapter_rng = root.derive("adapters", 0);
  RunArtifacts out;
  out.reference = model.init_adapters(adapter_rng);
  ParamVector reference = out.reference;

  const Probe probe = probe_data
                          ? build_probe(cfg, *probe_data, model.vocab(), limits, false,
                                        root.derive("probe", 0))
                          : build_probe(cfg, data, model.vocab(), limits, true,
                                        root.derive("probe", 0));

  ServerState server = init_server(out.reference, cfg.aggregator);
  LocalTrainOptions opts{cfg.method, cfg.aggregator, cfg.local, cfg.loss};
  const std::size_t k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(cfg.clients_fraction * static_cast<double>(N))), 1,
      N);
  const std::string method_name(to_string(cfg.method));
  const std::string algo_name(to_string(cfg.aggregator));

  for (int r = 1; r <= cfg.rounds; ++r) {
    try {
      const auto round_rng = root.derive("round", r);
      std::vector<std::size_t> order(N);
      for (std::size_t i = 0; i < N; ++i) order[i] = i;
      auto sample_rng = round_rng.derive("sample", 0);
      for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(sample_rng.next_below(N - i));
        std::swap(order[i], order[j]);
      }
      std::vector<std::size_t> sampled(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(sampled.begin(), sampled.end());

      if (cfg.refresh_reference) reference = server.global_adapters;

      std::vector<ClientUpdate> updates(k);
      parallel_for(k, cfg.workers, [&](std::size_t s) {
        const std::size_t ci = sampled[s];
        auto stream = round_rng.derive(
            "client", cfg.shared_client_streams ? 0 : static_cast<std::int64_t>(ci));
        updates[s] = local_train(model, clients[ci], server.global_adapters, reference,
                                 server.control_variate(), stream, opts);
      });

      RoundMetrics metrics;
      metrics.round = static_cast<std::uint64_t>(r);
      metrics.algo = algo_name;
      metrics.method = method_name;
      double loss_sum = 0.0;
      for (const auto& u : updates) loss_sum += u.mean_loss;
      metrics.mean_client_loss = loss_sum / static_cast<double>(updates.size());
      metrics.update_norm = l2_norm(weighted_pseudo_update(updates));

      server = aggregate(server, updates, cfg.aggregator, cfg.server, N);
      require_finite(server.global_adapters, "aggregate");
      if (scaffold) {
        for (std::size_t s = 0; s < k; ++s) {
          auto& c = clients[sampled[s]];
          c.control_variate = add(*c.control_variate, *updates[s].cv_delta);
        }
      }
      metrics.probe_loss = probe_loss(probe, model, server.global_adapters, reference);
      if (!std::isfinite(metrics.mean_client_loss) || !std::isfinite(metrics.probe_loss)) {
        throw NonFiniteResult("loss evaluation");
      }
      out.metrics.push_back(metrics);
      if (observer) observer(RoundView{server, clients, sampled, out.metrics.back()});
    } catch (const NonFiniteResult& e) {
      throw NumericalError(static_cast<std::uint64_t>(r), e.what());
    }
  }

  out.final_adapters = server.global_adapters;
  out.final_state = std::move(server);
  return out;
}

}  // namespace fpref::fed
