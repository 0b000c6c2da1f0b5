#pragma once

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpref/data/dataset.hpp"
#include "fpref/federation/aggregator.hpp"
#include "fpref/federation/client.hpp"
#include "fpref/federation/run_config.hpp"
#include "fpref/model/transformer.hpp"

namespace fpref::fed {

using FederatedData =
    std::variant<data::FederatedPairDataset, data::FederatedFeedbackDataset>;

struct RoundMetrics {
  std::uint64_t round = 0;
  std::string algo;
  std::string method;
  double mean_client_loss = 0.0;
  double update_norm = 0.0;
  double probe_loss = 0.0;

  nlohmann::json to_json() const;
  // Compact single-line JSON, keys in the documented order.
  std::string to_json_line() const;
};

struct RunArtifacts {
  ParamVector reference;  // pre-federation adapter snapshot
  ParamVector final_adapters;
  ServerState final_state;
  std::vector<RoundMetrics> metrics;
};

// Pairs for DPO; split pairs for KTO, redistributed when data_mode asks.
FederatedData prepare_training_data(const RunConfig& cfg,
                                    const data::FederatedPairDataset& pairs);

// Throws DpoRequiresPairs when DPO meets feedback data or redistribution, and
// InvalidConfig when KTO meets unsplit pairs.
void check_applicability(const RunConfig& cfg, const FederatedData& data);

struct RoundView {
  const ServerState& server;
  std::span<const ClientState> clients;
  std::span<const std::size_t> sampled;  // canonical client indices
  const RoundMetrics& metrics;
};
using RoundObserver = std::function<void(const RoundView&)>;

// Round loop: sample ceil(fraction * N) clients without replacement, train
// them (on up to cfg.workers threads), aggregate in canonical client order,
// log metrics. Results do not depend on the worker count.
//
// Random streams, all derived from RngStream(cfg.root_seed):
//   ("adapters", 0)                     initial LoRA A matrices
//   ("probe", 0)                        probe-set sample
//   ("round", r) / ("sample", 0)        client sampling in round r (1-based)
//   ("round", r) / ("client", k)        minibatches of canonical client k
//                                       (k = 0 for all when shared_client_streams)
//
// A probe dataset may be passed; otherwise probe_size records are sampled
// from the training data. Throws NumericalError naming the round on NaN/Inf.
RunArtifacts run_rounds(const RunConfig& cfg, const FederatedData& data,
                        const model::BaseModel& model,
                        const RoundObserver& observer = {},
                        const FederatedData* probe = nullptr);

}  // namespace fpref::fed
