#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>

#include "fpref/core/param_vector.hpp"
#include "fpref/federation/run_config.hpp"

namespace fpref::fed {

struct ClientUpdate {
  ParamVector delta;  // w_final - w_global_start
  std::size_t n_examples = 0;
  std::optional<ParamVector> cv_delta;  // SCAFFOLD: c_i_new - c_i
  double mean_loss = 0.0;               // mean local batch loss this round
};

struct NoServerState {
  bool operator==(const NoServerState&) const = default;
};
struct MomentumState {
  ParamVector m;
  bool operator==(const MomentumState&) const = default;
};
struct AdaptiveMomentState {
  ParamVector m;
  ParamVector v;
  bool operator==(const AdaptiveMomentState&) const = default;
};
struct AdagradState {
  ParamVector v;
  bool operator==(const AdagradState&) const = default;
};
struct ScaffoldState {
  ParamVector c;
  bool operator==(const ScaffoldState&) const = default;
};

using AggregatorState = std::variant<NoServerState, MomentumState, AdaptiveMomentState,
                                     AdagradState, ScaffoldState>;

struct ServerState {
  ParamVector global_adapters;
  std::uint64_t round = 0;
  AggregatorState aggregator_state;

  // Server control variate for SCAFFOLD, nullptr otherwise.
  const ParamVector* control_variate() const noexcept;
  bool operator==(const ServerState&) const = default;
};

// Zero-initialised state matching the algorithm.
ServerState init_server(ParamVector global, AggregatorKind algo);

// sum_k (n_k / sum n) * delta_k, accumulated in update order.
ParamVector weighted_pseudo_update(std::span<const ClientUpdate> updates);

// One server step; round advances by exactly one. `total_clients` is N in
// SCAFFOLD's |S|/N control-variate scaling. Throws EmptyUpdateSet,
// LayoutMismatch, InvalidArgument (zero example counts), NonFiniteResult.
ServerState aggregate(const ServerState& server, std::span<const ClientUpdate> updates,
                      AggregatorKind algo, const ServerConfig& cfg,
                      std::size_t total_clients);

}  // namespace fpref::fed
