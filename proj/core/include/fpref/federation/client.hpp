#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fpref/core/param_vector.hpp"
#include "fpref/core/rng.hpp"
#include "fpref/data/dataset.hpp"
#include "fpref/federation/aggregator.hpp"
#include "fpref/federation/run_config.hpp"
#include "fpref/losses/losses.hpp"
#include "fpref/model/transformer.hpp"

namespace fpref::fed {

using ClientRecords = std::variant<std::vector<losses::TokenizedPair>,
                                   std::vector<losses::TokenizedFeedback>>;

struct ClientState {
  std::string client_id;
  ClientRecords records;
  std::optional<ParamVector> control_variate;  // SCAFFOLD c_i

  std::size_t size() const noexcept;
};

struct TokenLimits {
  std::size_t max_prompt = 24;
  std::size_t max_response = 40;
};

// Word-level encoding with unknown words mapped to <unk>. Prompts keep their
// last max_prompt tokens, responses their first max_response tokens, so any
// prompt/response combination fits the context. Empty responses become a
// lone <eos>.
losses::TokenizedPair tokenize(const model::Vocab& vocab, const PreferencePair& p,
                               const TokenLimits& limits);
losses::TokenizedFeedback tokenize(const model::Vocab& vocab, const FeedbackExample& e,
                                   const TokenLimits& limits);

std::vector<ClientState> make_clients(const model::Vocab& vocab,
                                      const data::FederatedPairDataset& data,
                                      const TokenLimits& limits);
std::vector<ClientState> make_clients(const model::Vocab& vocab,
                                      const data::FederatedFeedbackDataset& data,
                                      const TokenLimits& limits);

struct LocalTrainOptions {
  Method method = Method::kKto;
  AggregatorKind aggregator = AggregatorKind::kFedAvg;
  LocalConfig local;
  LossConfig loss;
};

// Runs `local.steps` optimizer steps from `global` on minibatches drawn from
// `stream`. Minibatches walk a per-epoch Fisher-Yates permutation of the
// client's records; when fewer than batch_size records remain, a fresh
// permutation starts. Local optimizer state starts fresh every call.
//
// FedProx adds mu * (w - global) to every gradient. SCAFFOLD adds
// (c - c_i) to every gradient and reports
// cv_delta = -c + (global - w_final) / (K * lr).
//
// Throws DpoRequiresPairs for DPO on feedback records, InvalidConfig for KTO
// on pair records, EmptyClient when the client holds nothing.
ClientUpdate local_train(const model::BaseModel& model, const ClientState& client,
                         const ParamVector& global, const ParamVector& reference,
                         const ParamVector* server_cv, RngStream stream,
                         const LocalTrainOptions& opts);

}  // namespace fpref::fed
