#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "fpref/model/pretrain.hpp"
#include "fpref/model/transformer.hpp"

namespace fpref::fed {

enum class Method { kDpo, kKto };
enum class DataMode { kOriginal, kRedistributed };
enum class AggregatorKind { kFedAvg, kFedProx, kScaffold, kFedAvgM, kFedYogi, kFedAdagrad, kFedAdam };
enum class LocalOptimizer { kAdam, kSgd };

inline constexpr AggregatorKind kAllAggregators[] = {
    AggregatorKind::kFedAvg,  AggregatorKind::kFedProx,    AggregatorKind::kScaffold,
    AggregatorKind::kFedAvgM, AggregatorKind::kFedYogi,    AggregatorKind::kFedAdagrad,
    AggregatorKind::kFedAdam};

std::string_view to_string(Method m) noexcept;
std::string_view to_string(DataMode m) noexcept;
std::string_view to_string(AggregatorKind a) noexcept;
std::string_view to_string(LocalOptimizer o) noexcept;
// Mixed-case name for tables, e.g. "FedAvgM".
std::string_view display_name(AggregatorKind a) noexcept;
// Parsers are case-insensitive and throw InvalidConfig on unknown names.
Method parse_method(std::string_view s);
DataMode parse_data_mode(std::string_view s);
AggregatorKind parse_aggregator(std::string_view s);
LocalOptimizer parse_local_optimizer(std::string_view s);

struct LocalConfig {
  LocalOptimizer optimizer = LocalOptimizer::kAdam;
  double lr = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int steps = 10;
  int batch_size = 4;
  double prox_mu = 0.01;  // FedProx only
};

struct LossConfig {
  double beta = 0.1;
  double lambda_d = 1.0;
  double lambda_u = 1.0;
};

struct ServerConfig {
  double momentum = 0.9;      // FedAvgM beta_m
  double avgm_lr = 1.0;       // FedAvgM eta_s
  double scaffold_lr = 1.0;   // SCAFFOLD eta_g
  double adaptive_lr = 1e-2;  // FedAdagrad / FedAdam / FedYogi eta
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
};

struct ModelConfig {
  int context_len = 64;
  int embed_dim = 32;
  int hidden_dim = 64;
  int n_layers = 1;
  int lora_rank = 4;
  double lora_alpha = 8.0;
  int max_prompt_tokens = 24;
  int max_response_tokens = 40;

  model::ModelDims dims() const;
  model::LoraConfig lora() const;
};

struct PathsConfig {
  std::string data;        // pairs JSONL, or feedback JSONL for KTO
  std::string probe;       // optional probe-set file, same formats
  std::string base_model;  // optional; built by pretraining when empty
  std::string output_dir;
};

struct RunConfig {
  Method method = Method::kKto;
  DataMode data_mode = DataMode::kOriginal;
  AggregatorKind aggregator = AggregatorKind::kFedAvg;
  int rounds = 30;
  double clients_fraction = 1.0;
  LocalConfig local;
  LossConfig loss;
  ServerConfig server;
  ModelConfig model;
  model::PretrainConfig pretrain;
  model::SamplingConfig sampling;
  std::uint64_t root_seed = 2023;
  std::uint64_t redistribute_seed = 2023;
  int probe_size = 16;
  bool refresh_reference = false;
  // Every client draws minibatches from the same per-round stream instead of
  // one derived from its position. Lets identical clients stay identical.
  bool shared_client_streams = false;
  int workers = 1;  // does not affect results
  PathsConfig paths;
};

// Throws InvalidConfig, or DpoRequiresPairs for DPO on redistributed data.
void validate(const RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);
// Overlays keys present in `j` onto `base`. Unknown keys are rejected.
RunConfig from_json(const nlohmann::json& j, RunConfig base = {});

RunConfig load_config_file(const std::string& path, RunConfig base = {});

}  // namespace fpref::fed
