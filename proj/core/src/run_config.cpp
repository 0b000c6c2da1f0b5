#include "fpref/federation/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fpref/core/error.hpp"

namespace fpref::model {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PretrainConfig, steps, batch_size, lr, init_std)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SamplingConfig, max_len, temperature)
}  // namespace fpref::model

namespace fpref::fed {

NLOHMANN_JSON_SERIALIZE_ENUM(LocalOptimizer, {{LocalOptimizer::kAdam, "adam"},
                                              {LocalOptimizer::kSgd, "sgd"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LocalConfig, optimizer, lr, adam_beta1, adam_beta2,
                                   adam_eps, steps, batch_size, prox_mu)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LossConfig, beta, lambda_d, lambda_u)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ServerConfig, momentum, avgm_lr, scaffold_lr,
                                   adaptive_lr, beta1, beta2, tau)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ModelConfig, context_len, embed_dim, hidden_dim,
                                   n_layers, lora_rank, lora_alpha, max_prompt_tokens,
                                   max_response_tokens)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PathsConfig, data, probe, base_model, output_dir)

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void overlay(nlohmann::json& dst, const nlohmann::json& src, const std::string& at) {
  if (!src.is_object()) throw InvalidConfig("expected an object at '" + at + "'");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = at.empty() ? it.key() : at + "." + it.key();
    auto found = dst.find(it.key());
    if (found == dst.end()) throw InvalidConfig("unknown key '" + key + "'");
    if (found->is_object()) {
      overlay(*found, it.value(), key);
    } else {
      *found = it.value();
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidConfig(what);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }
bool unit_interval(double x) { return std::isfinite(x) && x >= 0.0 && x < 1.0; }

}  // namespace

std::string_view to_string(Method m) noexcept {
  return m == Method::kDpo ? "dpo" : "kto";
}

std::string_view to_string(DataMode m) noexcept {
  return m == DataMode::kOriginal ? "original" : "redistributed";
}

std::string_view to_string(AggregatorKind a) noexcept {
  switch (a) {
    case AggregatorKind::kFedAvg: return "fedavg";
    case AggregatorKind::kFedProx: return "fedprox";
    case AggregatorKind::kScaffold: return "scaffold";
    case AggregatorKind::kFedAvgM: return "fedavgm";
    case AggregatorKind::kFedYogi: return "fedyogi";
    case AggregatorKind::kFedAdagrad: return "fedadagrad";
    case AggregatorKind::kFedAdam: return "fedadam";
  }
  return "?";
}

std::string_view display_name(AggregatorKind a) noexcept {
  switch (a) {
    case AggregatorKind::kFedAvg: return "FedAvg";
    case AggregatorKind::kFedProx: return "FedProx";
    case AggregatorKind::kScaffold: return "SCAFFOLD";
    case AggregatorKind::kFedAvgM: return "FedAvgM";
    case AggregatorKind::kFedYogi: return "FedYogi";
    case AggregatorKind::kFedAdagrad: return "FedAdagrad";
    case AggregatorKind::kFedAdam: return "FedAdam";
  }
  return "?";
}

std::string_view to_string(LocalOptimizer o) noexcept {
  return o == LocalOptimizer::kAdam ? "adam" : "sgd";
}

Method parse_method(std::string_view s) {
  auto v = lower(s);
  if (v == "dpo") return Method::kDpo;
  if (v == "kto") return Method::kKto;
  throw InvalidConfig("unknown method '" + std::string(s) + "' (expected dpo|kto)");
}

DataMode parse_data_mode(std::string_view s) {
  auto v = lower(s);
  if (v == "original") return DataMode::kOriginal;
  if (v == "redistributed") return DataMode::kRedistributed;
  throw InvalidConfig("unknown data mode '" + std::string(s) +
                      "' (expected original|redistributed)");
}

AggregatorKind parse_aggregator(std::string_view s) {
  auto v = lower(s);
  for (auto a : kAllAggregators) {
    if (v == to_string(a)) return a;
  }
  throw InvalidConfig("unknown aggregator '" + std::string(s) + "'");
}

LocalOptimizer parse_local_optimizer(std::string_view s) {
  auto v = lower(s);
  if (v == "adam") return LocalOptimizer::kAdam;
  if (v == "sgd") return LocalOptimizer::kSgd;
  throw InvalidConfig("unknown local optimizer '" + std::string(s) + "'");
}

model::ModelDims ModelConfig::dims() const {
  model::ModelDims d;
  d.context_len = context_len;
  d.embed_dim = embed_dim;
  d.hidden_dim = hidden_dim;
  d.n_layers = n_layers;
  return d;
}

model::LoraConfig ModelConfig::lora() const { return {lora_rank, lora_alpha}; }

void validate(const RunConfig& c) {
  if (c.method == Method::kDpo && c.data_mode == DataMode::kRedistributed) {
    throw DpoRequiresPairs("data_mode=redistributed scatters each pair across clients");
  }
  require(c.rounds >= 0, "rounds must be >= 0");
  require(std::isfinite(c.clients_fraction) && c.clients_fraction > 0.0 &&
              c.clients_fraction <= 1.0,
          "clients_fraction must be in (0, 1]");
  require(c.local.steps >= 0, "local.steps must be >= 0");
  require(c.local.batch_size >= 1, "local.batch_size must be >= 1");
  require(positive(c.local.lr), "local.lr must be positive");
  require(unit_interval(c.local.adam_beta1) && unit_interval(c.local.adam_beta2),
          "local Adam betas must be in [0, 1)");
  require(positive(c.local.adam_eps), "local.adam_eps must be positive");
  require(std::isfinite(c.local.prox_mu) && c.local.prox_mu >= 0.0,
          "local.prox_mu must be >= 0");
  require(positive(c.loss.beta), "loss.beta must be positive");
  require(positive(c.loss.lambda_d) && positive(c.loss.lambda_u),
          "loss.lambda_d and loss.lambda_u must be positive");
  require(unit_interval(c.server.momentum), "server.momentum must be in [0, 1)");
  require(positive(c.server.avgm_lr) && positive(c.server.scaffold_lr) &&
              positive(c.server.adaptive_lr),
          "server learning rates must be positive");
  require(unit_interval(c.server.beta1) && unit_interval(c.server.beta2),
          "server betas must be in [0, 1)");
  require(std::isfinite(c.server.tau) && c.server.tau >= 0.0, "server.tau must be >= 0");
  const auto& m = c.model;
  require(m.context_len >= 2 && m.embed_dim >= 1 && m.hidden_dim >= 1 && m.n_layers >= 0,
          "model dimensions must be positive");
  require(m.lora_rank >= 1 && m.lora_rank <= std::min(m.embed_dim, m.hidden_dim),
          "model.lora_rank must be in [1, min(embed_dim, hidden_dim)]");
  require(positive(m.lora_alpha), "model.lora_alpha must be positive");
  require(m.max_prompt_tokens >= 0 && m.max_response_tokens >= 1 &&
              m.max_prompt_tokens + m.max_response_tokens <= m.context_len,
          "max_prompt_tokens + max_response_tokens must fit in context_len");
  require(c.pretrain.steps >= 0 && c.pretrain.batch_size >= 1 && positive(c.pretrain.lr) &&
              positive(c.pretrain.init_std),
          "invalid pretrain settings");
  require(c.sampling.max_len >= 1, "sampling.max_len must be >= 1");
  require(std::isfinite(c.sampling.temperature), "sampling.temperature must be finite");
  require(c.probe_size >= 0, "probe_size must be >= 0");
  require(c.workers >= 1, "workers must be >= 1");
}

nlohmann::json to_json(const RunConfig& c) {
  return {
      {"method", std::string(to_string(c.method))},
      {"data_mode", std::string(to_string(c.data_mode))},
      {"aggregator", std::string(to_string(c.aggregator))},
      {"rounds", c.rounds},
      {"clients_fraction", c.clients_fraction},
      {"local", c.local},
      {"loss", c.loss},
      {"server", c.server},
      {"model", c.model},
      {"pretrain", c.pretrain},
      {"sampling", c.sampling},
      {"root_seed", c.root_seed},
      {"redistribute_seed", c.redistribute_seed},
      {"probe_size", c.probe_size},
      {"refresh_reference", c.refresh_reference},
      {"shared_client_streams", c.shared_client_streams},
      {"workers", c.workers},
      {"paths", c.paths},
  };
}

RunConfig from_json(const nlohmann::json& j, RunConfig base) {
  nlohmann::json merged = to_json(base);
  overlay(merged, j, "");
  RunConfig c;
  try {
    c.method = parse_method(merged.at("method").get<std::string>());
    c.data_mode = parse_data_mode(merged.at("data_mode").get<std::string>());
    c.aggregator = parse_aggregator(merged.at("aggregator").get<std::string>());
    c.rounds = merged.at("rounds").get<int>();
    c.clients_fraction = merged.at("clients_fraction").get<double>();
    c.local = merged.at("local").get<LocalConfig>();
    c.loss = merged.at("loss").get<LossConfig>();
    c.server = merged.at("server").get<ServerConfig>();
    c.model = merged.at("model").get<ModelConfig>();
    c.pretrain = merged.at("pretrain").get<model::PretrainConfig>();
    c.sampling = merged.at("sampling").get<model::SamplingConfig>();
    c.root_seed = merged.at("root_seed").get<std::uint64_t>();
    c.redistribute_seed = merged.at("redistribute_seed").get<std::uint64_t>();
    c.probe_size = merged.at("probe_size").get<int>();
    c.refresh_reference = merged.at("refresh_reference").get<bool>();
    c.shared_client_streams = merged.at("shared_client_streams").get<bool>();
    c.workers = merged.at("workers").get<int>();
    c.paths = merged.at("paths").get<PathsConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(e.what());
  }
  return c;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig("config '" + path + "': " + e.what());
  }
  return from_json(j, std::move(base));
}

}  // namespace fpref::fed
