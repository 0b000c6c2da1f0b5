#include "fpref/cli/pipeline.hpp"

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fpref/core/error.hpp"
#include "fpref/core/rng.hpp"
#include "fpref/io/checkpoint.hpp"
#include "fpref/model/pretrain.hpp"

namespace fpref::cli {

fs::path output_path(const fs::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / p;
  return p;
}

fed::FederatedData load_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    bool pairs = true;
    try {
      pairs = nlohmann::json::parse(line).contains("chosen");
    } catch (const nlohmann::json::exception&) {
      // Let the real reader report the line.
    }
    if (pairs) return data::load_pairs(path);
    return data::load_feedback(path);
  }
  throw EmptyDataset(path.string());
}

fed::FederatedData training_data(const fed::RunConfig& cfg, const fed::FederatedData& raw) {
  if (const auto* pairs = std::get_if<data::FederatedPairDataset>(&raw)) {
    return fed::prepare_training_data(cfg, *pairs);
  }
  const auto& fb = std::get<data::FederatedFeedbackDataset>(raw);
  if (cfg.method == fed::Method::kDpo) {
    throw DpoRequiresPairs("training data holds single-label feedback examples");
  }
  if (cfg.data_mode == fed::DataMode::kRedistributed) {
    return data::redistribute(fb, cfg.redistribute_seed);
  }
  return fb;
}

model::BaseModel resolve_base_model(const fed::RunConfig& cfg, const fed::FederatedData& raw) {
  if (!cfg.paths.base_model.empty()) {
    return io::load_base(cfg.paths.base_model).with_lora(cfg.model.lora());
  }
  // The pretraining corpus needs pairs; a feedback response stands in for
  // both halves.
  data::FederatedPairDataset corpus;
  if (const auto* pairs = std::get_if<data::FederatedPairDataset>(&raw)) {
    corpus = *pairs;
  } else {
    for (const auto& [id, exs] : std::get<data::FederatedFeedbackDataset>(raw).clients) {
      for (const auto& e : exs) {
        corpus.clients[id].push_back(
            PreferencePair{e.prompt, e.response, e.response, e.client_id, e.source_index});
      }
    }
  }
  return model::build_base_model(corpus, cfg.model.dims(), cfg.model.lora(), cfg.pretrain,
                                 cfg.root_seed);
}

eval::ScoreMethod score_method(const fed::RunConfig& cfg) {
  if (cfg.method == fed::Method::kDpo) return eval::ScoreMethod::kDpo;
  return cfg.data_mode == fed::DataMode::kRedistributed ? eval::ScoreMethod::kKtor
                                                        : eval::ScoreMethod::kKtoo;
}

std::string run_name(const fed::RunConfig& cfg) {
  std::string m(eval::to_string(score_method(cfg)));
  return eval::fold_case(m) + "-" + eval::fold_case(std::string(fed::to_string(cfg.aggregator)));
}

TrainOutcome train_to_dir(fed::RunConfig cfg, const model::BaseModel& base,
                          const fed::FederatedData& raw, const fs::path& dir, std::ostream& log) {
  fed::validate(cfg);
  const auto data = training_data(cfg, raw);
  fed::check_applicability(cfg, data);

  std::optional<fed::FederatedData> probe;
  if (!cfg.paths.probe.empty()) probe = load_records(cfg.paths.probe);

  fs::create_directories(dir);
  cfg.paths.output_dir = dir.string();
  // The model section describes the model actually trained.
  cfg.model.context_len = base.dims().context_len;
  cfg.model.embed_dim = base.dims().embed_dim;
  cfg.model.hidden_dim = base.dims().hidden_dim;
  cfg.model.n_layers = base.dims().n_layers;
  {
    std::ofstream out(dir / "config.json");
    out << fed::to_json(cfg).dump(2) << '\n';
    if (!out) throw IoError("cannot write " + (dir / "config.json").string());
  }
  io::save_base((dir / "base.ckpt").string(), base);

  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  if (!metrics) throw IoError("cannot write " + (dir / "metrics.jsonl").string());
  auto observer = [&](const fed::RoundView& view) {
    metrics << view.metrics.to_json_line() << '\n';
    metrics.flush();
    log << "round " << view.metrics.round << "/" << cfg.rounds
        << "  client_loss " << view.metrics.mean_client_loss << "  update_norm "
        << view.metrics.update_norm << "  probe_loss " << view.metrics.probe_loss << '\n';
  };
  TrainOutcome outcome;
  outcome.dir = dir;
  outcome.artifacts = fed::run_rounds(cfg, data, base, observer, probe ? &*probe : nullptr);
  io::save_adapters((dir / "reference.ckpt").string(), base, outcome.artifacts.reference);
  io::save_adapters((dir / "adapters.ckpt").string(), base, outcome.artifacts.final_adapters);
  return outcome;
}

std::vector<std::string> load_prompts(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    out.push_back(line.substr(b));
  }
  if (out.empty()) throw EmptyDataset(path.string());
  return out;
}

std::vector<std::string> generate_outputs(const model::BaseModel& model,
                                          const ParamVector& adapters,
                                          const std::vector<std::string>& prompts,
                                          const model::SamplingConfig& sampling,
                                          std::uint64_t seed, std::size_t max_prompt_tokens) {
  const RngStream root(seed);
  const auto ctx = static_cast<std::size_t>(model.dims().context_len);
  const std::size_t keep = std::min(max_prompt_tokens, ctx > 1 ? ctx - 1 : 0);
  std::vector<std::string> out;
  out.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    auto ids = model.vocab().encode_lossy(prompts[i]);
    if (ids.size() > keep) ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(keep));
    auto rng = root.derive("eval", static_cast<std::int64_t>(i));
    const auto resp = model::sample_response(model, adapters, ids, sampling, rng);
    out.push_back(model.vocab().decode(resp));
  }
  return out;
}

double score_outputs(eval::Benchmark b, const std::vector<std::string>& prompts,
                     const std::vector<std::string>& outputs, const eval::Judge& judge,
                     const eval::KeywordRuleSet& rules) {
  if (b == eval::Benchmark::kAdvBench) return eval::advbench_score(outputs, rules);
  if (outputs.empty()) throw EmptyOutputs();
  double sum = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) sum += judge.score(prompts[i], outputs[i]);
  return sum / static_cast<double>(outputs.size());
}

void write_outputs(const fs::path& path, const std::vector<std::string>& prompts,
                   const std::vector<std::string>& outputs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    nlohmann::ordered_json j;
    j["prompt"] = prompts[i];
    j["output"] = outputs[i];
    out << j.dump() << '\n';
  }
}

}  // namespace fpref::cli
