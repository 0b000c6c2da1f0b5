#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fpref/data/dataset.hpp"
#include "fpref/eval/judge.hpp"
#include "fpref/eval/report.hpp"
#include "fpref/eval/safety.hpp"
#include "fpref/federation/orchestrator.hpp"
#include "fpref/federation/run_config.hpp"
#include "fpref/model/transformer.hpp"

namespace fpref::cli {

namespace fs = std::filesystem;

inline constexpr const char* kOutputRootEnv = "FPREF_OUTPUT_ROOT";

// Relative paths resolve under $FPREF_OUTPUT_ROOT when it is set.
fs::path output_path(const fs::path& p);

// Pairs or feedback JSONL, told apart by whether the first record has a
// "chosen" field.
fed::FederatedData load_records(const fs::path& path);

// Applies the configured method and data mode to raw records: pairs are
// split for KTO, feedback is redistributed for KTO when asked. DPO on
// feedback records throws DpoRequiresPairs.
fed::FederatedData training_data(const fed::RunConfig& cfg, const fed::FederatedData& raw);

// Loads cfg.paths.base_model when set (with the configured LoRA shape),
// otherwise pretrains one on the raw records with cfg.root_seed.
model::BaseModel resolve_base_model(const fed::RunConfig& cfg, const fed::FederatedData& raw);

// "DPO", "KTOO" or "KTOR" for the report.
eval::ScoreMethod score_method(const fed::RunConfig& cfg);
// Matrix run name such as "ktor-fedavgm".
std::string run_name(const fed::RunConfig& cfg);

// Run directory contents:
//   config.json     resolved config
//   metrics.jsonl   one line per round
//   base.ckpt       frozen base model
//   reference.ckpt  pre-federation adapters (the reference policy)
//   adapters.ckpt   final global adapters
struct TrainOutcome {
  fed::RunArtifacts artifacts;
  fs::path dir;
};
TrainOutcome train_to_dir(fed::RunConfig cfg, const model::BaseModel& base,
                          const fed::FederatedData& raw, const fs::path& dir, std::ostream& log);

// Prompts file: one prompt per line; blank lines and '#' comments skipped.
std::vector<std::string> load_prompts(const fs::path& path);
std::vector<std::string> default_prompts(eval::Benchmark b);

// Prompt i is sampled from RngStream(seed).derive("eval", i). Prompts keep
// their last max_prompt_tokens words after lossy encoding.
std::vector<std::string> generate_outputs(const model::BaseModel& model,
                                          const ParamVector& adapters,
                                          const std::vector<std::string>& prompts,
                                          const model::SamplingConfig& sampling,
                                          std::uint64_t seed, std::size_t max_prompt_tokens);

// Mean judge score for the 0-10 benchmarks, refusal percentage for AdvBench.
double score_outputs(eval::Benchmark b, const std::vector<std::string>& prompts,
                     const std::vector<std::string>& outputs, const eval::Judge& judge,
                     const eval::KeywordRuleSet& rules);

void write_outputs(const fs::path& path, const std::vector<std::string>& prompts,
                   const std::vector<std::string>& outputs);

}  // namespace fpref::cli
