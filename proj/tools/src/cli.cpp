#include "fpref/cli/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fpref/cli/matrix.hpp"
#include "fpref/cli/pipeline.hpp"
#include "fpref/core/error.hpp"
#include "fpref/data/synthetic.hpp"
#include "fpref/io/checkpoint.hpp"
#include "fpref/model/pretrain.hpp"

namespace fpref::cli {
namespace {

// Flags that override the config file. Precedence: built-in defaults, then
// --config, then individual flags.
struct RunFlags {
  std::optional<std::string> config;
  std::optional<std::string> method, data_mode, aggregator, local_optimizer;
  std::optional<int> rounds, local_steps, batch_size, workers, probe_size;
  std::optional<double> fraction, lr, beta, lambda_d, lambda_u, mu;
  std::optional<std::uint64_t> seed, redistribute_seed;
  std::optional<std::string> data, probe, base_model, out;
  bool refresh_reference = false;

  void add_to(CLI::App& app, bool per_run) {
    app.add_option("--config", config, "JSON run config; flags override its values");
    if (per_run) {
      app.add_option("--method", method, "dpo | kto");
      app.add_option("--data-mode", data_mode, "original | redistributed");
      app.add_option("--agg", aggregator,
                     "fedavg | fedprox | scaffold | fedavgm | fedyogi | fedadagrad | fedadam");
    }
    app.add_option("--local-optimizer", local_optimizer, "adam | sgd");
    app.add_option("--rounds", rounds);
    app.add_option("--fraction", fraction, "client participation fraction per round");
    app.add_option("--local-steps", local_steps);
    app.add_option("--batch-size", batch_size);
    app.add_option("--lr", lr, "local learning rate");
    app.add_option("--beta", beta);
    app.add_option("--lambda-d", lambda_d);
    app.add_option("--lambda-u", lambda_u);
    app.add_option("--mu", mu, "FedProx proximal weight");
    app.add_option("--seed", seed, "root seed");
    app.add_option("--redistribute-seed", redistribute_seed);
    app.add_option("--probe-size", probe_size);
    app.add_option("--workers", workers, "client threads per round");
    app.add_option("--data", data, "pairs or feedback JSONL");
    app.add_option("--probe", probe, "probe-set JSONL");
    app.add_option("--base-model", base_model, "base checkpoint; pretrained when absent");
    app.add_option("--out", out, "output directory");
    app.add_flag("--refresh-reference", refresh_reference,
                 "use the round-start global adapters as the reference policy");
  }

  fed::RunConfig resolve() const {
    fed::RunConfig cfg = config ? fed::load_config_file(*config) : fed::RunConfig{};
    if (method) cfg.method = fed::parse_method(*method);
    if (data_mode) cfg.data_mode = fed::parse_data_mode(*data_mode);
    if (aggregator) cfg.aggregator = fed::parse_aggregator(*aggregator);
    if (local_optimizer) cfg.local.optimizer = fed::parse_local_optimizer(*local_optimizer);
    if (rounds) cfg.rounds = *rounds;
    if (fraction) cfg.clients_fraction = *fraction;
    if (local_steps) cfg.local.steps = *local_steps;
    if (batch_size) cfg.local.batch_size = *batch_size;
    if (lr) cfg.local.lr = *lr;
    if (beta) cfg.loss.beta = *beta;
    if (lambda_d) cfg.loss.lambda_d = *lambda_d;
    if (lambda_u) cfg.loss.lambda_u = *lambda_u;
    if (mu) cfg.local.prox_mu = *mu;
    if (seed) cfg.root_seed = *seed;
    if (redistribute_seed) cfg.redistribute_seed = *redistribute_seed;
    if (probe_size) cfg.probe_size = *probe_size;
    if (workers) cfg.workers = *workers;
    if (data) cfg.paths.data = *data;
    if (probe) cfg.paths.probe = *probe;
    if (base_model) cfg.paths.base_model = *base_model;
    if (out) cfg.paths.output_dir = *out;
    if (refresh_reference) cfg.refresh_reference = true;
    return cfg;
  }
};

fs::path with_suffix(const fs::path& p, const std::string& tag) {
  auto stem = p.stem().string();
  auto ext = p.extension().string();
  return p.parent_path() / (stem + tag + (ext.empty() ? ".jsonl" : ext));
}

// --- prepare-data ---------------------------------------------------------

struct PrepareArgs {
  std::string input;
  std::string out;
  bool redistribute = false;
  std::uint64_t seed = data::kDefaultRedistributeSeed;
  std::optional<std::string> redistributed_out;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  const auto pairs = data::load_pairs(a.input);
  const auto split = data::split_pairs(pairs);
  const auto split_path = output_path(a.out);
  if (split_path.has_parent_path()) fs::create_directories(split_path.parent_path());
  data::write_feedback(split, split_path);
  out << "wrote " << split.total() << " feedback examples from " << pairs.total()
      << " pairs to " << split_path.string() << '\n';
  out << data::format_stats(data::dataset_stats(split));
  if (a.redistribute) {
    const auto redistributed = data::redistribute(split, a.seed);
    const auto path = output_path(a.redistributed_out ? fs::path(*a.redistributed_out)
                                                      : with_suffix(a.out, ".redistributed"));
    data::write_feedback(redistributed, path);
    out << "wrote redistributed examples (seed " << a.seed << ") to " << path.string() << '\n';
    out << data::format_stats(data::dataset_stats(redistributed));
  }
  return 0;
}

// --- synth-data -----------------------------------------------------------

int cmd_synth(const data::SyntheticCorpusSpec& spec, const std::string& out_path,
              std::ostream& out) {
  const auto corpus = data::make_marker_corpus(spec);
  const auto path = output_path(out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  data::write_pairs(corpus, path);
  out << "wrote " << corpus.total() << " pairs across " << corpus.clients.size()
      << " clients to " << path.string() << '\n';
  return 0;
}

// --- pretrain-base --------------------------------------------------------

int cmd_pretrain(const RunFlags& flags, std::ostream& out) {
  auto cfg = flags.resolve();
  if (cfg.paths.data.empty()) throw InvalidConfig("pretrain-base needs --data");
  if (!flags.out) throw InvalidConfig("pretrain-base needs --out");
  cfg.paths.base_model.clear();
  const auto raw = load_records(cfg.paths.data);
  const auto model = resolve_base_model(cfg, raw);
  const auto path = output_path(*flags.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::save_base(path.string(), model);
  out << "wrote base model (vocab " << model.vocab().size() << ", " << model.weights().size()
      << " weights) to " << path.string() << '\n';
  return 0;
}

// --- train ----------------------------------------------------------------

int cmd_train(const RunFlags& flags, std::ostream& out) {
  auto cfg = flags.resolve();
  fed::validate(cfg);
  if (cfg.paths.data.empty()) throw InvalidConfig("train needs --data (or paths.data)");
  if (cfg.paths.output_dir.empty()) cfg.paths.output_dir = "runs/" + run_name(cfg);
  const auto dir = output_path(cfg.paths.output_dir);
  const auto raw = load_records(cfg.paths.data);
  // Fail on method/data mismatches before spending time on pretraining.
  fed::check_applicability(cfg, training_data(cfg, raw));
  const auto model = resolve_base_model(cfg, raw);
  const auto outcome = train_to_dir(cfg, model, raw, dir, out);
  out << "wrote " << outcome.artifacts.metrics.size() << " rounds to " << dir.string() << '\n';
  return 0;
}

// --- matrix ---------------------------------------------------------------

struct MatrixArgs {
  RunFlags flags;
  std::vector<std::string> aggregators;
  std::vector<std::string> benchmarks;
  std::optional<std::string> prompt_dir, keywords;
  std::string judge = "mock";
  int slots = 1;
};

int cmd_matrix(const MatrixArgs& a, std::ostream& out, std::ostream& err) {
  MatrixOptions opts;
  opts.base = a.flags.resolve();
  opts.out_dir = opts.base.paths.output_dir.empty() ? fs::path("matrix")
                                                    : fs::path(opts.base.paths.output_dir);
  for (const auto& s : a.aggregators) opts.aggregators.push_back(fed::parse_aggregator(s));
  if (!a.benchmarks.empty()) {
    opts.benchmarks.clear();
    for (const auto& s : a.benchmarks) opts.benchmarks.push_back(eval::parse_benchmark(s));
  }
  if (a.prompt_dir) opts.prompt_dir = *a.prompt_dir;
  if (a.keywords) opts.keywords = *a.keywords;
  opts.judge = a.judge;
  opts.slots = a.slots;
  const auto result = run_matrix(opts, out);
  std::size_t ok = 0, failed = 0, skipped = 0;
  for (const auto& c : result.cells) {
    if (c.status == "ok") ++ok;
    if (c.status == "failed") ++failed;
    if (c.status == "skipped") ++skipped;
  }
  out << eval::render_text(result.report);
  out << ok << " runs ok, " << failed << " failed, " << skipped << " skipped; "
      << result.scores.size() << " scores\n";
  if (failed > 0) err << "warning: " << failed << " matrix cells failed; see matrix.json\n";
  return 0;
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
  std::optional<std::string> run_dir, base, adapters, prompts, keywords, outputs, scores;
  std::optional<std::string> method, aggregator;
  std::string benchmark;
  std::string judge = "mock";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_len, max_prompt_tokens;
  std::optional<double> temperature;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto bench = eval::parse_benchmark(a.benchmark);
  fed::RunConfig cfg;
  fs::path base_path, adapters_path;
  if (a.run_dir) {
    const fs::path dir = output_path(*a.run_dir);
    cfg = fed::load_config_file((dir / "config.json").string());
    base_path = dir / "base.ckpt";
    adapters_path = dir / "adapters.ckpt";
  }
  if (a.base) base_path = *a.base;
  if (a.adapters) adapters_path = *a.adapters;
  if (base_path.empty()) throw InvalidConfig("eval needs --run or --base");

  const auto model = io::load_base(base_path.string());
  const bool tuned = !adapters_path.empty();
  const auto adapters = tuned ? io::load_adapters(adapters_path.string(), model)
                              : model.zero_adapters();

  auto sampling = cfg.sampling;
  if (a.max_len) sampling.max_len = *a.max_len;
  if (a.temperature) sampling.temperature = *a.temperature;
  const auto seed = a.seed.value_or(cfg.root_seed);
  const auto max_prompt =
      a.max_prompt_tokens.value_or(static_cast<std::size_t>(cfg.model.max_prompt_tokens));

  const auto prompts = a.prompts ? load_prompts(*a.prompts) : default_prompts(bench);
  const auto outputs = generate_outputs(model, adapters, prompts, sampling, seed, max_prompt);
  if (a.outputs) write_outputs(output_path(*a.outputs), prompts, outputs);

  const auto judge = eval::make_judge(a.judge);
  const auto rules = a.keywords ? eval::load_keywords(*a.keywords) : eval::default_keywords();
  eval::BenchmarkScore score;
  score.benchmark = bench;
  score.scale = eval::scale_for(bench);
  score.value = score_outputs(bench, prompts, outputs, *judge, rules);
  if (a.method) {
    score.method = eval::parse_score_method(*a.method);
  } else {
    score.method = tuned && a.run_dir ? score_method(cfg) : eval::ScoreMethod::kBase;
  }
  if (score.method != eval::ScoreMethod::kBase) {
    if (a.aggregator) {
      score.aggregator = *a.aggregator;
    } else if (a.run_dir) {
      score.aggregator = std::string(fed::display_name(cfg.aggregator));
    } else {
      throw InvalidConfig("--aggregator is required to label a fine-tuned score");
    }
  }
  score.validate();

  out << eval::to_string(bench) << ' ' << eval::to_string(score.method);
  if (score.aggregator) out << ' ' << *score.aggregator;
  out << ' ' << score.value
      << (bench == eval::Benchmark::kAdvBench ? " (refusal %)" : " (mean judge score /10)")
      << '\n';
  if (a.scores) {
    const auto path = output_path(*a.scores);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream s(path, std::ios::binary | std::ios::app);
    if (!s) throw IoError("cannot write " + path.string());
    eval::write_scores(s, {score});
  }
  return 0;
}

// --- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> benchmarks;
  std::string format = "text";
  std::optional<std::string> json_out;
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<eval::Benchmark> keep;
  for (const auto& b : a.benchmarks) keep.push_back(eval::parse_benchmark(b));
  std::vector<eval::BenchmarkScore> scores;
  for (const auto& path : a.inputs) {
    for (auto& s : eval::load_scores(path)) {
      if (keep.empty() || std::find(keep.begin(), keep.end(), s.benchmark) != keep.end()) {
        scores.push_back(std::move(s));
      }
    }
  }
  const auto report = eval::build_report(scores);
  if (report.empty()) err << "warning: no scores to report\n";
  const auto json = eval::render_json(report);
  if (a.json_out) {
    const auto path = output_path(*a.json_out);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << json.dump(2) << '\n';
    if (!f) throw IoError("cannot write " + path.string());
  }
  if (a.format == "json") {
    out << json.dump(2) << '\n';
  } else {
    out << eval::render_text(report);
  }
  return 0;
}

// --- inspect-checkpoint ---------------------------------------------------

int cmd_inspect(const std::string& path, bool as_json, std::ostream& out) {
  const auto info = io::inspect(path);
  const auto j = io::to_json(info);
  if (as_json) {
    out << j.dump(2) << '\n';
    return 0;
  }
  out << "kind:        " << j["kind"].get<std::string>() << '\n'
      << "layout_id:   " << info.layout_id << '\n'
      << "dims:        vocab " << info.dims.vocab_size << ", context " << info.dims.context_len
      << ", embed " << info.dims.embed_dim << ", hidden " << info.dims.hidden_dim << ", layers "
      << info.dims.n_layers << '\n'
      << "lora:        rank " << info.lora.rank << ", alpha " << info.lora.alpha << '\n'
      << "vocab_hash:  " << io::vocab_hash_hex(info.vocab_hash) << '\n'
      << "values:      " << info.value_count << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated preference optimization (DPO/KTO over LoRA adapters)", "fpref"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fpref 0.1.0");

  PrepareArgs prepare;
  auto* prepare_cmd = app.add_subcommand("prepare-data", "split pairs into feedback examples");
  prepare_cmd->add_option("input", prepare.input, "pairs JSONL")->required();
  prepare_cmd->add_option("--out", prepare.out, "feedback JSONL to write")->required();
  prepare_cmd->add_flag("--redistribute", prepare.redistribute,
                        "also write a seeded redistribution across clients");
  prepare_cmd->add_option("--seed", prepare.seed, "redistribution seed")->capture_default_str();
  prepare_cmd->add_option("--redistributed-out", prepare.redistributed_out,
                          "default: <out>.redistributed.jsonl");

  data::SyntheticCorpusSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth-data", "write a synthetic marker-token corpus");
  synth_cmd->add_option("--out", synth_out, "pairs JSONL to write")->required();
  synth_cmd->add_option("--clients", synth.clients)->capture_default_str();
  synth_cmd->add_option("--min-pairs", synth.min_pairs_per_client)->capture_default_str();
  synth_cmd->add_option("--max-pairs", synth.max_pairs_per_client)->capture_default_str();
  synth_cmd->add_option("--marker", synth.marker)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();

  RunFlags pretrain_flags;
  auto* pretrain_cmd = app.add_subcommand("pretrain-base", "pretrain and save a base model");
  pretrain_flags.add_to(*pretrain_cmd, false);

  RunFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "run federated preference training");
  train_flags.add_to(*train_cmd, true);

  MatrixArgs matrix;
  auto* matrix_cmd = app.add_subcommand("matrix", "run the 3 x 7 method/aggregator matrix");
  matrix.flags.add_to(*matrix_cmd, false);
  matrix_cmd->add_option("--only-agg", matrix.aggregators, "restrict to these aggregators");
  matrix_cmd->add_option("--benchmarks", matrix.benchmarks, "mtbench1, vicuna, advbench")
      ->delimiter(',');
  matrix_cmd->add_option("--prompt-dir", matrix.prompt_dir,
                         "directory with mtbench1.txt, vicuna.txt, advbench.txt");
  matrix_cmd->add_option("--keywords", matrix.keywords, "refusal keyword file");
  matrix_cmd->add_option("--judge", matrix.judge)->capture_default_str();
  matrix_cmd->add_option("--slots", matrix.slots, "cells trained concurrently")
      ->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "generate outputs and score one benchmark");
  eval_cmd->add_option("--run", ev.run_dir, "train output directory");
  eval_cmd->add_option("--base", ev.base, "base checkpoint");
  eval_cmd->add_option("--adapters", ev.adapters, "adapter checkpoint (omit for the base model)");
  eval_cmd->add_option("--benchmark", ev.benchmark, "mtbench1 | vicuna | advbench")->required();
  eval_cmd->add_option("--prompts", ev.prompts, "one prompt per line");
  eval_cmd->add_option("--judge", ev.judge)->capture_default_str();
  eval_cmd->add_option("--keywords", ev.keywords, "refusal keyword file");
  eval_cmd->add_option("--method", ev.method, "score label: DPO | KTOO | KTOR | Base");
  eval_cmd->add_option("--aggregator", ev.aggregator, "score label");
  eval_cmd->add_option("--seed", ev.seed);
  eval_cmd->add_option("--max-len", ev.max_len);
  eval_cmd->add_option("--max-prompt-tokens", ev.max_prompt_tokens);
  eval_cmd->add_option("--temperature", ev.temperature, "<= 0 for greedy decoding");
  eval_cmd->add_option("--outputs", ev.outputs, "write generated outputs as JSONL");
  eval_cmd->add_option("--scores", ev.scores, "append the score record to this JSONL");

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "render a score table");
  report_cmd->add_option("scores", rep.inputs, "score JSONL files")->required();
  report_cmd->add_option("--benchmark", rep.benchmarks, "keep only these benchmarks");
  report_cmd->add_option("--format", rep.format)
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
  report_cmd->add_option("--json", rep.json_out, "also write the JSON report here");

  std::string ckpt;
  bool ckpt_json = false;
  auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "print a checkpoint header");
  inspect_cmd->add_option("path", ckpt)->required();
  inspect_cmd->add_flag("--json", ckpt_json);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (prepare_cmd->parsed()) return cmd_prepare(prepare, out);
    if (synth_cmd->parsed()) return cmd_synth(synth, synth_out, out);
    if (pretrain_cmd->parsed()) return cmd_pretrain(pretrain_flags, out);
    if (train_cmd->parsed()) return cmd_train(train_flags, out);
    if (matrix_cmd->parsed()) return cmd_matrix(matrix, out, err);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (report_cmd->parsed()) return cmd_report(rep, out, err);
    if (inspect_cmd->parsed()) return cmd_inspect(ckpt, ckpt_json, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace fpref::cli
