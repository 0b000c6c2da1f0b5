#include "fpref/cli/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fpref/cli/pipeline.hpp"
#include "fpref/core/error.hpp"
#include "fpref/data/synthetic.hpp"
#include "fpref/io/checkpoint.hpp"

namespace fpref::cli {
namespace {

struct CellPlan {
  fed::RunConfig cfg;
  std::string name;
  bool selected = true;
};

struct CellResult {
  MatrixCell cell;
  std::vector<eval::BenchmarkScore> scores;
  std::string log;
};

std::string bench_file_stem(eval::Benchmark b) {
  switch (b) {
    case eval::Benchmark::kMtBench1: return "mtbench1";
    case eval::Benchmark::kVicuna: return "vicuna";
    case eval::Benchmark::kAdvBench: return "advbench";
  }
  return "unknown";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

MatrixResult run_matrix(const MatrixOptions& opts, std::ostream& log) {
  const fs::path out = output_path(opts.out_dir);
  fs::create_directories(out);
  fed::RunConfig base_cfg = opts.base;

  fed::FederatedData raw;
  if (base_cfg.paths.data.empty()) {
    const auto corpus = data::make_marker_corpus(data::SyntheticCorpusSpec{});
    fs::create_directories(out / "data");
    const auto path = out / "data" / "pairs.jsonl";
    data::write_pairs(corpus, path);
    base_cfg.paths.data = path.string();
    log << "no --data given; wrote synthetic corpus to " << path.string() << '\n';
    raw = corpus;
  } else {
    raw = load_records(base_cfg.paths.data);
  }

  const auto judge = eval::make_judge(opts.judge);
  const auto rules = opts.keywords ? eval::load_keywords(opts.keywords->string())
                                   : eval::default_keywords();
  std::map<eval::Benchmark, std::vector<std::string>> prompts;
  for (auto b : opts.benchmarks) {
    const auto file = opts.prompt_dir ? *opts.prompt_dir / (bench_file_stem(b) + ".txt") : fs::path();
    prompts[b] = opts.prompt_dir && fs::exists(file) ? load_prompts(file) : default_prompts(b);
  }

  const auto model = resolve_base_model(base_cfg, raw);
  io::save_base((out / "base.ckpt").string(), model);
  base_cfg.paths.base_model = (out / "base.ckpt").string();
  log << "base model: vocab " << model.vocab().size() << ", " << model.weights().size()
      << " frozen weights, " << model.adapter_size() << " adapter parameters\n";

  const auto max_prompt = static_cast<std::size_t>(base_cfg.model.max_prompt_tokens);
  MatrixResult result;
  {
    const auto zero = model.zero_adapters();
    for (auto b : opts.benchmarks) {
      const auto outputs = generate_outputs(model, zero, prompts[b], base_cfg.sampling,
                                            base_cfg.root_seed, max_prompt);
      write_outputs(out / ("base-outputs-" + bench_file_stem(b) + ".jsonl"), prompts[b], outputs);
      eval::BenchmarkScore s{b, eval::ScoreMethod::kBase, std::nullopt,
                             score_outputs(b, prompts[b], outputs, *judge, rules),
                             eval::scale_for(b)};
      result.scores.push_back(s);
    }
  }

  std::vector<CellPlan> plan;
  const std::pair<fed::Method, fed::DataMode> variants[] = {
      {fed::Method::kDpo, fed::DataMode::kOriginal},
      {fed::Method::kKto, fed::DataMode::kOriginal},
      {fed::Method::kKto, fed::DataMode::kRedistributed}};
  for (const auto& [method, mode] : variants) {
    for (auto agg : fed::kAllAggregators) {
      CellPlan p;
      p.cfg = base_cfg;
      p.cfg.method = method;
      p.cfg.data_mode = mode;
      p.cfg.aggregator = agg;
      p.name = run_name(p.cfg);
      p.selected = opts.aggregators.empty() ||
                   std::find(opts.aggregators.begin(), opts.aggregators.end(), agg) !=
                       opts.aggregators.end();
      plan.push_back(std::move(p));
    }
  }

  std::vector<CellResult> results(plan.size());
  auto run_cell = [&](std::size_t i) {
    const auto& p = plan[i];
    auto& r = results[i];
    r.cell.name = p.name;
    if (!p.selected) {
      r.cell.status = "skipped";
      r.cell.detail = "aggregator not selected";
      return;
    }
    const auto dir = out / p.name;
    std::ostringstream cell_log;
    try {
      const auto outcome = train_to_dir(p.cfg, model, raw, dir, cell_log);
      for (auto b : opts.benchmarks) {
        const auto outputs = generate_outputs(model, outcome.artifacts.final_adapters, prompts.at(b),
                                              p.cfg.sampling, p.cfg.root_seed, max_prompt);
        write_outputs(dir / ("outputs-" + bench_file_stem(b) + ".jsonl"), prompts.at(b), outputs);
        r.scores.push_back(eval::BenchmarkScore{
            b, score_method(p.cfg), std::string(fed::display_name(p.cfg.aggregator)),
            score_outputs(b, prompts.at(b), outputs, *judge, rules), eval::scale_for(b)});
      }
      r.cell.status = "ok";
      const auto& last = outcome.artifacts.metrics.back();
      std::ostringstream d;
      d << "rounds " << last.round << ", final probe_loss " << last.probe_loss;
      r.cell.detail = d.str();
    } catch (const std::exception& e) {
      r.cell.status = "failed";
      r.cell.detail = e.what();
      r.scores.clear();
      fs::create_directories(dir);
      cell_log << "error: " << e.what() << '\n';
    }
    r.log = cell_log.str();
    write_text(dir / "train.log", r.log);
  };

  const auto slots = static_cast<std::size_t>(std::max(1, opts.slots));
  if (slots == 1) {
    for (std::size_t i = 0; i < plan.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(slots, plan.size()); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < plan.size(); i = next++) run_cell(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  nlohmann::ordered_json manifest;
  manifest["cells"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& r = results[i];
    log << r.cell.name << ": " << r.cell.status;
    if (!r.cell.detail.empty()) log << " (" << r.cell.detail << ")";
    log << '\n';
    nlohmann::ordered_json c;
    c["name"] = r.cell.name;
    c["method"] = eval::to_string(score_method(plan[i].cfg));
    c["aggregator"] = fed::display_name(plan[i].cfg.aggregator);
    c["status"] = r.cell.status;
    c["detail"] = r.cell.detail;
    manifest["cells"].push_back(std::move(c));
    result.cells.push_back(r.cell);
    result.scores.insert(result.scores.end(), r.scores.begin(), r.scores.end());
  }
  write_text(out / "matrix.json", manifest.dump(2) + "\n");

  {
    std::ofstream s(out / "scores.jsonl", std::ios::binary | std::ios::trunc);
    eval::write_scores(s, result.scores);
    if (!s) throw IoError("cannot write " + (out / "scores.jsonl").string());
  }
  result.report = eval::build_report(result.scores);
  write_text(out / "report.txt", eval::render_text(result.report));
  write_text(out / "report.json", eval::render_json(result.report).dump(2) + "\n");
  return result;
}

}  // namespace fpref::cli
