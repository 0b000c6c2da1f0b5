#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fpref/eval/report.hpp"
#include "fpref/federation/run_config.hpp"

namespace fpref::cli {

struct MatrixOptions {
  fed::RunConfig base;                  // method/data_mode/aggregator are overridden per cell
  std::filesystem::path out_dir;
  std::vector<fed::AggregatorKind> aggregators;  // empty: all seven
  std::vector<eval::Benchmark> benchmarks = {eval::Benchmark::kMtBench1,
                                             eval::Benchmark::kVicuna,
                                             eval::Benchmark::kAdvBench};
  std::optional<std::filesystem::path> prompt_dir;  // <dir>/{mtbench1,vicuna,advbench}.txt
  std::optional<std::filesystem::path> keywords;
  std::string judge = "mock";
  int slots = 1;  // cells trained concurrently
};

struct MatrixCell {
  std::string name;
  std::string status;  // "ok", "skipped" or "failed"
  std::string detail;
};

struct MatrixResult {
  std::vector<MatrixCell> cells;  // all 21, in enumeration order
  std::vector<eval::BenchmarkScore> scores;
  eval::Report report;
};

// DPO x original, KTO x original (KTOO) and KTO x redistributed (KTOR), each
// under the seven aggregators. Writes:
//   <out>/base.ckpt, <out>/<run-name>/..., <out>/matrix.json (one record per
//   cell), <out>/scores.jsonl, <out>/report.txt, <out>/report.json
// A failing cell is recorded and the matrix continues.
MatrixResult run_matrix(const MatrixOptions& opts, std::ostream& log);

}  // namespace fpref::cli
