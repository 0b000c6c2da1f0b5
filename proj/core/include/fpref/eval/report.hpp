#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace fpref::eval {

enum class Benchmark { kMtBench1, kVicuna, kAdvBench };
enum class ScoreMethod { kDpo, kKtoo, kKtor, kBase };
enum class Scale { kOutOf10, kOutOf100 };

std::string_view to_string(Benchmark b) noexcept;    // "MT-Bench-1", "Vicuna", "AdvBench"
std::string_view to_string(ScoreMethod m) noexcept;  // "DPO", "KTOO", "KTOR", "Base"
std::string_view to_string(Scale s) noexcept;        // "out_of_10", "out_of_100"
// Case-insensitive; punctuation in benchmark names is ignored ("mtbench1").
// Throw InvalidArgument on unknown names.
Benchmark parse_benchmark(std::string_view s);
ScoreMethod parse_score_method(std::string_view s);
Scale parse_scale(std::string_view s);
Scale scale_for(Benchmark b) noexcept;

struct BenchmarkScore {
  Benchmark benchmark = Benchmark::kMtBench1;
  ScoreMethod method = ScoreMethod::kBase;
  std::optional<std::string> aggregator;  // absent for the base model
  double value = 0.0;
  Scale scale = Scale::kOutOf10;

  // Throws InvalidArgument when the value is outside the scale's range or the
  // scale does not fit the benchmark.
  void validate() const;
  bool operator==(const BenchmarkScore&) const = default;
};

struct ReportCell {
  std::string aggregator;
  Benchmark benchmark = Benchmark::kMtBench1;
  std::map<ScoreMethod, double> scores;
  std::vector<ScoreMethod> best;  // every method attaining the maximum
};

struct Report {
  std::vector<ReportCell> cells;      // aggregator-major, benchmark-minor
  std::map<Benchmark, double> base;   // base-model row
  bool empty() const noexcept { return cells.empty() && base.empty(); }
};

// Groups scores by (aggregator, benchmark) and marks the argmax methods.
// Aggregators are ordered FedAvg, FedProx, SCAFFOLD, FedAvgM, FedYogi,
// FedAdagrad, FedAdam, then any others alphabetically. Throws DuplicateCell
// when a method appears twice in one group (or the base model twice for one
// benchmark), InvalidArgument when a fine-tuned score lacks an aggregator.
Report build_report(const std::vector<BenchmarkScore>& scores);

// Aligned text table; best values carry a trailing '*'.
std::string render_text(const Report& report);
nlohmann::ordered_json render_json(const Report& report);

nlohmann::ordered_json to_json(const BenchmarkScore& s);
BenchmarkScore score_from_json(const nlohmann::json& j);
// One score per line; blank lines skipped. ParseError carries the line.
std::vector<BenchmarkScore> parse_scores(std::istream& in);
std::vector<BenchmarkScore> load_scores(const std::string& path);
void write_scores(std::ostream& out, const std::vector<BenchmarkScore>& scores);

}  // namespace fpref::eval
