#include "fpref/eval/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fpref/core/error.hpp"
#include "fpref/eval/safety.hpp"

namespace fpref::eval {
namespace {

constexpr std::array<std::string_view, 7> kAggregatorOrder = {
    "FedAvg", "FedProx", "SCAFFOLD", "FedAvgM", "FedYogi", "FedAdagrad", "FedAdam"};
constexpr std::array<ScoreMethod, 3> kTunedMethods = {ScoreMethod::kDpo, ScoreMethod::kKtoo,
                                                      ScoreMethod::kKtor};
constexpr std::array<Benchmark, 3> kBenchmarks = {Benchmark::kMtBench1, Benchmark::kVicuna,
                                                  Benchmark::kAdvBench};

std::string alnum_lower(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if ((ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'z')) out.push_back(ch);
    if (ch >= 'A' && ch <= 'Z') out.push_back(static_cast<char>(ch - 'A' + 'a'));
  }
  return out;
}

std::size_t aggregator_rank(const std::string& name) {
  const auto folded = fold_case(name);
  for (std::size_t i = 0; i < kAggregatorOrder.size(); ++i) {
    if (fold_case(std::string(kAggregatorOrder[i])) == folded) return i;
  }
  return kAggregatorOrder.size();
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string_view to_string(Benchmark b) noexcept {
  switch (b) {
    case Benchmark::kMtBench1: return "MT-Bench-1";
    case Benchmark::kVicuna: return "Vicuna";
    case Benchmark::kAdvBench: return "AdvBench";
  }
  return "?";
}

std::string_view to_string(ScoreMethod m) noexcept {
  switch (m) {
    case ScoreMethod::kDpo: return "DPO";
    case ScoreMethod::kKtoo: return "KTOO";
    case ScoreMethod::kKtor: return "KTOR";
    case ScoreMethod::kBase: return "Base";
  }
  return "?";
}

std::string_view to_string(Scale s) noexcept {
  return s == Scale::kOutOf10 ? "out_of_10" : "out_of_100";
}

Benchmark parse_benchmark(std::string_view s) {
  const auto k = alnum_lower(s);
  if (k == "mtbench1" || k == "mtbench") return Benchmark::kMtBench1;
  if (k == "vicuna") return Benchmark::kVicuna;
  if (k == "advbench") return Benchmark::kAdvBench;
  throw InvalidArgument("unknown benchmark: " + std::string(s));
}

ScoreMethod parse_score_method(std::string_view s) {
  const auto k = alnum_lower(s);
  if (k == "dpo") return ScoreMethod::kDpo;
  if (k == "ktoo") return ScoreMethod::kKtoo;
  if (k == "ktor") return ScoreMethod::kKtor;
  if (k == "base") return ScoreMethod::kBase;
  throw InvalidArgument("unknown method: " + std::string(s));
}

Scale parse_scale(std::string_view s) {
  const auto k = alnum_lower(s);
  if (k == "outof10") return Scale::kOutOf10;
  if (k == "outof100") return Scale::kOutOf100;
  throw InvalidArgument("unknown scale: " + std::string(s));
}

Scale scale_for(Benchmark b) noexcept {
  return b == Benchmark::kAdvBench ? Scale::kOutOf100 : Scale::kOutOf10;
}

void BenchmarkScore::validate() const {
  if (scale != scale_for(benchmark)) {
    throw InvalidArgument(std::string(to_string(benchmark)) + " is scored " +
                          std::string(to_string(scale_for(benchmark))));
  }
  const double hi = scale == Scale::kOutOf10 ? 10.0 : 100.0;
  if (!(value >= 0.0 && value <= hi)) {
    throw InvalidArgument(std::string(to_string(benchmark)) + " score " +
                          std::to_string(value) + " outside [0, " + format_value(hi) + "]");
  }
}

Report build_report(const std::vector<BenchmarkScore>& scores) {
  Report report;
  // (rank, name) keeps known aggregators in table order.
  std::map<std::pair<std::size_t, std::string>, std::map<Benchmark, ReportCell>> groups;
  for (const auto& s : scores) {
    s.validate();
    if (s.method == ScoreMethod::kBase) {
      if (!report.base.emplace(s.benchmark, s.value).second) {
        throw DuplicateCell("Base/" + std::string(to_string(s.benchmark)));
      }
      continue;
    }
    if (!s.aggregator || s.aggregator->empty()) {
      throw InvalidArgument(std::string(to_string(s.method)) + " score without aggregator");
    }
    auto& cell = groups[{aggregator_rank(*s.aggregator), *s.aggregator}][s.benchmark];
    cell.aggregator = *s.aggregator;
    cell.benchmark = s.benchmark;
    if (!cell.scores.emplace(s.method, s.value).second) {
      throw DuplicateCell(*s.aggregator + "/" + std::string(to_string(s.benchmark)) + "/" +
                          std::string(to_string(s.method)));
    }
  }
  for (auto& [key, by_bench] : groups) {
    for (auto& [bench, cell] : by_bench) {
      double best = cell.scores.begin()->second;
      for (const auto& [m, v] : cell.scores) best = std::max(best, v);
      for (const auto& [m, v] : cell.scores) {
        if (v == best) cell.best.push_back(m);
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::string render_text(const Report& report) {
  if (report.empty()) return "(no scores)\n";

  std::set<Benchmark> present;
  for (const auto& c : report.cells) present.insert(c.benchmark);
  for (const auto& [b, v] : report.base) present.insert(b);
  std::vector<Benchmark> benches;
  for (auto b : kBenchmarks) {
    if (present.count(b)) benches.push_back(b);
  }

  // Header rows, then one row per aggregator, then the base row.
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> h1{""}, h2{"Aggregator"};
  for (auto b : benches) {
    for (std::size_t i = 0; i < kTunedMethods.size(); ++i) {
      h1.push_back(i == 0 ? std::string(to_string(b)) +
                                (scale_for(b) == Scale::kOutOf10 ? " (/10)" : " (/100)")
                          : "");
      h2.emplace_back(to_string(kTunedMethods[i]));
    }
  }
  rows.push_back(h1);
  rows.push_back(h2);

  std::vector<std::string> order;
  for (const auto& c : report.cells) {
    if (order.empty() || order.back() != c.aggregator) order.push_back(c.aggregator);
  }
  for (const auto& agg : order) {
    std::vector<std::string> row{agg};
    for (auto b : benches) {
      const ReportCell* cell = nullptr;
      for (const auto& c : report.cells) {
        if (c.aggregator == agg && c.benchmark == b) cell = &c;
      }
      for (auto m : kTunedMethods) {
        if (!cell || !cell->scores.count(m)) {
          row.emplace_back("-");
          continue;
        }
        auto s = format_value(cell->scores.at(m));
        if (std::find(cell->best.begin(), cell->best.end(), m) != cell->best.end()) s += "*";
        row.push_back(std::move(s));
      }
    }
    rows.push_back(std::move(row));
  }
  if (!report.base.empty()) {
    std::vector<std::string> row{"Base"};
    for (auto b : benches) {
      auto it = report.base.find(b);
      row.push_back(it == report.base.end() ? "-" : format_value(it->second));
      for (std::size_t i = 1; i < kTunedMethods.size(); ++i) row.emplace_back("");
    }
    rows.push_back(std::move(row));
  }

  // Column widths come from every row but the first; each benchmark title
  // spans its method columns and widens the last one if it does not fit.
  const std::size_t group = kTunedMethods.size();
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      width[i] = std::max(width[i], rows[r][i].size());
    }
  }
  auto span = [&](std::size_t first) {
    std::size_t w = 2 * (group - 1);
    for (std::size_t i = first; i < first + group; ++i) w += width[i];
    return w;
  };
  for (std::size_t first = 1; first < width.size(); first += group) {
    const std::size_t need = rows[0][first].size();
    if (need > span(first)) width[first + group - 1] += need - span(first);
  }

  std::ostringstream out;
  {
    std::string line(width[0], ' ');
    for (std::size_t first = 1; first < width.size(); first += group) {
      line += "  " + rows[0][first];
      line.append(span(first) - rows[0][first].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) line += "  ";
      line += row[i];
      line.append(width[i] - row[i].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  return out.str();
}

nlohmann::ordered_json render_json(const Report& report) {
  nlohmann::ordered_json j;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    nlohmann::ordered_json cell;
    cell["aggregator"] = c.aggregator;
    cell["benchmark"] = to_string(c.benchmark);
    cell["scores"] = nlohmann::ordered_json::object();
    for (const auto& [m, v] : c.scores) cell["scores"][std::string(to_string(m))] = v;
    cell["best"] = nlohmann::ordered_json::array();
    for (auto m : c.best) cell["best"].push_back(to_string(m));
    j["cells"].push_back(std::move(cell));
  }
  j["base"] = nlohmann::ordered_json::object();
  for (const auto& [b, v] : report.base) j["base"][std::string(to_string(b))] = v;
  return j;
}

nlohmann::ordered_json to_json(const BenchmarkScore& s) {
  nlohmann::ordered_json j;
  j["benchmark"] = to_string(s.benchmark);
  j["method"] = to_string(s.method);
  if (s.aggregator) {
    j["aggregator"] = *s.aggregator;
  } else {
    j["aggregator"] = nullptr;
  }
  j["value"] = s.value;
  j["scale"] = to_string(s.scale);
  return j;
}

BenchmarkScore score_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("score record is not an object");
  BenchmarkScore s;
  s.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
  s.method = parse_score_method(j.at("method").get<std::string>());
  if (j.contains("aggregator") && !j.at("aggregator").is_null()) {
    s.aggregator = j.at("aggregator").get<std::string>();
  }
  s.value = j.at("value").get<double>();
  s.scale = j.contains("scale") ? parse_scale(j.at("scale").get<std::string>())
                                : scale_for(s.benchmark);
  s.validate();
  return s;
}

std::vector<BenchmarkScore> parse_scores(std::istream& in) {
  std::vector<BenchmarkScore> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(score_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

std::vector<BenchmarkScore> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scores file: " + path);
  return parse_scores(in);
}

void write_scores(std::ostream& out, const std::vector<BenchmarkScore>& scores) {
  for (const auto& s : scores) out << to_json(s).dump() << '\n';
}

}  // namespace fpref::eval
