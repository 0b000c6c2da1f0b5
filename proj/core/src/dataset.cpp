#include "fpref/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fpref/core/error.hpp"
#include "fpref/core/rng.hpp"

namespace fpref::data {
namespace {

using nlohmann::json;

std::string require_string(const json& obj, const char* field, std::size_t line,
                           bool nonempty) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ParseError(line, std::string("missing field '") + field + "'");
  }
  if (!it->is_string()) {
    throw ParseError(line, std::string("field '") + field + "' is not a string");
  }
  auto value = it->get<std::string>();
  if (nonempty && value.empty()) {
    throw ParseError(line, std::string("field '") + field + "' is empty");
  }
  return value;
}

// Calls fn(object, line_index) for each nonblank line.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn fn) {
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = std::all_of(line.begin(), line.end(),
                             [](unsigned char c) { return std::isspace(c); });
    if (!blank) {
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(index + 1, e.what());
      }
      if (!obj.is_object()) throw ParseError(index + 1, "expected a JSON object");
      fn(obj, index);
    }
    ++index;
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

template <typename Record>
void sort_canonical(std::vector<Record>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const Record& a, const Record& b) {
                     return a.source_index < b.source_index;
                   });
}

}  // namespace

std::size_t FederatedPairDataset::total() const noexcept {
  std::size_t n = 0;
  for (const auto& [id, records] : clients) n += records.size();
  return n;
}

std::size_t FederatedFeedbackDataset::total() const noexcept {
  std::size_t n = 0;
  for (const auto& [id, records] : clients) n += records.size();
  return n;
}

FederatedPairDataset parse_pairs(std::istream& in, const std::string& source) {
  FederatedPairDataset out;
  for_each_json_line(in, [&](const json& obj, std::size_t index) {
    PreferencePair p;
    p.prompt = require_string(obj, "prompt", index + 1, true);
    p.chosen = require_string(obj, "chosen", index + 1, false);
    p.rejected = require_string(obj, "rejected", index + 1, false);
    p.client_id = require_string(obj, "client_id", index + 1, true);
    p.source_index = index;
    out.clients[p.client_id].push_back(std::move(p));
  });
  if (out.total() == 0) throw EmptyDataset(source);
  for (auto& [id, records] : out.clients) sort_canonical(records);
  return out;
}

FederatedPairDataset load_pairs(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_pairs(in, path.string());
}

FederatedFeedbackDataset parse_feedback(std::istream& in,
                                        const std::string& source) {
  FederatedFeedbackDataset out;
  for_each_json_line(in, [&](const json& obj, std::size_t index) {
    FeedbackExample e;
    e.prompt = require_string(obj, "prompt", index + 1, true);
    e.response = require_string(obj, "response", index + 1, false);
    auto label = require_string(obj, "label", index + 1, true);
    try {
      e.label = label_from_string(label);
    } catch (const InvalidArgument&) {
      throw ParseError(index + 1, "label must be \"desirable\" or \"undesirable\"");
    }
    e.client_id = require_string(obj, "client_id", index + 1, true);
    e.source_index = index;
    out.clients[e.client_id].push_back(std::move(e));
  });
  if (out.total() == 0) throw EmptyDataset(source);
  for (auto& [id, records] : out.clients) sort_canonical(records);
  return out;
}

FederatedFeedbackDataset load_feedback(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_feedback(in, path.string());
}

void write_pairs(const FederatedPairDataset& data, std::ostream& out) {
  for (const auto& [id, records] : data.clients) {
    for (const auto& p : records) {
      json obj = {{"prompt", p.prompt},
                  {"chosen", p.chosen},
                  {"rejected", p.rejected},
                  {"client_id", p.client_id}};
      out << obj.dump() << '\n';
    }
  }
}

void write_pairs(const FederatedPairDataset& data,
                 const std::filesystem::path& path) {
  auto out = open_output(path);
  write_pairs(data, out);
  if (!out) throw IoError("write failed: " + path.string());
}

void write_feedback(const FederatedFeedbackDataset& data, std::ostream& out) {
  for (const auto& [id, records] : data.clients) {
    for (const auto& e : records) {
      json obj = {{"prompt", e.prompt},
                  {"response", e.response},
                  {"label", std::string(to_string(e.label))},
                  {"client_id", e.client_id}};
      out << obj.dump() << '\n';
    }
  }
}

void write_feedback(const FederatedFeedbackDataset& data,
                    const std::filesystem::path& path) {
  auto out = open_output(path);
  write_feedback(data, out);
  if (!out) throw IoError("write failed: " + path.string());
}

FederatedFeedbackDataset split_pairs(const FederatedPairDataset& pairs) {
  FederatedFeedbackDataset out;
  for (const auto& [id, records] : pairs.clients) {
    auto& dst = out.clients[id];
    dst.reserve(records.size() * 2);
    for (const auto& p : records) {
      dst.push_back({p.prompt, p.chosen, Label::kDesirable, p.client_id,
                     p.source_index});
      dst.push_back({p.prompt, p.rejected, Label::kUndesirable, p.client_id,
                     p.source_index});
    }
  }
  return out;
}

FederatedFeedbackDataset redistribute(const FederatedFeedbackDataset& data,
                                      std::uint64_t seed) {
  std::vector<FeedbackExample> flat;
  flat.reserve(data.total());
  for (const auto& [id, records] : data.clients) {
    flat.insert(flat.end(), records.begin(), records.end());
  }

  auto stream = RngStream(seed).derive("redistribute", 0);
  stream.shuffle(flat);

  FederatedFeedbackDataset out;
  std::size_t cursor = 0;
  for (const auto& [id, records] : data.clients) {
    auto& dst = out.clients[id];
    dst.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      FeedbackExample e = std::move(flat[cursor++]);
      e.client_id = id;
      dst.push_back(std::move(e));
    }
    std::stable_sort(dst.begin(), dst.end(),
                     [](const FeedbackExample& a, const FeedbackExample& b) {
                       if (a.source_index != b.source_index) {
                         return a.source_index < b.source_index;
                       }
                       return a.label == Label::kDesirable &&
                              b.label == Label::kUndesirable;
                     });
  }
  return out;
}

double DatasetStats::desirable_fraction() const noexcept {
  return total == 0 ? 0.0
                    : static_cast<double>(desirable) / static_cast<double>(total);
}

DatasetStats dataset_stats(const FederatedFeedbackDataset& data) {
  DatasetStats stats;
  for (const auto& [id, records] : data.clients) {
    ClientStats c{id, records.size(), 0, 0};
    for (const auto& e : records) {
      (e.label == Label::kDesirable ? c.desirable : c.undesirable) += 1;
    }
    stats.total += c.examples;
    stats.desirable += c.desirable;
    stats.undesirable += c.undesirable;
    stats.clients.push_back(std::move(c));
  }
  return stats;
}

std::string format_stats(const DatasetStats& stats) {
  std::ostringstream os;
  os << "clients: " << stats.clients.size() << "  examples: " << stats.total
     << "  desirable: " << stats.desirable
     << "  undesirable: " << stats.undesirable << '\n';
  for (const auto& c : stats.clients) {
    os << "  " << c.client_id << ": " << c.examples << " (+" << c.desirable
       << " / -" << c.undesirable << ")\n";
  }
  return os.str();
}

}  // namespace fpref::data
