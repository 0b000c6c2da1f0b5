#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fpref/core/types.hpp"

namespace fpref::data {

inline constexpr std::uint64_t kDefaultRedistributeSeed = 2023;

// Clients are keyed by client_id; std::map gives the canonical lexicographic
// client order. Records inside a client are kept sorted by source_index.
struct FederatedPairDataset {
  std::map<std::string, std::vector<PreferencePair>> clients;

  std::size_t total() const noexcept;
  bool operator==(const FederatedPairDataset&) const = default;
};

struct FederatedFeedbackDataset {
  std::map<std::string, std::vector<FeedbackExample>> clients;

  std::size_t total() const noexcept;
  bool operator==(const FederatedFeedbackDataset&) const = default;
};

// JSONL readers. source_index is the 0-based line number; ParseError reports
// the 1-based line. Blank lines are skipped but still count toward numbering.
FederatedPairDataset parse_pairs(std::istream& in, const std::string& source);
FederatedPairDataset load_pairs(const std::filesystem::path& path);
FederatedFeedbackDataset parse_feedback(std::istream& in, const std::string& source);
FederatedFeedbackDataset load_feedback(const std::filesystem::path& path);

// Writers emit records in canonical order, one compact JSON object per line.
void write_pairs(const FederatedPairDataset& data, std::ostream& out);
void write_pairs(const FederatedPairDataset& data, const std::filesystem::path& path);
void write_feedback(const FederatedFeedbackDataset& data, std::ostream& out);
void write_feedback(const FederatedFeedbackDataset& data,
                    const std::filesystem::path& path);

// Each pair becomes (prompt, chosen, desirable) followed by
// (prompt, rejected, undesirable) on the same client.
FederatedFeedbackDataset split_pairs(const FederatedPairDataset& pairs);

// Flattens in canonical order, Fisher-Yates shuffles with the stream
// RngStream(seed).derive("redistribute", 0), then refills clients in
// canonical order with their original counts and rewrites client_id.
// Each refilled client is re-sorted by (source_index, label) to restore the
// canonical in-client order.
FederatedFeedbackDataset redistribute(const FederatedFeedbackDataset& data,
                                      std::uint64_t seed = kDefaultRedistributeSeed);

struct ClientStats {
  std::string client_id;
  std::size_t examples = 0;
  std::size_t desirable = 0;
  std::size_t undesirable = 0;
};

struct DatasetStats {
  std::vector<ClientStats> clients;
  std::size_t total = 0;
  std::size_t desirable = 0;
  std::size_t undesirable = 0;

  // 0 for an empty dataset.
  double desirable_fraction() const noexcept;
};

DatasetStats dataset_stats(const FederatedFeedbackDataset& data);
std::string format_stats(const DatasetStats& stats);

}  // namespace fpref::data
