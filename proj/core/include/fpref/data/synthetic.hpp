#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "fpref/data/dataset.hpp"

namespace fpref::data {

// A small word-level preference corpus with a planted signal: every chosen
// response carries `marker` at a random position, and the rejected response
// is the same sentence without it. Clients draw topics from overlapping,
// client-specific subsets so the allocation is non-IID.
struct SyntheticCorpusSpec {
  std::size_t clients = 4;
  std::size_t min_pairs_per_client = 6;
  std::size_t max_pairs_per_client = 12;
  std::string marker = "certainly";
  std::uint64_t seed = 7;
};

FederatedPairDataset make_marker_corpus(const SyntheticCorpusSpec& spec);

}  // namespace fpref::data
