#include "fpref/data/synthetic.hpp"

#include <array>
#include <sstream>
#include <string_view>
#include <vector>

#include "fpref/core/error.hpp"
#include "fpref/core/rng.hpp"

namespace fpref::data {
namespace {

constexpr std::array<std::string_view, 8> kTopics = {
    "apples", "rivers", "stars", "trains", "music", "gardens", "bridges", "clouds"};
constexpr std::array<std::string_view, 4> kAsks = {
    "tell me about", "what do you know about", "explain", "describe"};
constexpr std::array<std::string_view, 6> kOpeners = {
    "here is a short note on", "a quick fact about", "some thoughts on",
    "the basics of", "one idea about", "a summary of"};
constexpr std::array<std::string_view, 5> kClosers = {
    "is interesting", "can be simple", "matters to many people",
    "has a long history", "is worth learning"};

std::string_view pick(RngStream& rng, auto const& options) {
  return options[rng.next_below(options.size())];
}

}  // namespace

FederatedPairDataset make_marker_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.clients == 0 || spec.min_pairs_per_client == 0 ||
      spec.max_pairs_per_client < spec.min_pairs_per_client) {
    throw InvalidArgument("make_marker_corpus: bad client or pair counts");
  }
  if (spec.marker.empty() || spec.marker.find(' ') != std::string::npos) {
    throw InvalidArgument("make_marker_corpus: marker must be a single word");
  }

  RngStream root(spec.seed);
  FederatedPairDataset out;
  std::size_t source_index = 0;
  for (std::size_t c = 0; c < spec.clients; ++c) {
    auto rng = root.derive("synthetic-client", static_cast<std::int64_t>(c));
    std::ostringstream id;
    id << "client" << (c < 10 ? "0" : "") << c;
    std::size_t span = spec.max_pairs_per_client - spec.min_pairs_per_client + 1;
    std::size_t n = spec.min_pairs_per_client + rng.next_below(span);
    for (std::size_t i = 0; i < n; ++i) {
      // Each client mostly sees three neighbouring topics.
      std::string_view topic = kTopics[(c * 2 + rng.next_below(3)) % kTopics.size()];

      std::vector<std::string> words;
      auto push_words = [&words](std::string_view text) {
        std::istringstream is{std::string(text)};
        std::string w;
        while (is >> w) words.push_back(w);
      };
      push_words(pick(rng, kOpeners));
      words.emplace_back(topic);
      push_words(pick(rng, kClosers));

      std::ostringstream rejected;
      std::ostringstream chosen;
      std::size_t insert_at = rng.next_below(words.size() + 1);
      for (std::size_t w = 0; w <= words.size(); ++w) {
        if (w == insert_at) chosen << (w ? " " : "") << spec.marker;
        if (w == words.size()) break;
        bool lead = w > 0 || insert_at == 0;
        chosen << (lead ? " " : "") << words[w];
        rejected << (w ? " " : "") << words[w];
      }

      PreferencePair p;
      p.prompt = std::string(pick(rng, kAsks)) + " " + std::string(topic);
      p.chosen = chosen.str();
      p.rejected = rejected.str();
      p.client_id = id.str();
      p.source_index = source_index++;
      out.clients[p.client_id].push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace fpref::data
