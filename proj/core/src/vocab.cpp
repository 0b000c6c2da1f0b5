#include "fpref/model/vocab.hpp"

#include <cctype>
#include <set>

#include "fpref/core/error.hpp"
#include "fpref/core/rng.hpp"

namespace fpref::model {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

Vocab::Vocab()
    : Vocab(std::vector<std::string>{std::string(kBosText), std::string(kEosText),
                                     std::string(kUnkText)}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 3 || tokens_[kBos] != kBosText ||
      tokens_[kEos] != kEosText || tokens_[kUnk] != kUnkText) {
    throw InvalidArgument("vocab must start with <bos>, <eos>, <unk>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw InvalidArgument("duplicate vocab token '" + tokens_[i] + "'");
    }
  }
}

Vocab Vocab::build(std::span<const std::string> texts) {
  std::set<std::string> words;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) words.insert(std::move(w));
  }
  std::vector<std::string> tokens{std::string(kBosText), std::string(kEosText),
                                  std::string(kUnkText)};
  for (const auto& w : words) {
    if (w != kBosText && w != kEosText && w != kUnkText) tokens.push_back(w);
  }
  return Vocab(std::move(tokens));
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw OutOfVocabToken("id " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view word) const {
  return index_.find(std::string(word)) != index_.end();
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) {
    auto it = index_.find(w);
    if (it == index_.end()) throw OutOfVocabToken(w);
    ids.push_back(it->second);
  }
  return ids;
}

std::vector<TokenId> Vocab::encode_lossy(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) {
    auto it = index_.find(w);
    ids.push_back(it == index_.end() ? kUnk : it->second);
  }
  return ids;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kBos || id == kEos || id == kUnk) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

std::uint64_t Vocab::fingerprint() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

}  // namespace fpref::model
