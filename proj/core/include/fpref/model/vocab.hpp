#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fpref::model {

using TokenId = std::int32_t;

// Whitespace-delimited word vocabulary. Ids 0..2 are reserved for the
// sequence-start, end-of-sequence and unknown markers; corpus words follow in
// lexicographic order. decode(encode(t)) == t for any in-vocab text whose
// words are separated by single spaces.
class Vocab {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr std::string_view kBosText = "<bos>";
  static constexpr std::string_view kEosText = "<eos>";
  static constexpr std::string_view kUnkText = "<unk>";

  Vocab();
  // Throws InvalidArgument if the reserved tokens are missing or any token
  // repeats.
  explicit Vocab(std::vector<std::string> tokens);

  static Vocab build(std::span<const std::string> texts);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const;
  bool contains(std::string_view word) const;

  // Strict: throws OutOfVocabToken for unknown words.
  std::vector<TokenId> encode(std::string_view text) const;
  // Unknown words map to kUnk.
  std::vector<TokenId> encode_lossy(std::string_view text) const;
  // Reserved tokens are dropped from the output.
  std::string decode(std::span<const TokenId> ids) const;

  // FNV-1a over the newline-joined token list.
  std::uint64_t fingerprint() const noexcept;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

std::vector<std::string> split_words(std::string_view text);

}  // namespace fpref::model
