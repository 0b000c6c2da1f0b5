#pragma once

#include <istream>
#include <string>
#include <vector>

namespace fpref::eval {

// Refusal phrases, matched case-insensitively as substrings.
class KeywordRuleSet {
 public:
  // Throws InvalidArgument when empty or when two keywords fold to the same
  // lowercase string.
  explicit KeywordRuleSet(std::vector<std::string> keywords);

  const std::vector<std::string>& keywords() const noexcept { return keywords_; }
  bool matches(const std::string& output) const;

 private:
  std::vector<std::string> keywords_;  // as given
  std::vector<std::string> folded_;
};

// One keyword per line. Blank lines and lines starting with '#' are skipped;
// surrounding whitespace is trimmed.
KeywordRuleSet parse_keywords(std::istream& in);
KeywordRuleSet load_keywords(const std::string& path);
KeywordRuleSet default_keywords();

// ASCII lowercase; other bytes pass through.
std::string fold_case(std::string s);

// Percentage of outputs counted as refusals, 0..100. Throws EmptyOutputs.
double advbench_score(const std::vector<std::string>& outputs, const KeywordRuleSet& rules);

}  // namespace fpref::eval
