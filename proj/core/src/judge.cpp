#include "fpref/eval/judge.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "fpref/core/error.hpp"
#include "fpref/core/rng.hpp"

namespace fpref::eval {
namespace {

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isalnum(uc) || ch == '\'') {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

double MockJudge::score(const std::string& question, const std::string& answer) const {
  const auto answer_words = words_of(answer);
  if (answer_words.empty()) return 0.0;

  const double length = static_cast<double>(std::min<std::size_t>(answer_words.size(), 40)) / 40.0;

  std::set<std::string> q_terms;
  for (auto& w : words_of(question)) {
    if (w.size() > 2) q_terms.insert(std::move(w));
  }
  double overlap = 0.0;
  if (!q_terms.empty()) {
    const std::set<std::string> a_terms(answer_words.begin(), answer_words.end());
    std::size_t hit = 0;
    for (const auto& t : q_terms) hit += a_terms.count(t);
    overlap = static_cast<double>(hit) / static_cast<double>(q_terms.size());
  }

  const std::string key = question + '\x1f' + answer;
  const auto h = fnv1a64(key);
  const double jitter = static_cast<double>(h >> 11) * 0x1.0p-53;

  const double raw = 0.45 * length + 0.45 * overlap + 0.10 * jitter;
  return 10.0 * std::clamp(raw, 0.0, 1.0);
}

std::unique_ptr<Judge> make_judge(const std::string& name) {
  if (name == "mock") return std::make_unique<MockJudge>();
  throw JudgeUnavailable(name);
}

}  // namespace fpref::eval
