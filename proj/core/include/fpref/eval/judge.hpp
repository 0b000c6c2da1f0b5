#pragma once

#include <memory>
#include <string>

namespace fpref::eval {

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string name() const = 0;
  // Score in [0, 10].
  virtual double score(const std::string& question, const std::string& answer) const = 0;
};

// Deterministic stand-in for an LLM judge. An empty answer scores 0.
// Otherwise
//   10 * clamp(0.45 * length + 0.45 * overlap + 0.10 * jitter, 0, 1)
// where length = min(words, 40) / 40, overlap is the fraction of distinct
// question words (lowercased, longer than two letters) that appear in the
// answer, and jitter is FNV-1a of "question\x1fanswer" mapped to [0, 1).
class MockJudge final : public Judge {
 public:
  std::string name() const override { return "mock"; }
  double score(const std::string& question, const std::string& answer) const override;
};

// "mock" is the only built-in judge; other names throw JudgeUnavailable.
std::unique_ptr<Judge> make_judge(const std::string& name);

inline double judge_score(const Judge& judge, const std::string& question,
                          const std::string& answer) {
  return judge.score(question, answer);
}

}  // namespace fpref::eval
