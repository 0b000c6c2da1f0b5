#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fpref {

// Counter-based random stream. Draw n of a stream is a pure function of
// (key, n), and the key is a pure function of the root seed plus the
// derivation path. Child streams therefore never depend on how many values
// the parent has drawn, on call order, or on thread schedule.
//
// All transforms (uniform doubles, bounded integers, shuffles) use only
// integer arithmetic or IEEE-exact operations, so integer-valued results such
// as shuffles are identical on every platform. next_normal() goes through
// libm and is only bit-stable for a fixed toolchain.
class RngStream {
 public:
  struct PathStep {
    std::string label;
    std::int64_t index;
    bool operator==(const PathStep&) const = default;
  };

  explicit RngStream(std::uint64_t root_seed);

  // Throws InvalidArgument on an empty label.
  RngStream derive(std::string_view label, std::int64_t index) const;

  std::uint64_t root_seed() const noexcept { return root_seed_; }
  const std::vector<PathStep>& path() const noexcept { return path_; }
  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double next_double() noexcept;
  // Uniform in [0, bound). bound must be positive.
  std::uint64_t next_below(std::uint64_t bound);
  double next_normal() noexcept;

  // Fisher-Yates, walking i from the back: swap(v[i], v[next_below(i + 1)]).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  RngStream(std::uint64_t root_seed, std::vector<PathStep> path,
            std::uint64_t key);

  std::uint64_t root_seed_;
  std::vector<PathStep> path_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

RngStream derive_stream(const RngStream& root, std::string_view label,
                        std::int64_t index);

// 64-bit FNV-1a; used for label hashing, vocab fingerprints and the mock judge.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

}  // namespace fpref
