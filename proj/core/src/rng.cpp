#include "fpref/core/rng.hpp"

#include <cmath>
#include <numbers>

#include "fpref/core/error.hpp"

namespace fpref {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kPathMix = 0xd1b54a32d192ed03ULL;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t root_seed)
    : root_seed_(root_seed), key_(mix64(root_seed ^ kGolden)) {}

RngStream::RngStream(std::uint64_t root_seed, std::vector<PathStep> path,
                     std::uint64_t key)
    : root_seed_(root_seed), path_(std::move(path)), key_(key) {}

RngStream RngStream::derive(std::string_view label, std::int64_t index) const {
  if (label.empty()) throw InvalidArgument("derive_stream: empty label");
  std::uint64_t k = mix64(key_ ^ fnv1a64(label));
  k = mix64(k + static_cast<std::uint64_t>(index) * kPathMix + kGolden);
  auto path = path_;
  path.push_back({std::string(label), index});
  return RngStream(root_seed_, std::move(path), k);
}

std::uint64_t RngStream::next_u64() noexcept {
  std::uint64_t n = counter_++;
  return mix64(mix64(n * kGolden ^ key_) + key_);
}

double RngStream::next_double() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("next_below: bound must be positive");
  // Reject the low sliver so that every residue is equally likely.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t x = next_u64();
    if (x >= threshold) return x % bound;
  }
}

double RngStream::next_normal() noexcept {
  double u1 = 1.0 - next_double();  // (0, 1]
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream derive_stream(const RngStream& root, std::string_view label,
                        std::int64_t index) {
  return root.derive(label, index);
}

}  // namespace fpref
