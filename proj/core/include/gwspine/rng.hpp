#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace gwspine {

/// SplitMix64 output function. Used both to expand seeds into engine state and
/// to derive child keys, so that a substream is a pure function of its path
/// of tags from the master seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t tag) noexcept {
  return mix64(parent ^ mix64(tag ^ 0x6a09e667f3bcc909ULL));
}

/// FNV-1a, for turning check names into stable stream tags.
constexpr std::uint64_t hash_tag(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Purpose tags for the per-node substreams.
namespace stream_tag {
inline constexpr std::uint64_t root = 0x524f4f54;
inline constexpr std::uint64_t genealogy = 1;
inline constexpr std::uint64_t motion = 2;
inline constexpr std::uint64_t theta = 3;
inline constexpr std::uint64_t path = 4;
inline constexpr std::uint64_t initial = 5;
}  // namespace stream_tag

/// Random stream: xoshiro256** seeded from a 64-bit key.
///
/// Cheap to construct (four SplitMix64 rounds), which matters because every
/// tree node owns its own substreams. Satisfies UniformRandomBitGenerator, so
/// the <random> distributions can be driven by it directly.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }
  double normal();
  double exponential(double rate);
  std::uint64_t poisson(double mean);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  Stream substream(std::uint64_t tag) const noexcept { return Stream(derive_key(key_, tag)); }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
  std::uint64_t key_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gwspine
