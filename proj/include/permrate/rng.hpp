#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace permrate {

// Counter-based random substreams.
//
// Every random draw in the library comes from a stream keyed by
// (seed, stream id, purpose[, attempt]).  Streams are cheap to construct, so
// parallel loops build one per work item from the item's index; results are
// then identical for any thread count or schedule.  The generator iterates
// splitmix64, whose output mixing is a bijection with full 2^64 period and
// exact integer semantics on every platform.
class SubstreamRng {
 public:
  // Mixes the words into the initial state in order; different word lists
  // give statistically independent streams.
  explicit SubstreamRng(std::initializer_list<std::uint64_t> words) : state_(0x9E3779B97F4A7C15ull) {
    for (std::uint64_t w : words) state_ = mix(state_ ^ (w + 0x9E3779B97F4A7C15ull + (state_ << 6) + (state_ >> 2)));
  }

  SubstreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t purpose)
      : SubstreamRng({seed, stream, purpose}) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on {0, 1, ..., bound-1} without modulo bias.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via the polar (Marsaglia) method; pairs are cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_uniform() - 1.0;
      v = 2.0 * next_uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  // +1 or -1 with equal probability.
  double next_sign() { return (next_u64() >> 63) ? 1.0 : -1.0; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Purpose tags keep streams for different uses disjoint even when they share
// a (seed, index) pair.
namespace rng_purpose {
inline constexpr std::uint64_t kPermutation = 1;
inline constexpr std::uint64_t kBootstrapWeights = 2;
inline constexpr std::uint64_t kSubsample = 3;
inline constexpr std::uint64_t kDataGen = 4;
inline constexpr std::uint64_t kSetMembership = 5;
}  // namespace rng_purpose

// In-place Fisher-Yates shuffle driven by the given stream.
template <typename T>
void shuffle(T* data, std::size_t n, SubstreamRng& rng) {
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    T tmp = data[i - 1];
    data[i - 1] = data[j];
    data[j] = tmp;
  }
}

}  // namespace permrate
