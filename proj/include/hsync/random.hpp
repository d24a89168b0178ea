#pragma once

#include <cstdint>
#include <limits>

namespace hsync {

// SplitMix64 generator. Small state makes it cheap to key one independent
// stream per trial, which is what keeps campaigns identical for any worker
// count. Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state = 0) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t state_;
};

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent substream for (seed, stream, index). `stream` separates
// consumers sharing one seed (protocol trials vs. CHSH settings).
constexpr SplitMix64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
  return SplitMix64(mix64(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL)) + index));
}

namespace streams {
inline constexpr std::uint64_t protocol_trial = 1;
inline constexpr std::uint64_t chsh_setting = 2;
inline constexpr std::uint64_t bootstrap = 3;
}  // namespace streams

}  // namespace hsync
