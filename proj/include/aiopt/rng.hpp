#pragma once

#include <cstdint>

namespace aiopt {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed for a numbered sub-stream (episode, evaluation run, ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based random stream: draw k is a pure function of (seed, k), so
/// results never depend on evaluation order. `next_*` walk the counter.
class CounterStream {
 public:
  constexpr explicit CounterStream(std::uint64_t seed = 0) : key_(splitmix64(seed ^ 0xd1b54a32d192ed03ULL)) {}

  constexpr std::uint64_t bits_at(std::uint64_t index) const { return splitmix64(key_ + splitmix64(index)); }

  /// Uniform double in [0, 1) at a fixed index.
  constexpr double uniform_at(std::uint64_t index) const {
    return static_cast<double>(bits_at(index) >> 11) * 0x1.0p-53;
  }

  std::uint64_t next_bits() { return bits_at(counter_++); }
  double next_uniform() { return uniform_at(counter_++); }

  /// Uniform integer in [0, n) using the next draw.
  std::uint64_t next_below(std::uint64_t n) {
    // Bias of the floor mapping is at most n * 2^-53.
    const double u = next_uniform();
    auto v = static_cast<std::uint64_t>(u * static_cast<double>(n));
    return v < n ? v : n - 1;
  }

  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace aiopt
