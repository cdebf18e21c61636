#pragma once

#include <cstdint>
#include <limits>

namespace compofed {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based random stream.
///
/// The i-th output is a pure function of (key, i), so a stream can be
/// re-created anywhere from its key and replayed without shared state.
/// Keys for the local-update batches are derived from
/// (seed, worker, round, step); every algorithm in the library uses the
/// same derivation so that runs are comparable batch-for-batch.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterStream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr CounterStream for_step(std::uint64_t seed, std::uint64_t worker,
                                          std::uint64_t round, std::uint64_t step) noexcept {
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ (worker + 0x1000000000000001ULL));
    k = mix64(k ^ (round + 0x2000000000000003ULL));
    k = mix64(k ^ (step + 0x3000000000000007ULL));
    return CounterStream(k);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    return mix64(key_ ^ mix64(counter_++));
  }

  /// Uniform integer in [0, bound) by Lemire's multiply-and-reject.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    unsigned __int128 product = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(product);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        product = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(product);
      }
    }
    return static_cast<std::uint64_t>(product >> 64);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace compofed
