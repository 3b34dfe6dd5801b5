// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

namespace vidpost {

/// Philox4x32-10 counter-based generator. Stateless per block: the stream is
/// a pure function of (seed, stream, counter), so every consumer of a seed is
/// reproducible bit-for-bit regardless of call interleaving elsewhere.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform double in (0, 1]. Never returns 0, so log() is safe.
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Unbiased integer in [lo, hi] via rejection sampling.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

  /// Standard normal via Box-Muller; the sine partner is cached.
  double normal();

  /// Deterministic substream seed from (seed, a, b). SplitMix64 mixing.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;  // forces refill on first draw
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace vidpost
