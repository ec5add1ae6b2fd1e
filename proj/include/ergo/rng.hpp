#pragma once

#include <cstdint>

namespace ergo {

/// Counter-based pseudo-random generator: every output is a pure function of
/// (seed, stream, draw index), so parallel consumers that agree on stream ids
/// reproduce each other's draws exactly regardless of scheduling.  One stream
/// per simulated path keeps batch results independent of batch layout.
///
/// The core is the splitmix64 output function applied to an affine counter
/// walk; the (seed, stream) pair is hashed into the walk's origin.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Next 64 uniformly distributed bits.
  std::uint64_t next_u64();

  /// Uniform draw strictly inside (0, 1) with 52-bit resolution.
  double uniform();

  /// Standard normal draw (Box-Muller; the second value of each generated
  /// pair is cached, so draws come in deterministic order).
  double normal();

 private:
  std::uint64_t state_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Deterministically derives a decorrelated child seed for a substream
/// (per grid cell, per pipeline stage, ...).  Pure function of (seed, salt).
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t salt);

}  // namespace ergo
