#include "ergo/rng.hpp"

#include <cmath>
#include <numbers>

namespace ergo {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : state_(mix64(mix64(seed + kGolden) ^ (stream + 0xD1B54A32D192ED03ULL))) {}

std::uint64_t CounterRng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double CounterRng::uniform() {
  return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

double CounterRng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(angle);
  has_cached_ = true;
  return r * std::cos(angle);
}

std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t salt) {
  return mix64(mix64(seed + kGolden) + mix64(salt ^ 0x94D049BB133111EBULL));
}

}  // namespace ergo
