#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "ergo/rng.hpp"

using namespace ergo;

TEST_SUITE_BEGIN("rng");

TEST_CASE("identical seed and stream reproduce the sequence bitwise") {
  CounterRng a(42, 7);
  CounterRng b(42, 7);
  for (int i = 0; i < 200; ++i) CHECK(a.next_u64() == b.next_u64());
  for (int i = 0; i < 200; ++i) CHECK(a.uniform() == b.uniform());
  for (int i = 0; i < 200; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("distinct streams from one seed do not collide") {
  CounterRng a(42, 0);
  CounterRng b(42, 1);
  int equal = 0;
  for (int i = 0; i < 256; ++i) equal += a.next_u64() == b.next_u64() ? 1 : 0;
  CHECK(equal == 0);

  CounterRng c(43, 0);
  CounterRng d(42, 0);
  int same_position = 0;
  for (int i = 0; i < 256; ++i) same_position += c.next_u64() == d.next_u64() ? 1 : 0;
  CHECK(same_position == 0);
}

TEST_CASE("uniform draws stay strictly inside the unit interval with flat moments") {
  CounterRng rng(2026, 0);
  const int n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  double lowest = 1.0;
  double highest = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum_sq += u * u;
    lowest = std::min(lowest, u);
    highest = std::max(highest, u);
  }
  const double mean = sum / n;
  const double second = sum_sq / n;
  // 4 sigma bands: sd(mean) = 1/sqrt(12 n), sd(u^2) ~ 0.298/sqrt(n).
  CHECK(std::abs(mean - 0.5) < 4.0 / std::sqrt(12.0 * n));
  CHECK(std::abs(second - 1.0 / 3.0) < 4.0 * 0.30 / std::sqrt(double(n)));
  CHECK(lowest < 1e-4);
  CHECK(highest > 1.0 - 1e-4);
}

TEST_CASE("normal draws have standard moments and no pair correlation") {
  CounterRng rng(99, 3);
  const int n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  double lag = 0.0;
  double prev = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
    if (i > 0) lag += z * prev;
    prev = z;
  }
  const double mean = sum / n;
  const double variance = sum_sq / n - mean * mean;
  const double autocorr = lag / (n - 1);
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(variance - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(autocorr) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("a normal pair consumes exactly two raw draws") {
  CounterRng drawn(11, 5);
  drawn.normal();
  drawn.normal();
  CounterRng raw(11, 5);
  raw.next_u64();
  raw.next_u64();
  CHECK(drawn.next_u64() == raw.next_u64());
}

TEST_CASE("derived stream identifiers are deterministic and spread out") {
  CHECK(derive_stream(7, 0) == derive_stream(7, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t salt = 0; salt < 4096; ++salt) seen.insert(derive_stream(7, salt));
  CHECK(seen.size() == 4096);
  CHECK(derive_stream(7, 0) != derive_stream(8, 0));
}

TEST_SUITE_END();
