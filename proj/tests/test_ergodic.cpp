#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "ergo/ergodic.hpp"
#include "ergo/kernels.hpp"
#include "ergo/measures.hpp"

using namespace ergo;

namespace {

StochasticMatrix mat2(double a00, double a01, double a10, double a11) {
  return StochasticMatrix(2, {a00, a01, a10, a11});
}

/// Two-phase schedule with exactly known invariant family:
///   even steps use [[0.9,0.1],[0.2,0.8]], odd steps [[0.5,0.5],[0.3,0.7]];
///   mu_even = (17/43, 26/43), mu_odd = (20.5/43, 22.5/43).
KernelFamily periodic_fixture() {
  return KernelFamily::periodic({mat2(0.9, 0.1, 0.2, 0.8), mat2(0.5, 0.5, 0.3, 0.7)});
}

KernelFamily flat_kernel() { return KernelFamily::constant(mat2(0.5, 0.5, 0.5, 0.5)); }

ProbabilityVector exact_mu_even() {
  return ProbabilityVector({17.0 / 43.0, 26.0 / 43.0});
}

ProbabilityVector exact_mu_odd() {
  return ProbabilityVector({20.5 / 43.0, 22.5 / 43.0});
}

/// The periodic fixture repackaged as an opaque callback, so construction
/// routines cannot exploit the declared period.
KernelFamily periodic_as_callback() {
  return KernelFamily::from_callback(
      [](std::int64_t n) {
        const bool even = ((n % 2) + 2) % 2 == 0;
        return even ? mat2(0.9, 0.1, 0.2, 0.8) : mat2(0.5, 0.5, 0.3, 0.7);
      },
      2);
}

/// Schedule with no period: the top row drifts along the irrational rotation
/// n * sqrt(2) mod 1, so no integer shift ever repeats it.
KernelFamily quasi_periodic_kernel() {
  return KernelFamily::from_callback(
      [](std::int64_t n) {
        const double phase = static_cast<double>(n) * std::numbers::sqrt2;
        const double frac = phase - std::floor(phase);
        const double a = 0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * frac);
        return mat2(a, 1.0 - a, 0.3, 0.7);
      },
      2);
}

double family_tv(const InvariantFamily& F, std::int64_t n, const ProbabilityVector& ref) {
  return tv_distance(F.at(n), ref);
}

}  // namespace

TEST_SUITE("ergodic") {

TEST_CASE("cesaro average of a flat kernel reproduces the two-step value exactly") {
  const auto r = krylov_bogolyubov_family(flat_kernel(), ProbabilityVector::delta(2, 0),
                                          TimeWindow{0, 0}, /*s_max=*/2);
  CHECK(r.diagnostics.method == "cesaro");
  CHECK(r.diagnostics.status == "budget_exhausted");
  CHECK_FALSE(r.diagnostics.converged());
  CHECK(r.diagnostics.iterations == 2);
  REQUIRE(r.diagnostics.decay_profile.size() == 1);
  CHECK(r.diagnostics.decay_profile[0] == 0.5);
  // (delta_0 + delta_0 P) / 2 = ((1,0) + (0.5,0.5)) / 2, with no rounding.
  REQUIRE(r.family.count() == 1);
  CHECK(r.family.at(0)[0] == 0.75);
  CHECK(r.family.at(0)[1] == 0.25);
  CHECK(r.family.method() == ConstructionMethod::cesaro);
}

TEST_CASE("cesaro average of a flat kernel converges to the uniform measure") {
  const auto r = krylov_bogolyubov_family(flat_kernel(), ProbabilityVector::delta(2, 0),
                                          TimeWindow{0, 3}, std::int64_t{1} << 40, 1e-9);
  CHECK(r.diagnostics.status == "converged");
  CHECK(r.diagnostics.converged());
  // The doubling gap is exactly 1/s, so the first pass under 1e-9 is s = 2^30.
  CHECK(r.diagnostics.iterations == (std::int64_t{1} << 30));
  CHECK(r.diagnostics.decay_profile.size() == 30);
  CHECK(r.diagnostics.final_gap == doctest::Approx(9.313225746154785e-10).epsilon(1e-12));
  const ProbabilityVector uniform = ProbabilityVector::uniform(2);
  for (std::int64_t n = 0; n <= 3; ++n) CHECK(family_tv(r.family, n, uniform) <= 2e-9);
  CHECK(r.family.residual() <= 1e-8);
  REQUIRE(r.diagnostics.per_time_residuals.size() == 3);
  for (double res : r.diagnostics.per_time_residuals) CHECK(res <= 1e-8);
}

TEST_CASE("cesaro construction on the identity kernel returns the seed unchanged") {
  const auto K = KernelFamily::constant(StochasticMatrix::identity(2));
  const ProbabilityVector seed({0.25, 0.75});
  const auto r = krylov_bogolyubov_family(K, seed, TimeWindow{-2, 2});
  CHECK(r.diagnostics.status == "converged");
  CHECK(r.diagnostics.iterations == 2);
  REQUIRE(r.diagnostics.decay_profile.size() == 1);
  CHECK(r.diagnostics.decay_profile[0] == 0.0);
  for (std::int64_t n = -2; n <= 2; ++n) {
    CHECK(r.family.at(n).weights() == seed.weights());
  }
  CHECK(r.family.residual() == 0.0);
  for (double res : r.diagnostics.per_time_residuals) CHECK(res == 0.0);
}

TEST_CASE("cesaro construction matches the exact periodic family") {
  const auto r = krylov_bogolyubov_family(periodic_fixture(), ProbabilityVector::delta(2, 0),
                                          TimeWindow{0, 5}, std::int64_t{1} << 40, 1e-9);
  REQUIRE(r.diagnostics.status == "converged");
  // Doubling gap halves each round and first dips under 1e-9 at s = 2^32.
  CHECK(r.diagnostics.iterations == (std::int64_t{1} << 32));
  CHECK(r.diagnostics.decay_profile.size() == 32);

  const ProbabilityVector mu_even = exact_mu_even();
  const ProbabilityVector mu_odd = exact_mu_odd();
  for (std::int64_t n = 0; n <= 5; ++n) {
    const ProbabilityVector& ref = (n % 2 == 0) ? mu_even : mu_odd;
    CHECK(family_tv(r.family, n, ref) <= 1e-8);
  }
  // One Cesaro sum per residue class: equal-parity measures are identical.
  CHECK(r.family.at(0).weights() == r.family.at(2).weights());
  CHECK(r.family.at(1).weights() == r.family.at(3).weights());
  CHECK(r.family.residual() <= 1e-8);
  REQUIRE(r.diagnostics.per_time_residuals.size() == 5);
  for (double res : r.diagnostics.per_time_residuals) CHECK(res <= 1e-8);
}

TEST_CASE("block doubling and literal streaming produce the same cesaro averages") {
  const ProbabilityVector seed = ProbabilityVector::delta(2, 0);
  const TimeWindow times{4, 5};
  const auto fast = krylov_bogolyubov_family(periodic_fixture(), seed, times, 1024, 1e-15);
  const auto slow = krylov_bogolyubov_family(periodic_as_callback(), seed, times, 1024, 1e-15);
  CHECK(fast.diagnostics.status == "budget_exhausted");
  CHECK(slow.diagnostics.status == "budget_exhausted");
  CHECK(fast.diagnostics.iterations == 1024);
  CHECK(slow.diagnostics.iterations == 1024);
  CHECK(fast.diagnostics.decay_profile.size() == 10);
  CHECK(slow.diagnostics.decay_profile.size() == 10);
  for (std::int64_t n = times.lo; n <= times.hi; ++n) {
    CHECK(tv_distance(fast.family.at(n), slow.family.at(n)) <= 1e-11);
  }
}

TEST_CASE("cesaro average of a flat callback kernel matches the four-step value exactly") {
  const auto K = KernelFamily::from_callback(
      [](std::int64_t) { return mat2(0.5, 0.5, 0.5, 0.5); }, 2);
  const auto r =
      krylov_bogolyubov_family(K, ProbabilityVector::delta(2, 0), TimeWindow{3, 3}, 4);
  CHECK(r.diagnostics.status == "budget_exhausted");
  CHECK(r.diagnostics.iterations == 4);
  REQUIRE(r.diagnostics.decay_profile.size() == 2);
  CHECK(r.diagnostics.decay_profile[0] == 0.5);
  CHECK(r.diagnostics.decay_profile[1] == 0.25);
  // (1,0) + 3 * (0.5,0.5), divided by 4: every step is dyadic and exact.
  CHECK(r.family.at(3)[0] == 0.625);
  CHECK(r.family.at(3)[1] == 0.375);
}

TEST_CASE("cesaro construction validates its arguments") {
  const auto K = flat_kernel();
  const ProbabilityVector seed3 = ProbabilityVector::uniform(3);
  const ProbabilityVector seed2 = ProbabilityVector::uniform(2);
  CHECK_THROWS_AS(krylov_bogolyubov_family(K, seed3, TimeWindow{0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(krylov_bogolyubov_family(K, seed2, TimeWindow{0, 0}, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(krylov_bogolyubov_family(K, seed2, TimeWindow{0, 0}, 16, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(krylov_bogolyubov_family(K, seed2, TimeWindow{0, 0}, 16, -1.0),
                  std::invalid_argument);
}

TEST_CASE("quasi-periodic schedules exhaust the cesaro budget") {
  const auto r = krylov_bogolyubov_family(quasi_periodic_kernel(),
                                          ProbabilityVector::delta(2, 0), TimeWindow{0, 2},
                                          /*s_max=*/64, /*tol=*/1e-12);
  CHECK(r.diagnostics.status == "budget_exhausted");
  CHECK_FALSE(r.diagnostics.converged());
  CHECK(r.diagnostics.iterations == 64);
  CHECK(r.diagnostics.decay_profile.size() == 6);
  CHECK(r.diagnostics.final_gap > 1e-3);
}

TEST_CASE("backward limit on a flat kernel converges in two steps") {
  const auto r = backward_limit_family(flat_kernel(), 0, TimeWindow{0, 1});
  CHECK(r.diagnostics.method == "backward_limit");
  CHECK(r.diagnostics.status == "converged");
  CHECK(r.diagnostics.iterations == 2);
  CHECK(r.diagnostics.heuristic);  // no weight function supplied
  CHECK(r.diagnostics.start_sensitivity == 0.0);
  REQUIRE(r.diagnostics.decay_profile.size() == 1);
  CHECK(r.diagnostics.decay_profile[0] == 0.0);
  for (std::int64_t n = 0; n <= 1; ++n) {
    CHECK(r.family.at(n)[0] == 0.5);
    CHECK(r.family.at(n)[1] == 0.5);
  }
  CHECK(r.family.residual() == 0.0);
  CHECK(r.family.method() == ConstructionMethod::backward_limit);
}

TEST_CASE("backward limit reproduces the periodic family") {
  const auto V = WeightFunction::from_values({0.0, 1.0});
  const auto r = backward_limit_family(periodic_fixture(), 0, TimeWindow{0, 3},
                                       std::int64_t{1} << 20, 1e-12, V);
  REQUIRE(r.diagnostics.status == "converged");
  CHECK_FALSE(r.diagnostics.heuristic);  // screened by an explicit weight function
  // TV decays by 0.14 per period; doubling first clears 1e-12 at m = 64.
  CHECK(r.diagnostics.iterations == 64);
  CHECK(r.diagnostics.decay_profile.size() == 6);
  CHECK(r.diagnostics.start_sensitivity <= 1e-12);
  const ProbabilityVector mu_even = exact_mu_even();
  const ProbabilityVector mu_odd = exact_mu_odd();
  for (std::int64_t n = 0; n <= 3; ++n) {
    const ProbabilityVector& ref = (n % 2 == 0) ? mu_even : mu_odd;
    CHECK(family_tv(r.family, n, ref) <= 1e-10);
  }
  CHECK(r.family.residual() <= 1e-10);
}

TEST_CASE("backward limit via callback matches the declared-period route") {
  const TimeWindow times{0, 1};
  const auto fast = backward_limit_family(periodic_fixture(), 0, times,
                                          std::int64_t{1} << 20, 1e-12);
  const auto slow = backward_limit_family(periodic_as_callback(), 0, times,
                                          std::int64_t{1} << 20, 1e-12);
  CHECK(fast.diagnostics.status == "converged");
  CHECK(slow.diagnostics.status == "converged");
  CHECK(fast.diagnostics.iterations == slow.diagnostics.iterations);
  CHECK(slow.diagnostics.heuristic);
  for (std::int64_t n = times.lo; n <= times.hi; ++n) {
    CHECK(tv_distance(fast.family.at(n), slow.family.at(n)) <= 1e-12);
  }
}

TEST_CASE("backward limit flags nonuniqueness on the identity kernel") {
  const auto K = KernelFamily::constant(StochasticMatrix::identity(2));
  const auto r = backward_limit_family(K, 0, TimeWindow{0, 0});
  CHECK(r.diagnostics.status == "nonunique");
  CHECK_FALSE(r.diagnostics.converged());
  CHECK(r.diagnostics.iterations == 2);
  // Point masses from distinct starts never merge: the gap is the full 2.
  CHECK(r.diagnostics.start_sensitivity == 2.0);
  CHECK(r.family.at(0)[0] == 1.0);
}

TEST_CASE("backward limit validates arguments and weight screening") {
  const auto K = flat_kernel();
  CHECK_THROWS_AS(backward_limit_family(K, 2, TimeWindow{0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(backward_limit_family(K, 0, TimeWindow{0, 0}, 0), std::invalid_argument);
  CHECK_THROWS_AS(backward_limit_family(K, 0, TimeWindow{0, 0}, 8, 0.0),
                  std::invalid_argument);
  const WeightFunction bad_dim = WeightFunction::zero(3);
  CHECK_THROWS_AS(backward_limit_family(K, 0, TimeWindow{0, 0}, 8, 1e-9, bad_dim),
                  std::invalid_argument);
  const WeightFunction spiked({ExtReal::infinity(), ExtReal::finite(0.0)});
  CHECK_THROWS_AS(backward_limit_family(K, 0, TimeWindow{0, 0}, 8, 1e-9, spiked),
                  std::domain_error);
  // The same weight function is fine from a finite-weight start.
  CHECK_NOTHROW(backward_limit_family(K, 1, TimeWindow{0, 0}, 8, 1e-9, spiked));
}

TEST_CASE("cesaro and backward-limit routes agree on the periodic fixture") {
  const TimeWindow times{0, 3};
  const auto kb = krylov_bogolyubov_family(periodic_fixture(), ProbabilityVector::delta(2, 0),
                                           times, std::int64_t{1} << 40, 1e-9);
  const auto bw = backward_limit_family(periodic_fixture(), 0, times,
                                        std::int64_t{1} << 20, 1e-12);
  REQUIRE(kb.diagnostics.converged());
  REQUIRE(bw.diagnostics.converged());
  for (std::int64_t n = times.lo; n <= times.hi; ++n) {
    CHECK(tv_distance(kb.family.at(n), bw.family.at(n)) <= 1e-8);
  }
}

TEST_CASE("extension fills a coarse grid and recovers the skipped measures") {
  const auto K = periodic_fixture();
  const InvariantFamily coarse(0, 2, {exact_mu_even(), exact_mu_even()},
                               ConstructionMethod::manual);
  const InvariantFamily fine = extend_family(K, coarse, TimeWindow{0, 3});
  CHECK(fine.start() == 0);
  CHECK(fine.stride() == 1);
  CHECK(fine.count() == 4);
  CHECK(fine.method() == ConstructionMethod::extension);
  CHECK(tv_distance(fine.at(0), exact_mu_even()) <= 1e-15);
  CHECK(tv_distance(fine.at(1), exact_mu_odd()) <= 1e-9);
  CHECK(tv_distance(fine.at(2), exact_mu_even()) <= 1e-15);
  CHECK(tv_distance(fine.at(3), exact_mu_odd()) <= 1e-9);
  CHECK(fine.residual() <= 1e-9);
}

TEST_CASE("extension over the family's own grid is a no-op") {
  SUBCASE("dyadic constant family under the identity kernel reproduces bitwise") {
    const auto K = KernelFamily::constant(StochasticMatrix::identity(2));
    const ProbabilityVector m({0.75, 0.25});
    const InvariantFamily F(5, 1, {m, m, m, m}, ConstructionMethod::manual);
    const InvariantFamily out = extend_family(K, F, TimeWindow{5, 8});
    for (std::int64_t n = 5; n <= 8; ++n) CHECK(out.at(n).weights() == F.at(n).weights());
    CHECK(out.residual() == 0.0);
  }
  SUBCASE("constructed periodic family round-trips within rounding") {
    const auto kb = krylov_bogolyubov_family(periodic_fixture(),
                                             ProbabilityVector::delta(2, 0), TimeWindow{0, 5},
                                             std::int64_t{1} << 40, 1e-9);
    REQUIRE(kb.diagnostics.converged());
    const InvariantFamily out = extend_family(periodic_fixture(), kb.family, TimeWindow{0, 5});
    for (std::int64_t n = 0; n <= 5; ++n) {
      CHECK(tv_distance(out.at(n), kb.family.at(n)) <= 1e-15);
    }
  }
}

TEST_CASE("extension rejects inconsistent sub-grid families") {
  const auto K = periodic_fixture();
  const ProbabilityVector mu = exact_mu_even();
  const ProbabilityVector tilted({17.0 / 43.0 + 0.05, 26.0 / 43.0 - 0.05});
  const InvariantFamily broken(0, 2, {mu, tilted, mu}, ConstructionMethod::manual);
  CHECK_THROWS_AS(extend_family(K, broken, TimeWindow{2, 3}), std::runtime_error);
  CHECK_THROWS_AS(extend_family(K, broken, TimeWindow{3, 3}), std::runtime_error);

  const InvariantFamily fine(0, 2, {mu, mu}, ConstructionMethod::manual);
  CHECK_THROWS_AS(extend_family(K, fine, TimeWindow{-1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(extend_family(K, fine, TimeWindow{0, 1}, 0.0), std::invalid_argument);
  const InvariantFamily wrong_dim(0, 1, {ProbabilityVector::uniform(3)},
                                  ConstructionMethod::manual);
  CHECK_THROWS_AS(extend_family(K, wrong_dim, TimeWindow{0, 0}), std::invalid_argument);
}

TEST_CASE("periodicity scan finds the period of the constructed family") {
  const auto kb = krylov_bogolyubov_family(periodic_fixture(), ProbabilityVector::delta(2, 0),
                                           TimeWindow{0, 11}, std::int64_t{1} << 40, 1e-9);
  REQUIRE(kb.diagnostics.converged());
  const PeriodScan scan = periodicity_scan(kb.family, 5, 1e-9);
  REQUIRE(scan.period.has_value());
  CHECK(*scan.period == 2);
  REQUIRE(scan.defects.size() == 5);
  // Odd shifts compare the two phases: tv(mu_even, mu_odd) = 7/43.
  CHECK(scan.defects[0] == doctest::Approx(7.0 / 43.0).epsilon(1e-7));
  CHECK(scan.defects[1] == 0.0);
  CHECK(scan.defects[2] == doctest::Approx(7.0 / 43.0).epsilon(1e-7));
  CHECK(scan.defects[3] == 0.0);
  CHECK(scan.defects[4] == doctest::Approx(7.0 / 43.0).epsilon(1e-7));
}

TEST_CASE("periodicity scan reports period one for a constant family") {
  const auto kb = krylov_bogolyubov_family(flat_kernel(), ProbabilityVector::delta(2, 0),
                                           TimeWindow{0, 7}, std::int64_t{1} << 40, 1e-9);
  const PeriodScan scan = periodicity_scan(kb.family, 4, 1e-9);
  REQUIRE(scan.period.has_value());
  CHECK(*scan.period == 1);
  for (double d : scan.defects) CHECK(d == 0.0);
}

TEST_CASE("periodicity scan certifies absence of a period for quasi-periodic data") {
  std::vector<ProbabilityVector> measures;
  for (int n = 0; n < 14; ++n) {
    const double phase = n * std::numbers::sqrt2;
    const double frac = phase - std::floor(phase);
    const double w = 0.4 + 0.25 * std::sin(2.0 * std::numbers::pi * frac);
    measures.push_back(ProbabilityVector({w, 1.0 - w}));
  }
  const InvariantFamily F(0, 1, measures, ConstructionMethod::manual);
  const PeriodScan scan = periodicity_scan(F, 6, 1e-6);
  CHECK_FALSE(scan.period.has_value());
  REQUIRE(scan.defects.size() == 6);
  // Irrational rotation: every shift keeps a macroscopic defect.
  for (double d : scan.defects) CHECK(d > 1e-3);
  CHECK(scan.defects[4] == doctest::Approx(0.21952488092661893).epsilon(1e-9));
}

TEST_CASE("periodicity scan validates its inputs") {
  const ProbabilityVector m = ProbabilityVector::uniform(2);
  const InvariantFamily strided(0, 2, {m, m, m, m}, ConstructionMethod::manual);
  CHECK_THROWS_AS(periodicity_scan(strided, 1, 1e-9), std::invalid_argument);
  const InvariantFamily narrow(0, 1, {m, m, m}, ConstructionMethod::manual);
  CHECK_THROWS_AS(periodicity_scan(narrow, 2, 1e-9), std::invalid_argument);
  const InvariantFamily ok(0, 1, {m, m, m, m}, ConstructionMethod::manual);
  CHECK_THROWS_AS(periodicity_scan(ok, 0, 1e-9), std::invalid_argument);
  CHECK_THROWS_AS(periodicity_scan(ok, 2, -1.0), std::invalid_argument);
  CHECK_NOTHROW(periodicity_scan(ok, 2, 0.0));
}

}  // TEST_SUITE("ergodic")
