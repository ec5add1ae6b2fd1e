#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ergo/kernels.hpp"
#include "ergo/measures.hpp"
#include "oracles.hpp"

using namespace ergo;

namespace {

// The two-state periodic fixture used across the suite: even times use a
// sticky kernel, odd times a fast-mixing one.
KernelFamily periodic_fixture() {
  return KernelFamily::periodic({
      StochasticMatrix(2, {0.9, 0.1, 0.2, 0.8}),
      StochasticMatrix(2, {0.5, 0.5, 0.3, 0.7}),
  });
}

// Exact invariant family of the periodic fixture: left fixed vector of
// P_even * P_odd at even times, pushed one step for odd times.
std::vector<double> fixture_mu_even() { return {17.0 / 43.0, 26.0 / 43.0}; }
std::vector<double> fixture_mu_odd() { return {20.5 / 43.0, 22.5 / 43.0}; }

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("stochastic matrix validation mirrors the measure contract") {
  CHECK_THROWS_AS(StochasticMatrix(2, {0.5, 0.5, 0.7, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(StochasticMatrix(2, {0.5, -0.5, 0.3, 0.7}), std::invalid_argument);
  CHECK_THROWS_AS(StochasticMatrix(2, {0.5, 0.5, 0.3}), std::invalid_argument);

  // Row sums within the renormalization limit are repaired.
  const StochasticMatrix p(2, {0.5 + 1e-10, 0.5, 0.3, 0.7});
  double sum = p(0, 0) + p(0, 1);
  CHECK(std::abs(sum - 1.0) <= kProbabilityTol);

  const StochasticMatrix id = StochasticMatrix::identity(3);
  CHECK(id(1, 1) == 1.0);
  CHECK(id(1, 2) == 0.0);
}

TEST_CASE("two-phase product matches the precomputed fixture") {
  const StochasticMatrix even(2, {0.9, 0.1, 0.2, 0.8});
  const StochasticMatrix odd(2, {0.5, 0.5, 0.3, 0.7});
  const StochasticMatrix prod = even * odd;
  CHECK(prod(0, 0) == doctest::Approx(0.48).epsilon(1e-15));
  CHECK(prod(0, 1) == doctest::Approx(0.52).epsilon(1e-15));
  CHECK(prod(1, 0) == doctest::Approx(0.34).epsilon(1e-15));
  CHECK(prod(1, 1) == doctest::Approx(0.66).epsilon(1e-15));

  // Left fixed vector of the two-step block, against the closed-form oracle.
  const std::vector<double> pi = oracle::stationary_2x2(
      {prod(0, 0), prod(0, 1), prod(1, 0), prod(1, 1)});
  CHECK(pi[0] == doctest::Approx(fixture_mu_even()[0]).epsilon(1e-14));
  CHECK(pi[1] == doctest::Approx(fixture_mu_even()[1]).epsilon(1e-14));

  // And the odd-time measure is the even one pushed through P_even.
  const std::vector<double> pushed = even.apply_to_measure(fixture_mu_even());
  CHECK(pushed[0] == doctest::Approx(fixture_mu_odd()[0]).epsilon(1e-14));
  CHECK(pushed[1] == doctest::Approx(fixture_mu_odd()[1]).epsilon(1e-14));
}

TEST_CASE("backward product convention and the zero-step identity") {
  const KernelFamily K = periodic_fixture();
  // m = 0 is the identity regardless of n.
  const StochasticMatrix id = backward_product(K, 7, 0);
  CHECK(id(0, 0) == 1.0);
  CHECK(id(0, 1) == 0.0);

  // Ending at n = 2 with m = 2 uses indices 0 (even) then 1 (odd).
  const StochasticMatrix two = backward_product(K, 2, 2);
  CHECK(two(0, 0) == doctest::Approx(0.48).epsilon(1e-15));
  CHECK(two(1, 0) == doctest::Approx(0.34).epsilon(1e-15));

  CHECK_THROWS_AS(backward_product(K, 2, -1), std::invalid_argument);

  // Negative times follow true mathematical mod: index -2 is even.
  const StochasticMatrix at_minus2 = K.at(-2);
  CHECK(at_minus2(0, 0) == 0.9);
  const StochasticMatrix at_minus1 = K.at(-1);
  CHECK(at_minus1(0, 0) == 0.5);
}

TEST_CASE("composition splits exactly on dyadic matrices") {
  // Entries are multiples of 1/16, so every intermediate product is exactly
  // representable and the split/whole products must agree bit for bit.
  oracle::TestRng rng(505);
  const auto dyadic_matrix = [&](std::size_t d) {
    std::vector<double> a(d * d, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
      int left = 16;
      for (std::size_t c = 0; c + 1 < d; ++c) {
        const int take = int(rng.integer(0, left));
        a[r * d + c] = take / 16.0;
        left -= take;
      }
      a[r * d + d - 1] = left / 16.0;
    }
    return StochasticMatrix(d, std::move(a));
  };

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = std::size_t(rng.integer(2, 4));
    std::vector<StochasticMatrix> phases;
    const std::int64_t p = rng.integer(1, 3);
    for (std::int64_t i = 0; i < p; ++i) phases.push_back(dyadic_matrix(d));
    const KernelFamily K = KernelFamily::periodic(std::move(phases));

    const std::int64_t n = rng.integer(-3, 6);
    const std::int64_t m1 = rng.integer(0, 3);
    const std::int64_t m2 = rng.integer(0, 3);
    const StochasticMatrix whole = backward_product(K, n, m1 + m2);
    const StochasticMatrix split =
        backward_product(K, n - m2, m1) * backward_product(K, n, m2);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        CHECK(whole(r, c) == split(r, c));
      }
    }
  }
}

TEST_CASE("composition splits to roundoff on general matrices") {
  oracle::TestRng rng(606);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = std::size_t(rng.integer(2, 6));
    std::vector<StochasticMatrix> phases;
    const std::int64_t p = rng.integer(1, 4);
    for (std::int64_t i = 0; i < p; ++i) {
      std::vector<double> a;
      for (std::size_t r = 0; r < d; ++r) {
        const auto row = rng.stochastic_row(d, 0.0);
        a.insert(a.end(), row.begin(), row.end());
      }
      phases.push_back(StochasticMatrix(d, std::move(a)));
    }
    const KernelFamily K = KernelFamily::periodic(std::move(phases));
    const std::int64_t n = rng.integer(-4, 8);
    const std::int64_t m1 = rng.integer(0, 6);
    const std::int64_t m2 = rng.integer(0, 6);
    const StochasticMatrix whole = backward_product(K, n, m1 + m2);
    const StochasticMatrix split =
        backward_product(K, n - m2, m1) * backward_product(K, n, m2);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        CHECK(whole(r, c) == doctest::Approx(split(r, c)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("push and pull are adjoint") {
  oracle::TestRng rng(707);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = std::size_t(rng.integer(2, 6));
    std::vector<StochasticMatrix> phases;
    for (int i = 0; i < 3; ++i) {
      std::vector<double> a;
      for (std::size_t r = 0; r < d; ++r) {
        const auto row = rng.stochastic_row(d, 0.0);
        a.insert(a.end(), row.begin(), row.end());
      }
      phases.push_back(StochasticMatrix(d, std::move(a)));
    }
    const KernelFamily K = KernelFamily::periodic(std::move(phases));

    const ProbabilityVector nu(rng.stochastic_row(d, 0.0));
    SignedVector phi(d);
    for (auto& x : phi) x = rng.uniform(-1.0, 1.0);
    const std::int64_t s = rng.integer(-5, 5);
    const std::int64_t t = s + rng.integer(0, 7);

    const ProbabilityVector pushed = push_measure(K, nu, s, t);
    const SignedVector pulled = pull_function(K, phi, s, t);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      lhs += pushed[i] * phi[i];
      rhs += nu[i] * pulled[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("push preserves mass and rejects reversed time") {
  const KernelFamily K = periodic_fixture();
  const ProbabilityVector nu({0.3, 0.7});
  CHECK_THROWS_AS(push_measure(K, nu, 3, 2), std::invalid_argument);

  const ProbabilityVector same = push_measure(K, nu, 4, 4);
  CHECK(same[0] == nu[0]);

  const ProbabilityVector far = push_measure(K, nu, 0, 5000);
  double sum = 0.0;
  for (double x : far.weights()) sum += x;
  CHECK(std::abs(sum - 1.0) <= kProbabilityTol);
}

TEST_CASE("pull function one-step fixture") {
  const KernelFamily K =
      KernelFamily::constant(StochasticMatrix(2, {0.6, 0.4, 0.4, 0.6}));
  const SignedVector out = pull_function(K, {1.0, -1.0}, 0, 1);
  CHECK(out[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("window schedules clamp outside their span") {
  const StochasticMatrix a(2, {0.9, 0.1, 0.1, 0.9});
  const StochasticMatrix b(2, {0.5, 0.5, 0.5, 0.5});
  const KernelFamily K = KernelFamily::window({a, b}, 10);
  CHECK(K.at(10)(0, 0) == 0.9);
  CHECK(K.at(11)(0, 0) == 0.5);
  CHECK(K.at(-100)(0, 0) == 0.9);   // clamps to the first matrix
  CHECK(K.at(+100)(0, 0) == 0.5);   // clamps to the last matrix
  REQUIRE(K.window_span().has_value());
  CHECK(K.window_span()->first == 10);
  CHECK(K.window_span()->second == 11);
  CHECK(!K.declared_period().has_value());
}

TEST_CASE("declared periods and callback schedules") {
  const KernelFamily constant =
      KernelFamily::constant(StochasticMatrix(2, {0.5, 0.5, 0.5, 0.5}));
  CHECK(constant.declared_period() == 1);

  const KernelFamily periodic = periodic_fixture();
  CHECK(periodic.declared_period() == 2);

  const KernelFamily cb = KernelFamily::from_callback(
      [](std::int64_t n) {
        const double eps = (n % 2 == 0) ? 0.1 : 0.2;
        return StochasticMatrix(2, {1.0 - eps, eps, eps, 1.0 - eps});
      },
      2);
  CHECK(!cb.declared_period().has_value());
  // The callback is consulted per evaluation and must be reproducible.
  CHECK(cb.at(3)(0, 1) == cb.at(3)(0, 1));
  CHECK(cb.at(4)(0, 1) == 0.1);
}

TEST_CASE("state cap rejects oversized schedules before evaluation") {
  CHECK_THROWS_AS(
      KernelFamily::from_callback(
          [](std::int64_t) { return StochasticMatrix::identity(2); }, 4097),
      std::invalid_argument);
  // An explicit higher cap is allowed.
  const KernelFamily big = KernelFamily::from_callback(
      [](std::int64_t) { return StochasticMatrix::identity(2); }, 4097, 8192);
  CHECK(big.dim() == 4097);
}

TEST_CASE("invariant family storage and the residual") {
  const KernelFamily K = periodic_fixture();

  std::vector<ProbabilityVector> measures;
  for (int j = 0; j < 6; ++j) {
    measures.push_back(ProbabilityVector(j % 2 == 0 ? fixture_mu_even()
                                                    : fixture_mu_odd()));
  }
  InvariantFamily F(0, 1, std::move(measures), ConstructionMethod::manual);
  CHECK(F.covers(0));
  CHECK(F.covers(5));
  CHECK(!F.covers(6));
  CHECK_THROWS_AS(F.at(6), std::out_of_range);

  // The true family is invariant up to roundoff.
  CHECK(invariance_residual(K, F, TimeWindow(0, 5)) <= 1e-14);

  // The deliberately wrong constant family (0.5, 0.5) is visibly not
  // invariant.  Direct oracle: pushing through P_even gives (0.55, 0.45)
  // (defect 0.1) and through P_odd gives (0.4, 0.6) (defect 0.2).
  std::vector<ProbabilityVector> wrong(6, ProbabilityVector({0.5, 0.5}));
  InvariantFamily W(0, 1, std::move(wrong), ConstructionMethod::manual);
  const double even_only = invariance_residual(K, W, TimeWindow(0, 1));
  CHECK(even_only == doctest::Approx(0.1).epsilon(1e-13));
  const double both = invariance_residual(K, W, TimeWindow(0, 5));
  CHECK(both == doctest::Approx(0.2).epsilon(1e-13));
}

TEST_CASE("strided families cover only their grid") {
  std::vector<ProbabilityVector> measures(3, ProbabilityVector({0.5, 0.5}));
  InvariantFamily F(4, 2, std::move(measures), ConstructionMethod::manual);
  CHECK(F.covers(4));
  CHECK(!F.covers(5));
  CHECK(F.covers(8));
  CHECK(F.times() == std::vector<std::int64_t>{4, 6, 8});
}

TEST_SUITE_END();
