#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergo/certificates.hpp"
#include "ergo/kernels.hpp"
#include "ergo/kv.hpp"
#include "ergo/measures.hpp"

namespace ergo {

/// Explicit contraction constants assembled from a drift certificate
/// (gamma, C) and a minorization certificate (n0, delta at level R).
///
/// Defining relations, satisfied exactly as stored:
///   - (1 - gamma) * (gamma_star - gamma) * R >= 2 * C  (level-set selection),
///   - beta   = delta / (gamma * R + 2 * C / (1 - gamma)),
///   - alpha1 = (2 + beta * gamma_star * R) / (2 + beta * R),
///   - eta    = max(alpha1, 1 - delta / 2),
///   - alpha  = eta^(1/n0),
/// with gamma_star in (gamma, 1) and beta, alpha1, eta, alpha all in (0, 1).
///
/// The audit trail M1..M4 tracks the prefactor of the weighted-norm decay
///   ||P^(m) phi - <mu_n, phi>|| <= M4 * alpha^m * ||phi||:
///   - M1 = max(3 + beta * C / (1 - gamma), beta): centering a function at an
///     invariant measure costs at most this much oscillation seminorm,
///   - norm_equivalence = max(1, 1/beta): ||.||_beta <= norm_equivalence * ||.||,
///   - M2 = M1 * norm_equivalence,
///   - M3 = 1 + C / (1 - gamma): partial-block growth of the weighted norm,
///   - M4 = M2 * M3 / eta: the 1/eta absorbs the incomplete block of a
///     general step count m = k * n0 + r.
/// M_tilde = M4 is the total-variation prefactor: pairing with |phi| <= 1
/// (which has weighted norm at most 1) gives
///   tv(P(n-m, x, n, .), mu_n) <= M_tilde * alpha^m * (1 + V(x)).
struct ContractionConstants {
  double gamma = 0.0;
  double C = 0.0;
  double gamma_star = 0.0;
  double R = 0.0;
  int n0 = 0;
  double delta = 0.0;
  double beta = 0.0;
  double alpha1 = 0.0;
  double eta = 0.0;
  double alpha = 0.0;

  // Audit trail for the decay prefactor.
  double M1 = 0.0;
  double norm_equivalence = 0.0;
  double M2 = 0.0;
  double M3 = 0.0;
  double M4 = 0.0;
  double M_tilde = 0.0;

  /// Coverage label and arrival-time window inherited from the minorization
  /// certificate the constants were assembled from.
  Coverage coverage = Coverage::window_verified;
  TimeWindow minorization_window{0, 0};

  /// Flat key-value rendering of every constant, for reports.
  KvDocument to_kv() const;
};

/// Assembles contraction constants by direct substitution from
/// already-certified ingredients. Pure arithmetic: no kernel access.
///
/// Throws std::invalid_argument unless gamma in (0,1), C > 0,
/// gamma_star in (gamma, 1), R > 0 satisfying the selection inequality,
/// delta in (0,1), and n0 >= 1.
ContractionConstants contraction_from_parts(double gamma, double C, double gamma_star,
                                            double R, int n0, double delta,
                                            Coverage coverage, TimeWindow minorization_window);

/// True iff the stored constants satisfy the defining relations bitwise:
/// re-deriving every dependent field from (gamma, C, gamma_star, R, n0, delta)
/// reproduces the stored values exactly, and all range constraints hold.
bool constants_consistent(const ContractionConstants& cc);

/// Outcome of derive_constants. When the minorization search fails, the
/// constants are absent but the full search (including the per-n0 delta
/// profile) is retained so the caller can decide how to relax gamma_star.
struct ConstantsResult {
  std::optional<ContractionConstants> constants;
  MinorizationSearch minorization;

  bool ok() const { return constants.has_value(); }
};

/// Derives contraction constants from a drift certificate:
///   1. gamma_star - midpoint (1 + gamma) / 2 unless overridden,
///   2. R = 2C / ((1 - gamma)(gamma_star - gamma)), the smallest level
///      compatible with the selection inequality (nudged up by ulps so the
///      inequality holds in floating point),
///   3. minorization search at level R over the certificate's window,
///   4. assembly via contraction_from_parts.
///
/// The weight function and arrival window come from the certificate itself.
/// Requires drift.C > 0 (the level formula degenerates at C = 0) and any
/// override gamma_star in (gamma, 1); throws std::invalid_argument otherwise.
ConstantsResult derive_constants(const DriftCertificate& drift, const KernelFamily& K,
                                 double target_delta = 0.05, int n0_max = 64,
                                 std::optional<double> gamma_star = std::nullopt);

/// One row of a gamma_star sweep: the final rate alpha is not monotone in
/// gamma_star (larger gamma_star shrinks R, which can destroy or improve the
/// minorization), so callers pick the knob by inspecting a grid.
struct GammaStarSweepEntry {
  double gamma_star = 0.0;
  bool ok = false;
  double R = 0.0;
  int n0 = 0;
  double delta = 0.0;
  double alpha = 0.0;
  double M_tilde = 0.0;
  std::string note;
};

/// Runs derive_constants once per grid point and tabulates the outcomes.
/// Invalid grid points (outside (gamma, 1)) are reported with ok = false
/// rather than thrown, so exploratory grids need no pre-filtering.
std::vector<GammaStarSweepEntry> sweep_gamma_star(const DriftCertificate& drift,
                                                  const KernelFamily& K,
                                                  double target_delta, int n0_max,
                                                  const std::vector<double>& gamma_stars);

/// Empirical check of the oscillation contraction: for random test functions
/// phi and end times n in the window, the n0-step product must shrink the
/// beta-oscillation seminorm by at least the certified factor eta.
struct OscillationReport {
  double max_ratio = 0.0;       ///< largest observed seminorm ratio
  std::int64_t worst_time = 0;  ///< end time attaining max_ratio
  int evaluated = 0;            ///< trials with a nonzero input seminorm
  int skipped = 0;              ///< trials skipped because the seminorm was zero
  double eta = 0.0;             ///< certified factor, copied from the constants

  /// Contract: every observed ratio is at most eta, up to roundoff slack.
  bool within_contract() const { return max_ratio <= eta + 1e-9; }
};

/// Draws `trials` random test functions (componentwise uniform, scaled by
/// 1 + V so all magnitudes are exercised), cycles end times through the
/// window, and reports the worst seminorm ratio across n0-step products.
/// Functions with zero oscillation seminorm carry no information and are
/// counted as skipped. Deterministic for a fixed seed.
OscillationReport verify_oscillation_contraction(const KernelFamily& K,
                                                 const ContractionConstants& cc,
                                                 const WeightFunction& V, int trials,
                                                 TimeWindow window,
                                                 std::uint64_t seed = 0x0b5e55edULL);

/// One row of a total-variation decay table.
struct DecayRow {
  std::int64_t m = 0;              ///< number of steps
  double observed_tv = 0.0;        ///< tv(P(n-m, x, n, .), mu_n)
  double theoretical_bound = 0.0;  ///< M_tilde * alpha^m * (1 + V(x))
};

/// Observed-vs-certified total-variation decay from a point mass.
struct TvRateReport {
  std::vector<DecayRow> table;  ///< rows m = 0..m_max
  std::size_t state = 0;        ///< start state x
  std::int64_t arrival_time = 0;
  double V_x = 0.0;             ///< V(x), the weight in the bound

  double fitted_rate = 0.0;  ///< least-squares slope of log(observed) per step
  double log_alpha = 0.0;    ///< log of the certified rate, for comparison
  std::int64_t fit_first_m = -1;  ///< first step used in the fit (-1: none)
  std::int64_t fit_last_m = -1;   ///< last step used in the fit
  std::size_t fit_points = 0;     ///< number of points used in the fit

  bool bound_satisfied = true;      ///< observed <= bound at every m
  bool rate_within_contract = false;  ///< fitted_rate <= log_alpha + 0.01
  /// Largest observed_tv / (alpha^m * (1 + V(x))): the best prefactor this
  /// data would support. Reported for comparison only; the certified
  /// M_tilde is never replaced by it.
  double empirical_prefactor = 0.0;
};

/// Tabulates tv(P(n-m, x, n, .), mu_n) against the certified bound
/// M_tilde * alpha^m * (1 + V(x)) for m = 0..m_max, then fits a decay rate
/// to the log of the observed values. The fit discards leading transient
/// points (observed >= 0.5 * initial) and points below the 1e-12 noise
/// floor; if that leaves fewer than two points, it falls back to all
/// above-floor points except m = 0, and reports -infinity when even those
/// run out (observed decay faster than any measurable rate).
///
/// Throws std::domain_error if V(x) is infinite (the bound is vacuous) and
/// std::invalid_argument if the family does not cover n, dimensions
/// disagree, or m_max < 0.
TvRateReport tv_rate_check(const KernelFamily& K, const InvariantFamily& F,
                           const ContractionConstants& cc, const WeightFunction& V,
                           std::size_t x, std::int64_t n, std::int64_t m_max);

}  // namespace ergo
