#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergo/kernels.hpp"
#include "ergo/kv.hpp"
#include "ergo/measures.hpp"

/// Certificate layer: geometric drift verification, small-set minorization
/// search, uniform ellipticity, and the time-indexed weight-function check.
///
/// Everything here is exact finite-state verification: the defining
/// inequalities are evaluated directly (no sampling, no tolerances beyond
/// floating-point arithmetic) over an explicit window of times.  Whether a
/// window amounts to a proof depends on the schedule: constant kernels and
/// periodic kernels whose full period was touched yield
/// Coverage::exhaustive certificates; every other schedule is honestly
/// labeled Coverage::window_verified.
///
/// Certificates are re-verifiable values: each stores the data needed to
/// recompute its inequality from the kernels alone (see the recheck
/// overloads at the bottom).
namespace ergo {

/// How much of the time axis a check actually covered.
enum class Coverage { exhaustive, window_verified };

const char* to_string(Coverage c);

/// Coverage label for a check that evaluated the kernels at every index in
/// `touched` (inclusive): exhaustive for constant schedules and for periodic
/// schedules when the touched range spans at least one full period.
Coverage coverage_for_indices(const KernelFamily& K, TimeWindow touched);

// ---------------------------------------------------------------------------
// Geometric drift
// ---------------------------------------------------------------------------

/// Expected weight after one step from x: sum_y V(y) P(x, y).  Infinite
/// exactly when some y with infinite V receives positive mass.
ExtReal expected_weight(const StochasticMatrix& P, const WeightFunction& V,
                        std::size_t x);

struct DriftWitness {
  std::int64_t arrival_time = 0;  ///< n: the transition checked is n-1 -> n
  std::size_t state = 0;
  double drift_value = 0.0;  ///< sum_y V(y) P(n-1, x, n, y)
  double bound = 0.0;        ///< gamma V(x) + C
};

struct DriftCertificate {
  double gamma = 0.0;
  double C = 0.0;
  WeightFunction V;
  TimeWindow checked_window;  ///< arrival times n
  Coverage coverage = Coverage::window_verified;
  double worst_slack = 0.0;  ///< min over checked (n, x) of bound - value
  DriftWitness worst;        ///< where worst_slack is attained

  KvDocument to_kv() const;
};

struct DriftViolation {
  std::int64_t arrival_time = 0;
  std::size_t state = 0;
  double drift_value = 0.0;  ///< +infinity when mass reaches an infinite-V state
  double bound = 0.0;
  double excess = 0.0;  ///< drift_value - bound, > 0
};

struct DriftCheck {
  std::optional<DriftCertificate> certificate;  ///< set iff violations empty
  std::vector<DriftViolation> violations;       ///< every failing (n, x), by (n, x)
  bool passed() const { return certificate.has_value(); }
};

/// Checks  sum_y V(y) P(n-1, x, n, y) <= gamma V(x) + C  for every arrival
/// time n in `window` and every state x with V(x) finite.  States with
/// V(x) = +infinity satisfy the bound vacuously and are skipped on the left;
/// mass flowing *into* an infinite-V state from a finite-V state makes the
/// drift value infinite and is reported as a violation.
///
/// Requires gamma in (0, 1), C >= 0, V finite somewhere, dimensions equal.
DriftCheck verify_drift(const KernelFamily& K, const WeightFunction& V,
                        double gamma, double C, TimeWindow window);

// ---------------------------------------------------------------------------
// Small-set minorization
// ---------------------------------------------------------------------------

/// delta is capped here so that 2 (1 - delta) stays strictly positive in
/// downstream divisions.
inline constexpr double kDeltaCap = 1.0 - 1e-12;

struct MinorizationWitness {
  std::int64_t arrival_time = 0;  ///< n: rows of the product over n-n0 .. n-1
  std::size_t x = 0;              ///< worst pair in C_R
  std::size_t y = 0;
  double tv = 0.0;  ///< tv distance of the two product rows
};

struct MinorizationCertificate {
  int n0 = 1;
  double delta = 0.0;           ///< pairwise bound 1 - max_tv/2, capped at kDeltaCap
  double doeblin_overlap = 0.0; ///< min over n of sum_z min_{V(x) <= R} M_n(x, z)
  double R = 0.0;
  WeightFunction V;
  TimeWindow checked_window;  ///< arrival times n
  Coverage coverage = Coverage::window_verified;
  MinorizationWitness worst;

  KvDocument to_kv() const;
};

struct DeltaProfileEntry {
  int n0 = 0;
  double delta = 0.0;    ///< uncapped 1 - max_tv/2; may be <= 0
  double doeblin = 0.0;  ///< joint overlap for the same n0, always <= delta
};

struct MinorizationSearch {
  std::optional<MinorizationCertificate> certificate;
  std::vector<DeltaProfileEntry> profile;  ///< n0 = 1, 2, ..., last tried
  bool found() const { return certificate.has_value(); }
};

/// For n0 = 1, 2, ..., n0_max computes
///     delta(n0) = 1 - (1/2) max over arrival times n in window and pairs
///                 (x, y) with V(x) + V(y) <= R of
///                 tv_distance(row x, row y of P_{n-n0} ... P_{n-1})
/// and stops at the smallest n0 with delta(n0) >= target_delta (smaller n0
/// gives the better final rate downstream).  The Doeblin overlap
/// sum_z min_{V(x) <= R} M_n(x, z), a joint-coupling lower bound for the
/// same quantity, is reported alongside each profile entry.
///
/// Requires R > 0, target_delta in (0, 1), n0_max >= 1, and a nonempty pair
/// set C_R (throws std::domain_error otherwise; infinite-V states never
/// qualify).  On failure the full (n0, delta) profile is returned with no
/// certificate.
MinorizationSearch find_minorization(const KernelFamily& K,
                                     const WeightFunction& V, double R,
                                     double target_delta, int n0_max,
                                     TimeWindow window);

/// delta(n0) for one fixed step count (uncapped; may be <= 0).
double pairwise_delta(const KernelFamily& K, const WeightFunction& V, double R,
                      int n0, TimeWindow window);

/// Joint Doeblin overlap for one fixed step count: min over arrival times n
/// of sum_z min over x with V(x) <= R of the n0-step product entry (x, z).
double doeblin_overlap(const KernelFamily& K, const WeightFunction& V,
                       double R, int n0, TimeWindow window);

// ---------------------------------------------------------------------------
// Uniform ellipticity
// ---------------------------------------------------------------------------

/// One-step densities p_k(x, y) = P(k, x, k+1, y) / m(y) for a contiguous
/// range of kernel indices.  Entries with m(y) = 0 are stored as 0 (they are
/// only admitted when the kernel mass is 0 too).
struct DensityTable {
  std::int64_t first_index = 0;  ///< kernel index of tables[0]
  std::size_t dim = 0;
  std::vector<std::vector<double>> tables;  ///< row-major dim x dim each

  double at(std::int64_t k, std::size_t x, std::size_t y) const;
};

struct EllipticityWitness {
  std::int64_t start_time = 0;  ///< n: the two-step move n -> n+2
  std::size_t x = 0;
  std::size_t z = 0;
  double value = 0.0;  ///< P(n, x, n+2, z) / m(z)
};

struct EllipticityCertificate {
  double epsilon0 = 0.0;  ///< in (0, 1]; 1 iff the two-step law equals m
  ProbabilityVector m;
  double R = 0.0;
  WeightFunction V;
  TimeWindow checked_window;  ///< start times n of the two-step products
  Coverage coverage = Coverage::window_verified;
  EllipticityWitness worst;
  DensityTable densities;  ///< kernel indices window.lo .. window.hi + 1

  KvDocument to_kv() const;
};

struct AbsContinuityViolation {
  std::int64_t kernel_index = 0;
  std::size_t from = 0;
  std::size_t to = 0;        ///< state with m(to) = 0
  double kernel_mass = 0.0;  ///< positive mass the kernel moves into it
};

struct EllipticityCheck {
  std::optional<EllipticityCertificate> certificate;
  std::vector<AbsContinuityViolation> abs_continuity;
  /// Present when the certificate is absent for degeneracy: the minimizing
  /// (n, x, z) whose two-step value is not positive.
  std::optional<EllipticityWitness> degenerate;
  bool passed() const { return certificate.has_value(); }
};

/// Computes epsilon0 = min over start times n in window, states x with
/// V(x) <= R and states z with m(z) > 0 of  P(n, x, n+2, z) / m(z), after
/// verifying that every one-step kernel touched is absolutely continuous
/// with respect to m (no mass into states m does not charge).  A positive
/// epsilon0 certifies the two-step lower bound P(n, x, n+2, .) >= epsilon0 m.
///
/// Requires R > 0, matching dimensions, and a nonempty level set
/// {V <= R} (std::domain_error otherwise).
EllipticityCheck verify_uniform_ellipticity(const KernelFamily& K,
                                            const ProbabilityVector& m,
                                            const WeightFunction& V, double R,
                                            TimeWindow window);

// ---------------------------------------------------------------------------
// Time-indexed weight functions
// ---------------------------------------------------------------------------

/// Candidate time-indexed weight V(n, x) with a declared supremum envelope
/// and a lower envelope f:
///
///   - sup_envelope(x) declares sup_n V(n, x); the bounded set is
///     B = {x : sup_envelope(x) < infinity}.
///   - the optional table stores V(n, .) for consecutive n (time-dependent
///     candidates); a constant spec uses one function for every n.
///   - lower_envelope f satisfies V(n, x) >= f(x) >= 0 (checked, not assumed).
class LyapunovSpec {
 public:
  /// Time-constant candidate: V(n, .) = V for all n, envelope = V.
  static LyapunovSpec constant(WeightFunction V, WeightFunction f);

  /// Tabulated candidate: table[k] is V(first_time + k, .).  The declared
  /// sup envelope must be supplied explicitly (it is what item (i) checks);
  /// coherence with the stored table is verified by the checker.
  static LyapunovSpec tabulated(WeightFunction sup_envelope,
                                std::int64_t first_time,
                                std::vector<WeightFunction> table,
                                WeightFunction f);

  bool is_constant() const { return table_.empty(); }
  /// V(n, .); throws std::out_of_range when a tabulated spec does not
  /// store time n.
  const WeightFunction& value_at(std::int64_t n) const;
  /// Stored time range for tabulated specs; for constant specs any n.
  bool stores(std::int64_t n) const;

  const WeightFunction& sup_envelope() const { return sup_; }
  const WeightFunction& lower_envelope() const { return f_; }
  std::size_t state_count() const { return sup_.size(); }
  std::int64_t first_time() const { return first_; }
  std::int64_t last_time() const;

 private:
  LyapunovSpec(WeightFunction sup, std::int64_t first,
               std::vector<WeightFunction> table, WeightFunction f);

  WeightFunction sup_;
  std::int64_t first_ = 0;
  std::vector<WeightFunction> table_;
  WeightFunction f_;
};

struct LyapunovItem {
  bool passed = false;
  std::string detail;  ///< witness or note, human-readable
};

struct LyapunovCheck {
  LyapunovItem bounded_site;  ///< (i) B nonempty (and envelope dominates table)
  LyapunovItem envelope;      ///< (ii) V(n, x) >= f(x) on stored data
  LyapunovItem drift;         ///< (iii) time-indexed drift on B
  std::vector<std::size_t> bounded_states;  ///< B, ascending
  /// On a finite state space every level set of f is trivially compact, so
  /// the level-set demand of item (ii) carries no content; it is recorded
  /// here instead of silently passed.
  bool compactness_vacuous = true;
  std::string compactness_note;
  Coverage coverage = Coverage::window_verified;

  bool passed() const {
    return bounded_site.passed && envelope.passed && drift.passed;
  }
};

/// Checks the three defining items of a time-indexed weight function:
///   (i)   B = {x : sup_n V(n, x) < infinity} is nonempty, using the declared
///         envelope, which must dominate every stored table value;
///   (ii)  V(n, x) >= f(x) for all stored (n, x);
///   (iii) sum_y V(n, y) P(n-1, x, n, y) <= gamma V(n-1, x) + C for every
///         arrival time n in window and every x in B.
/// Tabulated specs must store V for all of [window.lo - 1, window.hi].
///
/// Requires gamma in (0, 1) and C >= 0.
LyapunovCheck verify_lyapunov_definition(const KernelFamily& K,
                                         const LyapunovSpec& L, double gamma,
                                         double C, TimeWindow window);

// ---------------------------------------------------------------------------
// Re-verification
// ---------------------------------------------------------------------------

/// Recompute each certified inequality from the kernels and the data stored
/// in the certificate.  True iff the recomputation reproduces the stored
/// claim (worst slack, delta and overlap, epsilon0 and densities) exactly —
/// the recomputation is deterministic, so agreement is bitwise.
bool recheck(const DriftCertificate& cert, const KernelFamily& K);
bool recheck(const MinorizationCertificate& cert, const KernelFamily& K);
bool recheck(const EllipticityCertificate& cert, const KernelFamily& K);

}  // namespace ergo
