#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergo/kernels.hpp"
#include "ergo/measures.hpp"

namespace ergo {

/// How a family-construction run ended and what it measured on the way.
///
/// status values:
///   "converged"        - the Cauchy gap between successive doublings fell
///                        to the tolerance (final_gap <= tol),
///   "budget_exhausted" - the iteration budget ran out first; the family
///                        holds the best iterate,
///   "nonunique"        - (backward limit only) the iteration is Cauchy but
///                        two distinct start states disagree, so no
///                        start-independent family exists.
struct ConvergenceDiagnostics {
  std::string method;
  std::string status;
  std::int64_t iterations = 0;  ///< final s (Cesaro) or m (backward limit)
  double final_gap = 0.0;       ///< last Cauchy gap in TV between doublings
  std::vector<double> per_time_residuals;  ///< tv(mu_n P_n, mu_{n+1}) per stored n
  std::vector<double> decay_profile;       ///< Cauchy gap after each doubling
  double start_sensitivity = 0.0;  ///< backward limit: final TV gap between start states
  bool heuristic = false;  ///< backward limit invoked without a weight-function check

  bool converged() const { return status == "converged"; }
};

struct ConstructionResult {
  InvariantFamily family;
  ConvergenceDiagnostics diagnostics;
};

/// Builds an invariant family by Cesaro-averaging the pushed seed:
///
///   mu_{n,s} = (1/s) * sum_{i=0}^{s-1} (mu pushed from time n-i to n),
///
/// doubling s and stopping when the TV gap between the averages at s and 2s
/// drops to tol at every time in `times`, or the budget s_max is reached
/// (the best iterate is returned either way).
///
/// Schedules with a declared period p are reduced per residue class n mod p
/// and advanced by exact block-sum doubling (cost O(log2(s_max) * p * d^3)),
/// so generous budgets are cheap there. Window and callback schedules run
/// the literal streaming recurrence at O(s_max * |times| * d^3): choose
/// s_max accordingly.
ConstructionResult krylov_bogolyubov_family(const KernelFamily& K,
                                            const ProbabilityVector& mu, TimeWindow times,
                                            std::int64_t s_max = std::int64_t{1} << 20,
                                            double tol = 1e-9);

/// Builds an invariant family as the backward limit of point-mass rows:
/// the x-row of the m-step product ending at n, doubling m until successive
/// doublings agree within tol at every time in `times`.
///
/// A second start state (x+1 mod d) is tracked as a sentinel: if the
/// iteration is Cauchy but the two starts disagree by more than tol, the
/// limit is start-dependent and the run is reported "nonunique" instead of
/// converged (the x-family is still returned for inspection, with the
/// disagreement in start_sensitivity).
///
/// Passing the weight function of an active drift certificate checks the
/// hypothesis V(x) < infinity (std::domain_error otherwise); omitting it
/// marks the diagnostics as heuristic.
ConstructionResult backward_limit_family(const KernelFamily& K, std::size_t x,
                                         TimeWindow times,
                                         std::int64_t m_max = std::int64_t{1} << 20,
                                         double tol = 1e-9,
                                         const std::optional<WeightFunction>& V = std::nullopt);

/// Extends a family living on a stride-n0 sub-grid to every time in `times`
/// by pushing forward from the nearest grid point at or below. Whenever a
/// second grid point below exists, the value is recomputed from it and the
/// two pushes must agree within tol — the push-forward of a genuinely
/// invariant sub-grid family does not depend on the base point.
///
/// Throws std::runtime_error when the cross-check disagrees (the sub-grid
/// family was not invariant) and std::invalid_argument when `times` starts
/// before the grid does.
InvariantFamily extend_family(const KernelFamily& K, const InvariantFamily& F,
                              TimeWindow times, double tol = 1e-9);

/// Result of a periodicity scan: the smallest exact period within
/// tolerance, if any, plus the full defect table
///
///   defects[p-1] = max over stored n of tv(mu_{n+p}, mu_n),  p = 1..p_max,
///
/// which is the almost-period profile of the family (near-periods show up
/// as small defects even when no exact period exists).
struct PeriodScan {
  std::optional<std::int64_t> period;
  std::vector<double> defects;
};

/// Scans a unit-stride family storing at least 2*p_max measures for the
/// smallest period p <= p_max with defect <= tol. Absence of a period is a
/// valid result: the optional stays empty and the table is still complete.
PeriodScan periodicity_scan(const InvariantFamily& F, std::int64_t p_max, double tol);

}  // namespace ergo
