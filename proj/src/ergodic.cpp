#include "ergo/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace ergo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::int64_t true_mod(std::int64_t n, std::int64_t p) { return ((n % p) + p) % p; }

/// TV distance between a/fa and b/fb given as raw nonnegative vectors with
/// their normalizers, without constructing probability vectors.
double scaled_tv(const std::vector<double>& a, double fa, const std::vector<double>& b,
                 double fb) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] / fa - b[i] / fb);
  return total;
}

std::vector<double> per_time_residuals(const KernelFamily& K, const InvariantFamily& F) {
  std::vector<double> residuals;
  if (F.count() < 2 || F.stride() != 1) return residuals;
  residuals.reserve(F.count() - 1);
  for (std::int64_t n = F.start(); n < F.last(); ++n)
    residuals.push_back(tv_distance(push_measure(K, F.at(n), n, n + 1), F.at(n + 1)));
  return residuals;
}

InvariantFamily finish_family(const KernelFamily& K, TimeWindow times,
                              std::vector<ProbabilityVector> measures,
                              ConstructionMethod method, ConvergenceDiagnostics& diag) {
  InvariantFamily family(times.lo, 1, std::move(measures), method);
  family.set_residual(invariance_residual(K, family, times));
  diag.per_time_residuals = per_time_residuals(K, family);
  return family;
}

}  // namespace

ConstructionResult krylov_bogolyubov_family(const KernelFamily& K,
                                            const ProbabilityVector& mu, TimeWindow times,
                                            std::int64_t s_max, double tol) {
  if (mu.size() != K.dim())
    throw std::invalid_argument("krylov_bogolyubov_family: seed dimension mismatch");
  if (s_max < 1) throw std::invalid_argument("krylov_bogolyubov_family: s_max must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("krylov_bogolyubov_family: tol must be positive");

  ConvergenceDiagnostics diag;
  diag.method = "cesaro";
  diag.status = "budget_exhausted";
  diag.final_gap = kInf;

  const std::size_t d = K.dim();
  const std::int64_t len = times.length();
  std::int64_t s = 1;
  std::vector<ProbabilityVector> measures;
  measures.reserve(static_cast<std::size_t>(len));

  if (const auto period = K.declared_period()) {
    // Reduce to one Cesaro sum per residue class and advance by exact
    // block-sum doubling: with T_{r,s} the unnormalized sum of the first s
    // pushed measures ending at residue r, and B_{r,s} the s-step product,
    //   T_{r,2s} = T_{r,s} + T_{r-s,s} B_{r,s},  B_{r,2s} = B_{r-s,s} B_{r,s}.
    const std::int64_t p = *period;
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(p), mu.weights());
    std::vector<StochasticMatrix> blocks;
    blocks.reserve(static_cast<std::size_t>(p));
    for (std::int64_t r = 0; r < p; ++r) blocks.push_back(K.at(r - 1));

    while (s < s_max) {
      std::vector<std::vector<double>> next_sums(static_cast<std::size_t>(p));
      std::vector<StochasticMatrix> next_blocks;
      next_blocks.reserve(static_cast<std::size_t>(p));
      for (std::int64_t r = 0; r < p; ++r) {
        const std::size_t shifted = static_cast<std::size_t>(true_mod(r - s, p));
        const std::size_t ur = static_cast<std::size_t>(r);
        next_sums[ur] = blocks[ur].apply_to_measure(sums[shifted]);
        for (std::size_t j = 0; j < d; ++j) next_sums[ur][j] += sums[ur][j];
        next_blocks.push_back(blocks[shifted] * blocks[ur]);
      }
      double gap = 0.0;
      for (std::int64_t r = 0; r < p; ++r) {
        const std::size_t ur = static_cast<std::size_t>(r);
        gap = std::max(gap, scaled_tv(sums[ur], static_cast<double>(s), next_sums[ur],
                                      static_cast<double>(2 * s)));
      }
      sums = std::move(next_sums);
      blocks = std::move(next_blocks);
      s *= 2;
      diag.decay_profile.push_back(gap);
      diag.final_gap = gap;
      if (gap <= tol) {
        diag.status = "converged";
        break;
      }
    }

    for (std::int64_t n = times.lo; n <= times.hi; ++n) {
      std::vector<double> w = sums[static_cast<std::size_t>(true_mod(n, p))];
      for (double& v : w) v /= static_cast<double>(s);
      measures.emplace_back(std::move(w));
    }
  } else {
    // Literal streaming recurrence, one running sum per requested time:
    // term i is mu applied to the i-step product ending at n, built by
    // prepending one kernel per term.
    std::vector<StochasticMatrix> prods(static_cast<std::size_t>(len),
                                        StochasticMatrix::identity(d));
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(len), mu.weights());

    while (s < s_max) {
      const std::vector<std::vector<double>> snapshot = sums;
      for (std::int64_t i = s; i < 2 * s; ++i) {
        for (std::int64_t k = 0; k < len; ++k) {
          const std::size_t uk = static_cast<std::size_t>(k);
          const std::int64_t n = times.lo + k;
          prods[uk] = K.at(n - i) * prods[uk];
          const std::vector<double> term = prods[uk].apply_to_measure(mu.weights());
          for (std::size_t j = 0; j < d; ++j) sums[uk][j] += term[j];
        }
      }
      double gap = 0.0;
      for (std::int64_t k = 0; k < len; ++k)
        gap = std::max(gap, scaled_tv(snapshot[static_cast<std::size_t>(k)],
                                      static_cast<double>(s),
                                      sums[static_cast<std::size_t>(k)],
                                      static_cast<double>(2 * s)));
      s *= 2;
      diag.decay_profile.push_back(gap);
      diag.final_gap = gap;
      if (gap <= tol) {
        diag.status = "converged";
        break;
      }
    }

    for (std::int64_t k = 0; k < len; ++k) {
      std::vector<double> w = sums[static_cast<std::size_t>(k)];
      for (double& v : w) v /= static_cast<double>(s);
      measures.emplace_back(std::move(w));
    }
  }

  diag.iterations = s;
  InvariantFamily family =
      finish_family(K, times, std::move(measures), ConstructionMethod::cesaro, diag);
  return ConstructionResult{std::move(family), std::move(diag)};
}

ConstructionResult backward_limit_family(const KernelFamily& K, std::size_t x,
                                         TimeWindow times, std::int64_t m_max, double tol,
                                         const std::optional<WeightFunction>& V) {
  if (x >= K.dim())
    throw std::invalid_argument("backward_limit_family: start state out of range");
  if (m_max < 1) throw std::invalid_argument("backward_limit_family: m_max must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("backward_limit_family: tol must be positive");
  if (V) {
    if (V->size() != K.dim())
      throw std::invalid_argument("backward_limit_family: weight dimension mismatch");
    if (!V->is_finite(x))
      throw std::domain_error(
          "backward_limit_family: V(x) is infinite; pick a start in the finite-weight set");
  }

  ConvergenceDiagnostics diag;
  diag.method = "backward_limit";
  diag.status = "budget_exhausted";
  diag.final_gap = kInf;
  diag.heuristic = !V.has_value();

  const std::size_t d = K.dim();
  const std::size_t x2 = (x + 1) % d;
  const std::int64_t len = times.length();

  // rows[k] = the x-row of the current product ending at times.lo + k.
  const auto rows_of = [&](const std::vector<StochasticMatrix>& prods, std::size_t row,
                           const std::vector<std::size_t>& slot) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(len));
    for (std::int64_t k = 0; k < len; ++k) {
      const StochasticMatrix& M = prods[slot[static_cast<std::size_t>(k)]];
      out[static_cast<std::size_t>(k)].assign(M.row(row).begin(), M.row(row).end());
    }
    return out;
  };

  std::vector<StochasticMatrix> prods;
  std::vector<std::size_t> slot(static_cast<std::size_t>(len));  // time index -> product index
  std::int64_t m = 1;

  const auto period = K.declared_period();
  if (period) {
    const std::int64_t p = *period;
    prods.reserve(static_cast<std::size_t>(p));
    for (std::int64_t r = 0; r < p; ++r) prods.push_back(K.at(r - 1));
    for (std::int64_t k = 0; k < len; ++k)
      slot[static_cast<std::size_t>(k)] = static_cast<std::size_t>(true_mod(times.lo + k, p));
  } else {
    prods.reserve(static_cast<std::size_t>(len));
    for (std::int64_t k = 0; k < len; ++k) {
      prods.push_back(K.at(times.lo + k - 1));
      slot[static_cast<std::size_t>(k)] = static_cast<std::size_t>(k);
    }
  }

  std::vector<std::vector<double>> prev = rows_of(prods, x, slot);
  while (m < m_max) {
    if (period) {
      // Exact product doubling per residue: B_{r,2m} = B_{r-m,m} B_{r,m}.
      const std::int64_t p = *period;
      std::vector<StochasticMatrix> next;
      next.reserve(static_cast<std::size_t>(p));
      for (std::int64_t r = 0; r < p; ++r)
        next.push_back(prods[static_cast<std::size_t>(true_mod(r - m, p))] *
                       prods[static_cast<std::size_t>(r)]);
      prods = std::move(next);
    } else {
      // Literal route: prepend kernels one at a time until the step count
      // doubles.
      for (std::int64_t i = m + 1; i <= 2 * m; ++i)
        for (std::int64_t k = 0; k < len; ++k) {
          const std::size_t uk = static_cast<std::size_t>(k);
          prods[uk] = K.at(times.lo + k - i) * prods[uk];
        }
    }
    m *= 2;

    const std::vector<std::vector<double>> cur = rows_of(prods, x, slot);
    double gap = 0.0;
    for (std::int64_t k = 0; k < len; ++k) {
      const std::size_t uk = static_cast<std::size_t>(k);
      gap = std::max(gap, scaled_tv(prev[uk], 1.0, cur[uk], 1.0));
    }
    prev = cur;
    diag.decay_profile.push_back(gap);
    diag.final_gap = gap;

    if (gap <= tol) {
      const std::vector<std::vector<double>> other = rows_of(prods, x2, slot);
      double cross = 0.0;
      for (std::int64_t k = 0; k < len; ++k) {
        const std::size_t uk = static_cast<std::size_t>(k);
        cross = std::max(cross, scaled_tv(prev[uk], 1.0, other[uk], 1.0));
      }
      diag.start_sensitivity = cross;
      diag.status = cross <= tol ? "converged" : "nonunique";
      break;
    }
  }
  if (diag.status == "budget_exhausted") {
    const std::vector<std::vector<double>> other = rows_of(prods, x2, slot);
    double cross = 0.0;
    for (std::int64_t k = 0; k < len; ++k) {
      const std::size_t uk = static_cast<std::size_t>(k);
      cross = std::max(cross, scaled_tv(prev[uk], 1.0, other[uk], 1.0));
    }
    diag.start_sensitivity = cross;
  }
  diag.iterations = m;

  std::vector<ProbabilityVector> measures;
  measures.reserve(static_cast<std::size_t>(len));
  for (std::int64_t k = 0; k < len; ++k)
    measures.emplace_back(prev[static_cast<std::size_t>(k)]);

  InvariantFamily family = finish_family(K, times, std::move(measures),
                                         ConstructionMethod::backward_limit, diag);
  return ConstructionResult{std::move(family), std::move(diag)};
}

InvariantFamily extend_family(const KernelFamily& K, const InvariantFamily& F,
                              TimeWindow times, double tol) {
  if (F.state_count() != K.dim())
    throw std::invalid_argument("extend_family: family dimension mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("extend_family: tol must be positive");
  if (times.lo < F.start())
    throw std::invalid_argument("extend_family: target times precede the family grid");

  const std::int64_t stride = F.stride();
  const std::int64_t count = static_cast<std::int64_t>(F.count());

  std::vector<ProbabilityVector> measures;
  measures.reserve(static_cast<std::size_t>(times.length()));
  for (std::int64_t n = times.lo; n <= times.hi; ++n) {
    std::int64_t k = (n - F.start()) / stride;
    if (k >= count) k = count - 1;
    const std::int64_t base = F.start() + k * stride;
    ProbabilityVector pushed = push_measure(K, F.at(base), base, n);
    if (k >= 1) {
      const std::int64_t lower = base - stride;
      const ProbabilityVector alt = push_measure(K, F.at(lower), lower, n);
      const double disagreement = tv_distance(pushed, alt);
      if (disagreement > tol)
        throw std::runtime_error(
            "extend_family: pushes from adjacent grid points disagree (TV " +
            std::to_string(disagreement) +
            "); the sub-grid family is not invariant");
    }
    measures.push_back(std::move(pushed));
  }

  InvariantFamily out(times.lo, 1, std::move(measures), ConstructionMethod::extension);
  out.set_residual(invariance_residual(K, out, times));
  return out;
}

PeriodScan periodicity_scan(const InvariantFamily& F, std::int64_t p_max, double tol) {
  if (p_max < 1) throw std::invalid_argument("periodicity_scan: p_max must be >= 1");
  if (F.stride() != 1)
    throw std::invalid_argument("periodicity_scan: the family must have unit stride");
  if (static_cast<std::int64_t>(F.count()) < 2 * p_max)
    throw std::invalid_argument(
        "periodicity_scan: the family must store a window of length >= 2*p_max");
  if (!(tol >= 0.0)) throw std::invalid_argument("periodicity_scan: tol must be nonnegative");

  PeriodScan scan;
  scan.defects.reserve(static_cast<std::size_t>(p_max));
  for (std::int64_t p = 1; p <= p_max; ++p) {
    double defect = 0.0;
    for (std::int64_t n = F.start(); n + p <= F.last(); ++n)
      defect = std::max(defect, tv_distance(F.at(n + p), F.at(n)));
    scan.defects.push_back(defect);
    if (!scan.period && defect <= tol) scan.period = p;
  }
  return scan;
}

}  // namespace ergo
