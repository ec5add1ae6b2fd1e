#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ergo/kernels.hpp"

namespace ergo {

/// Scalar field V: R^n -> R with optional analytic spatial derivatives.
/// When `gradient` or `hessian` is absent, apply_generator falls back to
/// central finite differences (step 1e-5 (1 + |x|) for the gradient,
/// 1e-4 (1 + |x|) for the Hessian, |x| the Euclidean norm).
struct ScalarField {
  std::function<double(const std::vector<double>&)> value;
  /// Optional: x -> grad V(x), length n.
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
  /// Optional: x -> Hess V(x), row-major n*n.
  std::function<std::vector<double>(const std::vector<double>&)> hessian;
};

/// Time-inhomogeneous SDE  dX = f(t, X) dt + g(t, X) dB  on R^n (or on
/// [0, inf)^n when reflect_at_zero is set; reflection folds each coordinate
/// through |.| after every step).  Callbacks must be pure: the same (t, x)
/// must always produce the same value, or reproducibility is lost.
struct SdeModel {
  std::size_t dimension = 1;
  /// (t, x) -> drift vector f, length n (state per unit time).
  std::function<std::vector<double>(double, const std::vector<double>&)> drift;
  /// (t, x) -> diffusion matrix g, row-major n*n (state per sqrt time).
  std::function<std::vector<double>(double, const std::vector<double>&)> diffusion;
  /// Optional Lyapunov candidate carried with the model.
  std::optional<ScalarField> lyapunov;
  /// Claimed ellipticity floor lambda >= 0 for g g^T (see check_nondegeneracy).
  double ellipticity_floor = 0.0;
  bool reflect_at_zero = false;
  /// Candidate almost-periods of the coefficients, for downstream scans.
  std::vector<double> almost_period_hints;
};

/// Thrown when a simulated path leaves the representable range: carries the
/// first failing path index and step number.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(std::size_t path, std::size_t step, double time);
  std::size_t path() const { return path_; }
  std::size_t step() const { return step_; }
  double time() const { return time_; }

 private:
  std::size_t path_;
  std::size_t step_;
  double time_;
};

/// Whether euler_maruyama records every grid point or only the endpoints.
enum class PathStorage { full, terminal_only };

/// A batch of simulated paths on a shared time grid.  `states` is path-major:
/// state(p, k, i) is coordinate i of path p at times[k].  With
/// PathStorage::terminal_only only times {s, t} and the matching two points
/// per path are kept.
struct TrajectoryBatch {
  std::vector<double> times;
  std::size_t batch = 0;
  std::size_t dimension = 1;
  double dt = 0.0;  ///< nominal step (the last step may be shorter)
  std::uint64_t seed = 0;

  std::vector<double> states;

  double state(std::size_t path, std::size_t k, std::size_t i) const {
    return states[(path * times.size() + k) * dimension + i];
  }
  std::vector<double> point(std::size_t path, std::size_t k) const;
  std::vector<double> terminal(std::size_t path) const;
};

/// Simulates `batch` Euler-Maruyama paths of `model` from x0 at time s to
/// time t:  X_{k+1} = X_k + f(t_k, X_k) h_k + g(t_k, X_k) sqrt(h_k) Z_k with
/// i.i.d. standard normal Z_k and coefficients frozen at the left endpoint.
/// The grid uses step dt; when dt does not divide t - s within 1e-12 the
/// last step is shortened to land on t exactly.  Path p draws from the
/// dedicated stream CounterRng(seed, p), so results are independent of
/// evaluation order and bit-reproducible for identical inputs.
///
/// Throws std::invalid_argument on bad arguments and BlowUpError when a path
/// produces a non-finite coordinate.
TrajectoryBatch euler_maruyama(const SdeModel& model, const std::vector<double>& x0,
                               double s, double t, double dt, std::int64_t batch,
                               std::uint64_t seed,
                               PathStorage storage = PathStorage::full);

/// Uniform 1-d histogram grid over [lo, hi) with `cells` equal bins.
struct SpatialGrid {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t cells = 1;

  double width() const { return (hi - lo) / static_cast<double>(cells); }
  double center(std::size_t i) const {
    return lo + (static_cast<double>(i) + 0.5) * width();
  }
  /// Bin index for x, or nullopt when x lies outside [lo, hi).
  std::optional<std::size_t> locate(double x) const;
};

/// Histogram estimate of the transition kernel P(s, cell_x, t, cell_y) of a
/// scalar model: one simulated batch per source cell, terminal states binned
/// on the same grid.  Mass landing outside the grid is tracked per row (below
/// lo / above hi separately) and reported as the final "overflow" column of
/// `probabilities`; `half_widths` carries 95% Wilson-interval half-widths for
/// every probability including the overflow column.
struct EmpiricalKernel {
  SpatialGrid grid;
  double s = 0.0;
  double t = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::int64_t samples_per_row = 0;

  std::vector<std::uint64_t> counts;        ///< cells x cells, in-grid hits
  std::vector<std::uint64_t> escaped_low;   ///< per row, terminal < lo
  std::vector<std::uint64_t> escaped_high;  ///< per row, terminal >= hi
  std::vector<double> probabilities;        ///< cells x (cells + 1), rows sum to 1
  std::vector<double> half_widths;          ///< cells x (cells + 1)

  double probability(std::size_t row, std::size_t col) const {
    return probabilities[row * (grid.cells + 1) + col];
  }
  double half_width(std::size_t row, std::size_t col) const {
    return half_widths[row * (grid.cells + 1) + col];
  }
  double overflow_mass(std::size_t row) const {
    return probability(row, grid.cells);
  }
  double max_overflow() const;

  /// In-grid transition matrix: escaped-low mass is folded into the first
  /// cell and escaped-high mass into the last (the nearest in-grid states),
  /// so each row remains a probability vector.
  StochasticMatrix to_matrix() const;
};

/// Estimates the transition kernel of a 1-d model on `grid` between times s
/// and t by simulating `samples_per_cell` Euler-Maruyama paths (step dt) from
/// each cell center.  Cell i draws from streams derived from
/// derive_stream(seed, i), so rows are independent and reproducible.
///
/// Throws std::invalid_argument for non-scalar models, samples_per_cell < 100
/// or bad grid/time arguments, and std::runtime_error when any row's escaped
/// mass exceeds max_overflow (grid too small for the dynamics).
EmpiricalKernel estimate_kernel(const SdeModel& model, const SpatialGrid& grid,
                                double s, double t, double dt,
                                std::int64_t samples_per_cell, std::uint64_t seed,
                                double max_overflow = 0.01);

/// Evaluates the generator  (L V)(t, x) = sum_ij a_ij d2V/dx_i dx_j
/// + sum_i f_i dV/dx_i  with a = (1/2) g g^T, for a time-independent V (the
/// d/dt term vanishes).  Uses V's analytic derivatives when present, central
/// finite differences otherwise; derivative callback failures surface as
/// std::runtime_error.
double apply_generator(const SdeModel& model, const ScalarField& V, double t,
                       const std::vector<double>& x);

/// One Monte Carlo probe of the drift inequality at (s, t, x).
struct DriftProbePoint {
  double s = 0.0;
  double t = 0.0;
  std::vector<double> x;
};

struct DriftProbeResult {
  DriftProbePoint point;
  double estimate = 0.0;        ///< sample mean of V(X_t) from X_s = x
  double std_error = 0.0;       ///< standard error of that mean
  double bound = 0.0;           ///< e^{-c (t - s)} V(x)
  double bias_allowance = 0.0;  ///< kappa * dt from the Richardson probe
  bool pass = false;            ///< estimate <= bound + 3 std_error + allowance
};

/// Time window over which a passing report supports the continuous-time
/// drift bound E[V(X_t) | X_s = x] <= e^{-rate (t-s)} V(x).
struct ContinuousDriftWindow {
  double lo = 0.0;
  double hi = 0.0;
  double rate = 0.0;
  bool verified = false;
};

struct McDriftReport {
  std::vector<DriftProbeResult> rows;
  double kappa = 0.0;  ///< max per-row Richardson slope 2 |E(dt) - E(dt/2)| / dt
  bool all_pass = false;
  ContinuousDriftWindow candidate;
};

/// Monte Carlo check of the exponential drift bound
///     E[V(X_t) | X_s = x] <= e^{-c (t - s)} V(x)
/// at each probe point.  Each row simulates one batch twice over coupled
/// grids (step dt and dt/2 sharing Brownian increments); the coarse run gives
/// the estimate and the coupled difference gives a first-order bias allowance
/// kappa dt.  A row passes when estimate <= bound + 3 stderr + kappa dt.
McDriftReport mc_drift_check(const SdeModel& model, const ScalarField& V, double c,
                             const std::vector<DriftProbePoint>& pairs, double dt,
                             std::int64_t batch, std::uint64_t seed);

/// Storage / reservoir model on [0, inf): release rate r(t, x) =
/// sin(pi t) + cos(sqrt(2) pi t) + x + 3, unit Brownian inflow,
///     dX = -r(t, X) dt + dB,   reflected at 0,
/// with Lyapunov candidate V(x) = x (analytic derivatives included),
/// ellipticity floor 1, and almost-period hints {2, sqrt 2}.  The release
/// rate obeys r >= x + 1 >= 1, so the level decays toward 0 at unit rate.
SdeModel storage_preset();

/// Scalar Ornstein-Uhlenbeck model dX = -X dt + dB with V(x) = x^2 and
/// ellipticity floor 1.  From X_0 = x the time-t law is Gaussian with mean
/// x e^{-t} and variance (1 - e^{-2t}) / 2.
SdeModel ou_preset();

/// Lattice check of Theorem-style nondegeneracy: the minimum eigenvalue of
/// g g^T over a (t, x) lattice must meet the model's claimed ellipticity
/// floor, and g itself must be symmetric within 1e-9.
struct NondegeneracyReport {
  double min_eigenvalue = 0.0;
  double claimed_floor = 0.0;
  bool meets_floor = false;
  double max_asymmetry = 0.0;  ///< max |g_ij - g_ji| over the lattice
  bool symmetric = false;
  double worst_time = 0.0;           ///< lattice point attaining min_eigenvalue
  std::vector<double> worst_state;

  bool pass() const { return meets_floor && symmetric; }
};

/// Evaluates g on the lattice {t_lo..t_hi} x box(x_lo, x_hi) with t_points
/// time samples and x_points samples per axis, and reports the minimum
/// eigenvalue of g g^T (Jacobi iteration) against model.ellipticity_floor.
NondegeneracyReport check_nondegeneracy(const SdeModel& model, double t_lo,
                                        double t_hi, const std::vector<double>& x_lo,
                                        const std::vector<double>& x_hi,
                                        std::size_t t_points, std::size_t x_points);

}  // namespace ergo
