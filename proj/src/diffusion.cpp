#include "ergo/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>

#include "ergo/rng.hpp"

namespace ergo {

namespace {

std::string blow_up_message(std::size_t path, std::size_t step, double time) {
  std::ostringstream msg;
  msg << "simulated path " << path << " became non-finite at step " << step
      << " (time " << time << ")";
  return msg.str();
}

/// Time grid from s to t with nominal step dt.  When dt divides the span
/// within 1e-12 (relative to max(1, span)) the grid is uniform; otherwise the
/// last step is shortened so the grid ends at t exactly.
std::vector<double> build_time_grid(double s, double t, double dt) {
  const double span = t - s;
  const double ratio = span / dt;
  if (!(ratio < 1e12)) {
    throw std::invalid_argument(
        "time step is too small for the requested window (over 1e12 steps)");
  }
  std::vector<double> times;
  const auto rounded = std::llround(ratio);
  if (rounded >= 1 && std::abs(static_cast<double>(rounded) * dt - span) <=
                          1e-12 * std::max(1.0, span)) {
    times.reserve(static_cast<std::size_t>(rounded) + 1);
    for (std::int64_t k = 0; k < rounded; ++k) {
      times.push_back(s + static_cast<double>(k) * dt);
    }
    times.push_back(t);
  } else {
    const auto full = static_cast<std::int64_t>(std::floor(ratio));
    times.reserve(static_cast<std::size_t>(full) + 2);
    for (std::int64_t k = 0; k <= full; ++k) {
      times.push_back(s + static_cast<double>(k) * dt);
    }
    times.push_back(t);
  }
  return times;
}

void validate_model(const SdeModel& model, const char* where) {
  if (model.dimension == 0) {
    throw std::invalid_argument(std::string(where) +
                                ": model dimension must be positive");
  }
  if (!model.drift || !model.diffusion) {
    throw std::invalid_argument(
        std::string(where) + ": model must define drift and diffusion callbacks");
  }
}

/// One explicit-scheme step in place: x += f(t, x) h + g(t, x) sqrt(h) z,
/// with reflection and finiteness checks.  `step` and `t_next` only label the
/// BlowUpError when a coordinate leaves the representable range.
void em_step(const SdeModel& model, double t, double h,
             const std::vector<double>& z, std::vector<double>& x,
             std::size_t path, std::size_t step, double t_next) {
  const std::size_t n = model.dimension;
  const std::vector<double> f = model.drift(t, x);
  if (f.size() != n) {
    throw std::runtime_error("drift callback returned a vector of wrong dimension");
  }
  const std::vector<double> g = model.diffusion(t, x);
  if (g.size() != n * n) {
    throw std::runtime_error(
        "diffusion callback returned a matrix of wrong dimension");
  }
  const double sqrt_h = std::sqrt(h);
  for (std::size_t i = 0; i < n; ++i) {
    double noise = 0.0;
    for (std::size_t j = 0; j < n; ++j) noise += g[i * n + j] * z[j];
    x[i] += f[i] * h + sqrt_h * noise;
    if (model.reflect_at_zero) x[i] = std::abs(x[i]);
    if (!std::isfinite(x[i])) throw BlowUpError(path, step, t_next);
  }
}

double checked_scalar(const std::function<double(const std::vector<double>&)>& f,
                      const std::vector<double>& x) {
  double v = 0.0;
  try {
    v = f(x);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("scalar field evaluation failed: ") +
                             e.what());
  }
  if (!std::isfinite(v)) {
    throw std::runtime_error("scalar field returned a non-finite value");
  }
  return v;
}

double euclidean_norm(const std::vector<double>& x) {
  double sum = 0.0;
  for (double v : x) sum += v * v;
  return std::sqrt(sum);
}

/// Smallest eigenvalue of a symmetric matrix (row-major, destructive) via
/// cyclic Jacobi rotations.
double min_symmetric_eigenvalue(std::vector<double> a, std::size_t n) {
  if (n == 1) return a[0];
  double scale = 0.0;
  for (double v : a) scale += v * v;
  const double stop = 1e-28 * std::max(scale, 1e-300);
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    }
    if (off <= stop) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double sign = theta >= 0.0 ? 1.0 : -1.0;
        const double tan_r = sign / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double cos_r = 1.0 / std::sqrt(1.0 + tan_r * tan_r);
        const double sin_r = tan_r * cos_r;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = cos_r * akp - sin_r * akq;
          a[k * n + q] = sin_r * akp + cos_r * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = cos_r * apk - sin_r * aqk;
          a[q * n + k] = sin_r * apk + cos_r * aqk;
        }
      }
    }
  }
  double lowest = a[0];
  for (std::size_t i = 1; i < n; ++i) lowest = std::min(lowest, a[i * n + i]);
  return lowest;
}

}  // namespace

BlowUpError::BlowUpError(std::size_t path, std::size_t step, double time)
    : std::runtime_error(blow_up_message(path, step, time)),
      path_(path),
      step_(step),
      time_(time) {}

std::vector<double> TrajectoryBatch::point(std::size_t path, std::size_t k) const {
  const double* base = states.data() + (path * times.size() + k) * dimension;
  return std::vector<double>(base, base + dimension);
}

std::vector<double> TrajectoryBatch::terminal(std::size_t path) const {
  return point(path, times.size() - 1);
}

TrajectoryBatch euler_maruyama(const SdeModel& model, const std::vector<double>& x0,
                               double s, double t, double dt, std::int64_t batch,
                               std::uint64_t seed, PathStorage storage) {
  validate_model(model, "euler_maruyama");
  const std::size_t n = model.dimension;
  if (x0.size() != n) {
    throw std::invalid_argument("euler_maruyama: initial state has wrong dimension");
  }
  for (double v : x0) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("euler_maruyama: initial state must be finite");
    }
  }
  if (!std::isfinite(s) || !std::isfinite(t) || !(t > s)) {
    throw std::invalid_argument("euler_maruyama: need finite times with t > s");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("euler_maruyama: step size must be positive");
  }
  if (batch < 1) {
    throw std::invalid_argument("euler_maruyama: batch must be at least 1");
  }

  const std::vector<double> times = build_time_grid(s, t, dt);
  const std::size_t steps = times.size() - 1;
  const bool full = storage == PathStorage::full;

  TrajectoryBatch out;
  out.batch = static_cast<std::size_t>(batch);
  out.dimension = n;
  out.dt = dt;
  out.seed = seed;
  out.times = full ? times : std::vector<double>{s, t};
  const std::size_t kept = out.times.size();
  out.states.assign(out.batch * kept * n, 0.0);

  std::vector<double> x(n);
  std::vector<double> z(n);
  for (std::size_t p = 0; p < out.batch; ++p) {
    CounterRng rng(seed, p);
    x = x0;
    double* base = out.states.data() + p * kept * n;
    std::copy(x.begin(), x.end(), base);
    for (std::size_t k = 0; k < steps; ++k) {
      const double h = times[k + 1] - times[k];
      for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
      em_step(model, times[k], h, z, x, p, k + 1, times[k + 1]);
      if (full) std::copy(x.begin(), x.end(), base + (k + 1) * n);
    }
    if (!full) std::copy(x.begin(), x.end(), base + n);
  }
  return out;
}

std::optional<std::size_t> SpatialGrid::locate(double x) const {
  if (!(x >= lo) || !(x < hi)) return std::nullopt;
  auto idx = static_cast<std::size_t>((x - lo) / width());
  if (idx >= cells) idx = cells - 1;
  return idx;
}

double EmpiricalKernel::max_overflow() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < grid.cells; ++r) {
    worst = std::max(worst, overflow_mass(r));
  }
  return worst;
}

StochasticMatrix EmpiricalKernel::to_matrix() const {
  const std::size_t cells = grid.cells;
  const double total = static_cast<double>(samples_per_row);
  std::vector<double> data(cells * cells, 0.0);
  for (std::size_t r = 0; r < cells; ++r) {
    for (std::size_t c = 0; c < cells; ++c) {
      data[r * cells + c] = static_cast<double>(counts[r * cells + c]) / total;
    }
    data[r * cells] += static_cast<double>(escaped_low[r]) / total;
    data[r * cells + cells - 1] += static_cast<double>(escaped_high[r]) / total;
  }
  return StochasticMatrix(cells, std::move(data));
}

EmpiricalKernel estimate_kernel(const SdeModel& model, const SpatialGrid& grid,
                                double s, double t, double dt,
                                std::int64_t samples_per_cell, std::uint64_t seed,
                                double max_overflow) {
  validate_model(model, "estimate_kernel");
  if (model.dimension != 1) {
    throw std::invalid_argument("estimate_kernel: only scalar models are supported");
  }
  if (grid.cells == 0 || !(grid.hi > grid.lo)) {
    throw std::invalid_argument(
        "estimate_kernel: grid needs positive width and at least one cell");
  }
  if (samples_per_cell < 100) {
    throw std::invalid_argument(
        "estimate_kernel: need at least 100 samples per cell");
  }
  if (!(max_overflow >= 0.0) || max_overflow > 1.0) {
    throw std::invalid_argument("estimate_kernel: max_overflow must lie in [0, 1]");
  }

  EmpiricalKernel out;
  out.grid = grid;
  out.s = s;
  out.t = t;
  out.dt = dt;
  out.seed = seed;
  out.samples_per_row = samples_per_cell;
  const std::size_t cells = grid.cells;
  out.counts.assign(cells * cells, 0);
  out.escaped_low.assign(cells, 0);
  out.escaped_high.assign(cells, 0);
  out.probabilities.assign(cells * (cells + 1), 0.0);
  out.half_widths.assign(cells * (cells + 1), 0.0);

  const double total = static_cast<double>(samples_per_cell);
  constexpr double z975 = 1.959963984540054;  // 97.5% standard normal quantile
  for (std::size_t r = 0; r < cells; ++r) {
    const std::uint64_t row_seed = derive_stream(seed, r);
    const TrajectoryBatch runs =
        euler_maruyama(model, {grid.center(r)}, s, t, dt, samples_per_cell,
                       row_seed, PathStorage::terminal_only);
    for (std::size_t p = 0; p < runs.batch; ++p) {
      const double terminal = runs.state(p, 1, 0);
      if (const auto cell = grid.locate(terminal)) {
        ++out.counts[r * cells + *cell];
      } else if (terminal < grid.lo) {
        ++out.escaped_low[r];
      } else {
        ++out.escaped_high[r];
      }
    }
    for (std::size_t c = 0; c <= cells; ++c) {
      const double hits =
          c < cells
              ? static_cast<double>(out.counts[r * cells + c])
              : static_cast<double>(out.escaped_low[r] + out.escaped_high[r]);
      const double p_hat = hits / total;
      out.probabilities[r * (cells + 1) + c] = p_hat;
      const double denom = 1.0 + z975 * z975 / total;
      out.half_widths[r * (cells + 1) + c] =
          z975 *
          std::sqrt(p_hat * (1.0 - p_hat) / total +
                    z975 * z975 / (4.0 * total * total)) /
          denom;
    }
  }
  for (std::size_t r = 0; r < cells; ++r) {
    if (out.overflow_mass(r) > max_overflow) {
      std::ostringstream msg;
      msg << "estimate_kernel: " << out.overflow_mass(r) * 100.0
          << "% of samples from cell " << r << " escaped the grid (allowed "
          << max_overflow * 100.0 << "%); enlarge the grid";
      throw std::runtime_error(msg.str());
    }
  }
  return out;
}

double apply_generator(const SdeModel& model, const ScalarField& V, double t,
                       const std::vector<double>& x) {
  validate_model(model, "apply_generator");
  if (!V.value) {
    throw std::invalid_argument("apply_generator: scalar field must define value");
  }
  const std::size_t n = model.dimension;
  if (x.size() != n) {
    throw std::invalid_argument("apply_generator: state has wrong dimension");
  }
  const double norm = euclidean_norm(x);

  std::vector<double> grad(n, 0.0);
  if (V.gradient) {
    try {
      grad = V.gradient(x);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("gradient callback failed: ") + e.what());
    }
    if (grad.size() != n) {
      throw std::runtime_error("gradient callback returned wrong dimension");
    }
  } else {
    const double h = 1e-5 * (1.0 + norm);
    std::vector<double> work = x;
    for (std::size_t i = 0; i < n; ++i) {
      work[i] = x[i] + h;
      const double up = checked_scalar(V.value, work);
      work[i] = x[i] - h;
      const double down = checked_scalar(V.value, work);
      work[i] = x[i];
      grad[i] = (up - down) / (2.0 * h);
    }
  }

  std::vector<double> hess(n * n, 0.0);
  if (V.hessian) {
    try {
      hess = V.hessian(x);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("hessian callback failed: ") + e.what());
    }
    if (hess.size() != n * n) {
      throw std::runtime_error("hessian callback returned wrong dimension");
    }
  } else {
    const double h = 1e-4 * (1.0 + norm);
    const double at_x = checked_scalar(V.value, x);
    std::vector<double> work = x;
    for (std::size_t i = 0; i < n; ++i) {
      work[i] = x[i] + h;
      const double up = checked_scalar(V.value, work);
      work[i] = x[i] - h;
      const double down = checked_scalar(V.value, work);
      work[i] = x[i];
      hess[i * n + i] = (up - 2.0 * at_x + down) / (h * h);
      for (std::size_t j = i + 1; j < n; ++j) {
        work[i] = x[i] + h;
        work[j] = x[j] + h;
        const double pp = checked_scalar(V.value, work);
        work[j] = x[j] - h;
        const double pm = checked_scalar(V.value, work);
        work[i] = x[i] - h;
        const double mm = checked_scalar(V.value, work);
        work[j] = x[j] + h;
        const double mp = checked_scalar(V.value, work);
        work[i] = x[i];
        work[j] = x[j];
        const double mixed = (pp - pm - mp + mm) / (4.0 * h * h);
        hess[i * n + j] = mixed;
        hess[j * n + i] = mixed;
      }
    }
  }

  const std::vector<double> f = model.drift(t, x);
  if (f.size() != n) {
    throw std::runtime_error("drift callback returned a vector of wrong dimension");
  }
  const std::vector<double> g = model.diffusion(t, x);
  if (g.size() != n * n) {
    throw std::runtime_error("diffusion callback returned a matrix of wrong dimension");
  }

  double result = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double a_ij = 0.0;
      for (std::size_t k = 0; k < n; ++k) a_ij += g[i * n + k] * g[j * n + k];
      a_ij *= 0.5;
      result += a_ij * hess[i * n + j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) result += f[i] * grad[i];
  return result;
}

McDriftReport mc_drift_check(const SdeModel& model, const ScalarField& V, double c,
                             const std::vector<DriftProbePoint>& pairs, double dt,
                             std::int64_t batch, std::uint64_t seed) {
  validate_model(model, "mc_drift_check");
  if (!V.value) {
    throw std::invalid_argument("mc_drift_check: scalar field must define value");
  }
  if (!(c >= 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("mc_drift_check: rate must be finite and nonnegative");
  }
  if (pairs.empty()) {
    throw std::invalid_argument("mc_drift_check: need at least one probe point");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("mc_drift_check: step size must be positive");
  }
  if (batch < 2) {
    throw std::invalid_argument("mc_drift_check: batch must be at least 2");
  }
  const std::size_t n = model.dimension;
  for (const DriftProbePoint& probe : pairs) {
    if (probe.x.size() != n) {
      throw std::invalid_argument("mc_drift_check: probe state has wrong dimension");
    }
    if (!std::isfinite(probe.s) || !std::isfinite(probe.t) || !(probe.t > probe.s)) {
      throw std::invalid_argument("mc_drift_check: probe needs t > s");
    }
    for (double v : probe.x) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("mc_drift_check: probe state must be finite");
      }
    }
  }

  constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
  McDriftReport report;
  report.rows.reserve(pairs.size());
  double window_lo = std::numeric_limits<double>::infinity();
  double window_hi = -std::numeric_limits<double>::infinity();
  bool all_pass = true;
  double kappa = 0.0;

  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const DriftProbePoint& probe = pairs[r];
    const std::uint64_t row_seed = derive_stream(seed, r);
    const std::vector<double> coarse = build_time_grid(probe.s, probe.t, dt);
    const std::size_t steps = coarse.size() - 1;

    double sum_coarse = 0.0;
    double sum_coarse_sq = 0.0;
    double sum_diff = 0.0;
    std::vector<double> xc(n);
    std::vector<double> xf(n);
    std::vector<double> za(n);
    std::vector<double> zb(n);
    std::vector<double> zc(n);
    for (std::int64_t p = 0; p < batch; ++p) {
      CounterRng rng(row_seed, static_cast<std::uint64_t>(p));
      xc = probe.x;
      xf = probe.x;
      for (std::size_t k = 0; k < steps; ++k) {
        const double t0 = coarse[k];
        const double t1 = coarse[k + 1];
        const double h = t1 - t0;
        const double half = 0.5 * h;
        const double tm = t0 + half;
        for (std::size_t i = 0; i < n; ++i) za[i] = rng.normal();
        em_step(model, t0, half, za, xf, static_cast<std::size_t>(p), 2 * k + 1, tm);
        for (std::size_t i = 0; i < n; ++i) zb[i] = rng.normal();
        em_step(model, tm, half, zb, xf, static_cast<std::size_t>(p), 2 * k + 2, t1);
        for (std::size_t i = 0; i < n; ++i) zc[i] = (za[i] + zb[i]) * inv_sqrt2;
        em_step(model, t0, h, zc, xc, static_cast<std::size_t>(p), k + 1, t1);
      }
      const double v_coarse = checked_scalar(V.value, xc);
      const double v_fine = checked_scalar(V.value, xf);
      sum_coarse += v_coarse;
      sum_coarse_sq += v_coarse * v_coarse;
      sum_diff += v_coarse - v_fine;
    }

    const double count = static_cast<double>(batch);
    const double mean = sum_coarse / count;
    const double variance =
        std::max(0.0, (sum_coarse_sq - count * mean * mean) / (count - 1.0));
    const double std_error = std::sqrt(variance / count);
    const double allowance = 2.0 * std::abs(sum_diff / count);
    const double v_start = checked_scalar(V.value, probe.x);
    const double bound = std::exp(-c * (probe.t - probe.s)) * v_start;

    DriftProbeResult row;
    row.point = probe;
    row.estimate = mean;
    row.std_error = std_error;
    row.bound = bound;
    row.bias_allowance = allowance;
    row.pass = mean <= bound + 3.0 * std_error + allowance;
    all_pass = all_pass && row.pass;
    kappa = std::max(kappa, allowance / dt);
    window_lo = std::min(window_lo, probe.s);
    window_hi = std::max(window_hi, probe.t);
    report.rows.push_back(std::move(row));
  }

  report.kappa = kappa;
  report.all_pass = all_pass;
  report.candidate.lo = window_lo;
  report.candidate.hi = window_hi;
  report.candidate.rate = c;
  report.candidate.verified = all_pass;
  return report;
}

SdeModel storage_preset() {
  SdeModel model;
  model.dimension = 1;
  model.drift = [](double t, const std::vector<double>& x) {
    const double release = std::sin(std::numbers::pi * t) +
                           std::cos(std::numbers::sqrt2 * std::numbers::pi * t) +
                           x[0] + 3.0;
    return std::vector<double>{-release};
  };
  model.diffusion = [](double, const std::vector<double>&) {
    return std::vector<double>{1.0};
  };
  ScalarField level;
  level.value = [](const std::vector<double>& x) { return x[0]; };
  level.gradient = [](const std::vector<double>&) {
    return std::vector<double>{1.0};
  };
  level.hessian = [](const std::vector<double>&) {
    return std::vector<double>{0.0};
  };
  model.lyapunov = std::move(level);
  model.ellipticity_floor = 1.0;
  model.reflect_at_zero = true;
  model.almost_period_hints = {2.0, std::numbers::sqrt2};
  return model;
}

SdeModel ou_preset() {
  SdeModel model;
  model.dimension = 1;
  model.drift = [](double, const std::vector<double>& x) {
    return std::vector<double>{-x[0]};
  };
  model.diffusion = [](double, const std::vector<double>&) {
    return std::vector<double>{1.0};
  };
  ScalarField quadratic;
  quadratic.value = [](const std::vector<double>& x) { return x[0] * x[0]; };
  quadratic.gradient = [](const std::vector<double>& x) {
    return std::vector<double>{2.0 * x[0]};
  };
  quadratic.hessian = [](const std::vector<double>&) {
    return std::vector<double>{2.0};
  };
  model.lyapunov = std::move(quadratic);
  model.ellipticity_floor = 1.0;
  return model;
}

NondegeneracyReport check_nondegeneracy(const SdeModel& model, double t_lo,
                                        double t_hi, const std::vector<double>& x_lo,
                                        const std::vector<double>& x_hi,
                                        std::size_t t_points, std::size_t x_points) {
  validate_model(model, "check_nondegeneracy");
  const std::size_t n = model.dimension;
  if (x_lo.size() != n || x_hi.size() != n) {
    throw std::invalid_argument("check_nondegeneracy: box bounds have wrong dimension");
  }
  if (t_points == 0 || x_points == 0) {
    throw std::invalid_argument("check_nondegeneracy: need at least one lattice point per axis");
  }
  if (!(t_hi >= t_lo)) {
    throw std::invalid_argument("check_nondegeneracy: need t_hi >= t_lo");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x_hi[i] >= x_lo[i])) {
      throw std::invalid_argument("check_nondegeneracy: need x_hi >= x_lo per axis");
    }
  }

  NondegeneracyReport report;
  report.claimed_floor = model.ellipticity_floor;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  report.max_asymmetry = 0.0;
  report.worst_state.assign(n, 0.0);

  std::vector<std::size_t> index(n, 0);
  std::vector<double> x(n, 0.0);
  std::vector<double> gram(n * n, 0.0);
  for (std::size_t a = 0; a < t_points; ++a) {
    const double t =
        t_points == 1
            ? t_lo
            : t_lo + static_cast<double>(a) * (t_hi - t_lo) /
                         static_cast<double>(t_points - 1);
    std::fill(index.begin(), index.end(), 0);
    while (true) {
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = x_points == 1
                   ? x_lo[i]
                   : x_lo[i] + static_cast<double>(index[i]) *
                                   (x_hi[i] - x_lo[i]) /
                                   static_cast<double>(x_points - 1);
      }
      const std::vector<double> g = model.diffusion(t, x);
      if (g.size() != n * n) {
        throw std::runtime_error(
            "diffusion callback returned a matrix of wrong dimension");
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          report.max_asymmetry = std::max(
              report.max_asymmetry, std::abs(g[i * n + j] - g[j * n + i]));
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double sum = 0.0;
          for (std::size_t k = 0; k < n; ++k) sum += g[i * n + k] * g[j * n + k];
          gram[i * n + j] = sum;
        }
      }
      const double lambda = min_symmetric_eigenvalue(gram, n);
      if (lambda < report.min_eigenvalue) {
        report.min_eigenvalue = lambda;
        report.worst_time = t;
        report.worst_state = x;
      }
      std::size_t axis = 0;
      while (axis < n) {
        if (++index[axis] < x_points) break;
        index[axis] = 0;
        ++axis;
      }
      if (axis == n) break;
    }
  }

  report.meets_floor = report.min_eigenvalue >= report.claimed_floor - 1e-12;
  report.symmetric = report.max_asymmetry <= 1e-9;
  return report;
}

}  // namespace ergo
