#include "ergo/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

namespace ergo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Left-hand side of the level-set selection inequality, in the one
/// evaluation order used everywhere (validation and consistency recheck
/// must agree bitwise).
double selection_lhs(double gamma, double gamma_star, double R) {
  return (1.0 - gamma) * (gamma_star - gamma) * R;
}

double unit_double(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace

KvDocument ContractionConstants::to_kv() const {
  KvDocument doc;
  doc.set("certificate", "contraction");
  doc.set("gamma", gamma);
  doc.set("C", C);
  doc.set("gamma_star", gamma_star);
  doc.set("R", R);
  doc.set("n0", n0);
  doc.set("delta", delta);
  doc.set("beta", beta);
  doc.set("alpha1", alpha1);
  doc.set("eta", eta);
  doc.set("alpha", alpha);
  doc.set("M1", M1);
  doc.set("norm_equivalence", norm_equivalence);
  doc.set("M2", M2);
  doc.set("M3", M3);
  doc.set("M4", M4);
  doc.set("M_tilde", M_tilde);
  doc.set("coverage", to_string(coverage));
  doc.set("window_lo", minorization_window.lo);
  doc.set("window_hi", minorization_window.hi);
  return doc;
}

ContractionConstants contraction_from_parts(double gamma, double C, double gamma_star,
                                            double R, int n0, double delta,
                                            Coverage coverage, TimeWindow minorization_window) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("contraction_from_parts: gamma must lie in (0, 1)");
  if (!(C > 0.0))
    throw std::invalid_argument("contraction_from_parts: C must be positive");
  if (!(gamma_star > gamma && gamma_star < 1.0))
    throw std::invalid_argument("contraction_from_parts: gamma_star must lie in (gamma, 1)");
  if (!(R > 0.0))
    throw std::invalid_argument("contraction_from_parts: R must be positive");
  if (selection_lhs(gamma, gamma_star, R) < 2.0 * C)
    throw std::invalid_argument(
        "contraction_from_parts: level too small: (1-gamma)(gamma_star-gamma)R < 2C");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("contraction_from_parts: delta must lie in (0, 1)");
  if (n0 < 1) throw std::invalid_argument("contraction_from_parts: n0 must be at least 1");

  ContractionConstants cc;
  cc.gamma = gamma;
  cc.C = C;
  cc.gamma_star = gamma_star;
  cc.R = R;
  cc.n0 = n0;
  cc.delta = delta;
  cc.coverage = coverage;
  cc.minorization_window = minorization_window;

  const double drift_tail = 2.0 * C / (1.0 - gamma);
  cc.beta = delta / (gamma * R + drift_tail);
  cc.alpha1 = (2.0 + cc.beta * gamma_star * R) / (2.0 + cc.beta * R);
  cc.eta = std::max(cc.alpha1, 1.0 - delta / 2.0);
  cc.alpha = std::pow(cc.eta, 1.0 / static_cast<double>(n0));

  cc.M1 = std::max(3.0 + cc.beta * C / (1.0 - gamma), cc.beta);
  cc.norm_equivalence = std::max(1.0, 1.0 / cc.beta);
  cc.M2 = cc.M1 * cc.norm_equivalence;
  cc.M3 = 1.0 + C / (1.0 - gamma);
  cc.M4 = cc.M2 * cc.M3 / cc.eta;
  cc.M_tilde = cc.M4;

  if (!(cc.alpha1 > 0.0 && cc.alpha1 < 1.0) || !(cc.eta > 0.0 && cc.eta < 1.0) ||
      !(cc.alpha > 0.0 && cc.alpha < 1.0) || !(cc.beta > 0.0)) {
    throw std::logic_error("contraction_from_parts: derived constants left (0, 1)");
  }
  return cc;
}

bool constants_consistent(const ContractionConstants& cc) {
  if (!(cc.gamma > 0.0 && cc.gamma < 1.0 && cc.C > 0.0)) return false;
  if (!(cc.gamma_star > cc.gamma && cc.gamma_star < 1.0)) return false;
  if (!(cc.R > 0.0) || cc.n0 < 1) return false;
  if (!(cc.delta > 0.0 && cc.delta < 1.0)) return false;
  if (selection_lhs(cc.gamma, cc.gamma_star, cc.R) < 2.0 * cc.C) return false;
  const ContractionConstants re =
      contraction_from_parts(cc.gamma, cc.C, cc.gamma_star, cc.R, cc.n0, cc.delta,
                             cc.coverage, cc.minorization_window);
  return re.beta == cc.beta && re.alpha1 == cc.alpha1 && re.eta == cc.eta &&
         re.alpha == cc.alpha && re.M1 == cc.M1 &&
         re.norm_equivalence == cc.norm_equivalence && re.M2 == cc.M2 &&
         re.M3 == cc.M3 && re.M4 == cc.M4 && re.M_tilde == cc.M_tilde;
}

ConstantsResult derive_constants(const DriftCertificate& drift, const KernelFamily& K,
                                 double target_delta, int n0_max,
                                 std::optional<double> gamma_star) {
  if (!(drift.C > 0.0))
    throw std::invalid_argument(
        "derive_constants: the drift constant C must be positive to select a level R");
  const double gamma = drift.gamma;
  const double gs = gamma_star.value_or((1.0 + gamma) / 2.0);
  if (!(gs > gamma && gs < 1.0))
    throw std::invalid_argument("derive_constants: gamma_star must lie in (gamma, 1)");

  double R = 2.0 * drift.C / ((1.0 - gamma) * (gs - gamma));
  while (selection_lhs(gamma, gs, R) < 2.0 * drift.C)
    R = std::nextafter(R, kInf);

  ConstantsResult result;
  result.minorization =
      find_minorization(K, drift.V, R, target_delta, n0_max, drift.checked_window);
  if (!result.minorization.found()) return result;

  const MinorizationCertificate& mc = *result.minorization.certificate;
  result.constants = contraction_from_parts(gamma, drift.C, gs, R, mc.n0, mc.delta,
                                            mc.coverage, mc.checked_window);
  return result;
}

std::vector<GammaStarSweepEntry> sweep_gamma_star(const DriftCertificate& drift,
                                                  const KernelFamily& K,
                                                  double target_delta, int n0_max,
                                                  const std::vector<double>& gamma_stars) {
  std::vector<GammaStarSweepEntry> sweep;
  sweep.reserve(gamma_stars.size());
  for (double gs : gamma_stars) {
    GammaStarSweepEntry entry;
    entry.gamma_star = gs;
    if (!(gs > drift.gamma && gs < 1.0)) {
      entry.note = "gamma_star outside (gamma, 1)";
      sweep.push_back(std::move(entry));
      continue;
    }
    const ConstantsResult result = derive_constants(drift, K, target_delta, n0_max, gs);
    if (!result.ok()) {
      entry.note = "minorization search failed at this level";
      if (!result.minorization.profile.empty()) {
        entry.n0 = result.minorization.profile.back().n0;
        entry.delta = result.minorization.profile.back().delta;
      }
      entry.R = 2.0 * drift.C / ((1.0 - drift.gamma) * (gs - drift.gamma));
      sweep.push_back(std::move(entry));
      continue;
    }
    const ContractionConstants& cc = *result.constants;
    entry.ok = true;
    entry.R = cc.R;
    entry.n0 = cc.n0;
    entry.delta = cc.delta;
    entry.alpha = cc.alpha;
    entry.M_tilde = cc.M_tilde;
    sweep.push_back(std::move(entry));
  }
  return sweep;
}

OscillationReport verify_oscillation_contraction(const KernelFamily& K,
                                                 const ContractionConstants& cc,
                                                 const WeightFunction& V, int trials,
                                                 TimeWindow window, std::uint64_t seed) {
  if (V.size() != K.dim())
    throw std::invalid_argument(
        "verify_oscillation_contraction: weight dimension does not match the kernel");
  if (trials < 1)
    throw std::invalid_argument("verify_oscillation_contraction: trials must be positive");

  OscillationReport report;
  report.eta = cc.eta;

  std::mt19937_64 eng(seed);
  std::map<std::int64_t, StochasticMatrix> products;
  const auto product_ending_at = [&](std::int64_t n) -> const StochasticMatrix& {
    auto it = products.find(n);
    if (it == products.end())
      it = products.emplace(n, backward_product(K, n, cc.n0)).first;
    return it->second;
  };

  const std::size_t d = K.dim();
  for (int t = 0; t < trials; ++t) {
    const std::int64_t n = window.lo + static_cast<std::int64_t>(t) % window.length();
    SignedVector phi(d, 0.0);
    for (std::size_t x = 0; x < d; ++x) {
      const double u = 2.0 * unit_double(eng) - 1.0;
      phi[x] = V.is_finite(x) ? u * (1.0 + V[x].value()) : 0.0;
    }
    const double before = weighted_norms(phi, V, cc.beta).beta_osc;
    if (before <= 0.0) {
      ++report.skipped;
      continue;
    }
    const SignedVector image = product_ending_at(n).apply_to_function(phi);
    const double after = weighted_norms(image, V, cc.beta).beta_osc;
    const double ratio = after / before;
    ++report.evaluated;
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.worst_time = n;
    }
  }
  return report;
}

TvRateReport tv_rate_check(const KernelFamily& K, const InvariantFamily& F,
                           const ContractionConstants& cc, const WeightFunction& V,
                           std::size_t x, std::int64_t n, std::int64_t m_max) {
  if (V.size() != K.dim())
    throw std::invalid_argument("tv_rate_check: weight dimension does not match the kernel");
  if (F.state_count() != K.dim())
    throw std::invalid_argument("tv_rate_check: family dimension does not match the kernel");
  if (x >= K.dim()) throw std::invalid_argument("tv_rate_check: start state out of range");
  if (!V.is_finite(x))
    throw std::domain_error("tv_rate_check: V(x) is infinite, so the bound is vacuous");
  if (!F.covers(n))
    throw std::invalid_argument("tv_rate_check: the family does not cover the arrival time");
  if (m_max < 0) throw std::invalid_argument("tv_rate_check: m_max must be nonnegative");

  const ProbabilityVector& mu = F.at(n);

  TvRateReport report;
  report.state = x;
  report.arrival_time = n;
  report.V_x = V[x].value();
  report.log_alpha = std::log(cc.alpha);

  const double weight = 1.0 + report.V_x;
  report.table.reserve(static_cast<std::size_t>(m_max) + 1);
  StochasticMatrix product = StochasticMatrix::identity(K.dim());
  for (std::int64_t m = 0; m <= m_max; ++m) {
    if (m > 0) product = K.at(n - m) * product;
    const double observed = tv_distance(product.row_measure(x), mu);
    const double decay = std::pow(cc.alpha, static_cast<double>(m));
    const double bound = cc.M_tilde * decay * weight;
    report.table.push_back(DecayRow{m, observed, bound});
    if (observed > bound) report.bound_satisfied = false;
    report.empirical_prefactor = std::max(report.empirical_prefactor, observed / (decay * weight));
  }

  // Least-squares slope of log(observed) against m over the clean tail:
  // skip the leading transient (>= half the initial mass) and the noise
  // floor; fall back to everything after m = 0 if the strict rule leaves
  // fewer than two points.
  constexpr double kNoiseFloor = 1e-12;
  const double initial = report.table.front().observed_tv;
  const auto collect = [&](bool strict_leading_trim) {
    std::vector<const DecayRow*> pts;
    bool in_tail = !strict_leading_trim;
    for (const DecayRow& row : report.table) {
      if (!in_tail && row.observed_tv < 0.5 * initial) in_tail = true;
      if (!in_tail) continue;
      if (row.observed_tv < kNoiseFloor) continue;
      if (!strict_leading_trim && row.m == 0) continue;
      pts.push_back(&row);
    }
    return pts;
  };
  std::vector<const DecayRow*> pts = collect(true);
  if (pts.size() < 2) pts = collect(false);

  if (pts.size() < 2) {
    report.fitted_rate = -kInf;
  } else {
    double mean_m = 0.0, mean_l = 0.0;
    for (const DecayRow* row : pts) {
      mean_m += static_cast<double>(row->m);
      mean_l += std::log(row->observed_tv);
    }
    mean_m /= static_cast<double>(pts.size());
    mean_l /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0;
    for (const DecayRow* row : pts) {
      const double dm = static_cast<double>(row->m) - mean_m;
      sxx += dm * dm;
      sxy += dm * (std::log(row->observed_tv) - mean_l);
    }
    report.fitted_rate = sxy / sxx;
    report.fit_first_m = pts.front()->m;
    report.fit_last_m = pts.back()->m;
    report.fit_points = pts.size();
  }
  report.rate_within_contract = report.fitted_rate <= report.log_alpha + 0.01;
  return report;
}

}  // namespace ergo
