#include "ergo/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ergo {

ExtReal ExtReal::finite(double v) {
  if (!std::isfinite(v) || v < 0.0) {
    std::ostringstream os;
    os << "ExtReal::finite requires a finite nonnegative value, got " << v;
    throw std::domain_error(os.str());
  }
  ExtReal r;
  r.value_ = v;
  r.finite_ = true;
  return r;
}

ExtReal ExtReal::infinity() {
  ExtReal r;
  r.value_ = 0.0;
  r.finite_ = false;
  return r;
}

double ExtReal::value() const {
  if (!finite_) throw std::logic_error("ExtReal::value called on infinity");
  return value_;
}

namespace {

std::vector<double> normalized_weights(std::vector<double> w) {
  if (w.empty()) throw std::invalid_argument("probability vector must be nonempty");
  double sum = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) {
      throw std::invalid_argument("probability weights must be finite and nonnegative");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > kRenormalizeLimit) {
    std::ostringstream os;
    os << "probability weights sum to " << sum << ", deviation exceeds "
       << kRenormalizeLimit;
    throw std::invalid_argument(os.str());
  }
  if (sum != 1.0) {
    for (double& x : w) x /= sum;
  }
  return w;
}

}  // namespace

ProbabilityVector::ProbabilityVector(std::vector<double> weights)
    : w_(normalized_weights(std::move(weights))) {}

ProbabilityVector ProbabilityVector::delta(std::size_t dim, std::size_t state) {
  if (state >= dim) throw std::invalid_argument("delta state out of range");
  std::vector<double> w(dim, 0.0);
  w[state] = 1.0;
  return ProbabilityVector(std::move(w));
}

ProbabilityVector ProbabilityVector::uniform(std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("uniform measure needs dim >= 1");
  return ProbabilityVector(std::vector<double>(dim, 1.0 / double(dim)));
}

WeightFunction::WeightFunction(std::vector<ExtReal> values) : v_(std::move(values)) {
  if (v_.empty()) throw std::invalid_argument("weight function must be nonempty");
}

WeightFunction WeightFunction::zero(std::size_t dim) {
  return WeightFunction(std::vector<ExtReal>(dim, ExtReal::finite(0.0)));
}

WeightFunction WeightFunction::from_values(std::vector<double> values) {
  std::vector<ExtReal> v;
  v.reserve(values.size());
  for (double x : values) v.push_back(ExtReal::finite(x));
  return WeightFunction(std::move(v));
}

std::vector<std::size_t> WeightFunction::finite_states() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < v_.size(); ++i) {
    if (v_[i].is_finite()) idx.push_back(i);
  }
  return idx;
}

bool WeightFunction::all_infinite() const {
  return std::none_of(v_.begin(), v_.end(),
                      [](const ExtReal& x) { return x.is_finite(); });
}

double tv_distance(const ProbabilityVector& mu, const ProbabilityVector& nu) {
  if (mu.size() != nu.size()) {
    throw std::invalid_argument("tv_distance: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) sum += std::abs(mu[i] - nu[i]);
  return sum;
}

namespace {

void check_norm_args(const SignedVector& phi, const WeightFunction& V, double beta) {
  if (phi.size() != V.size()) {
    throw std::invalid_argument("weighted norms: phi and V dimension mismatch");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("weighted norms: beta must be positive and finite");
  }
  if (V.all_infinite()) {
    throw std::domain_error("weighted norms: weight function is infinite everywhere");
  }
  for (double x : phi) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("weighted norms: phi must be finite");
    }
  }
}

}  // namespace

WeightedNorms weighted_norms(const SignedVector& phi, const WeightFunction& V,
                             double beta) {
  check_norm_args(phi, V, beta);
  const std::vector<std::size_t> states = V.finite_states();
  WeightedNorms out;
  for (std::size_t i : states) {
    const double v = V[i].value();
    out.weighted_sup = std::max(out.weighted_sup, std::abs(phi[i]) / (1.0 + v));
    out.beta_sup = std::max(out.beta_sup, std::abs(phi[i]) / (1.0 + beta * v));
  }
  for (std::size_t a = 0; a < states.size(); ++a) {
    for (std::size_t b = a + 1; b < states.size(); ++b) {
      const std::size_t x = states[a], y = states[b];
      const double denom = 2.0 + beta * V[x].value() + beta * V[y].value();
      out.beta_osc = std::max(out.beta_osc, std::abs(phi[x] - phi[y]) / denom);
    }
  }
  return out;
}

double min_shifted_beta_norm(const SignedVector& phi, const WeightFunction& V,
                             double beta, double* c_out) {
  check_norm_args(phi, V, beta);
  const std::vector<std::size_t> states = V.finite_states();

  std::vector<double> val;  // phi restricted to finite states
  std::vector<double> wt;   // 1 + beta V
  val.reserve(states.size());
  wt.reserve(states.size());
  for (std::size_t i : states) {
    val.push_back(phi[i]);
    wt.push_back(1.0 + beta * V[i].value());
  }

  const auto objective = [&](double c) {
    double m = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      m = std::max(m, std::abs(val[i] + c) / wt[i]);
    }
    return m;
  };

  // Candidate shifts: kinks of each |phi_i + c| / w_i plus every pairwise
  // crossing of the rising/falling branches.  The convex piecewise-linear
  // objective attains its minimum at one of these.
  std::vector<double> candidates;
  candidates.reserve(val.size() * val.size() + val.size());
  for (double v : val) candidates.push_back(-v);
  for (std::size_t i = 0; i < val.size(); ++i) {
    for (std::size_t j = i + 1; j < val.size(); ++j) {
      const double wi = wt[i], wj = wt[j];
      // Opposite branches: (phi_i + c)/w_i = -(phi_j + c)/w_j.
      candidates.push_back(-(wj * val[i] + wi * val[j]) / (wi + wj));
      // Parallel branches cross only for distinct slopes.
      if (std::abs(wi - wj) > 1e-14 * (wi + wj)) {
        candidates.push_back((wi * val[j] - wj * val[i]) / (wj - wi));
      }
    }
  }

  double best = std::numeric_limits<double>::infinity();
  double best_c = 0.0;
  for (double c : candidates) {
    const double f = objective(c);
    if (f < best) {
      best = f;
      best_c = c;
    }
  }
  if (c_out != nullptr) *c_out = best_c;
  return best;
}

double norm_identity_gap(const SignedVector& phi, const WeightFunction& V,
                         double beta) {
  const double osc = weighted_norms(phi, V, beta).beta_osc;
  const double inf_norm = min_shifted_beta_norm(phi, V, beta);
  return std::abs(osc - inf_norm);
}

}  // namespace ergo
