#pragma once

#include <cstddef>
#include <string>
#include <vector>

/// Measures, weight functions and the weighted norms used throughout.
///
/// Total variation convention (used by every module in this library):
///
///     tv_distance(mu, nu) = sum_x |mu(x) - nu(x)|
///
/// i.e. the *full* L1 distance, with range [0, 2] for probability vectors.
/// Equivalently tv_distance = 2 * sup_A (mu(A) - nu(A)).  Coupling and
/// overlap arguments rely on the matching identity
///
///     tv_distance(mu, nu) = 2 * (1 - sum_x min(mu(x), nu(x))).
///
/// Anyone comparing against the halved convention must divide by two.
namespace ergo {

/// |sum - 1| tolerated on a probability vector after normalization.
inline constexpr double kProbabilityTol = 1e-12;
/// Raw deviations below this are silently renormalized; larger ones are
/// rejected as construction errors.
inline constexpr double kRenormalizeLimit = 1e-9;

/// Extended nonnegative real: a finite value >= 0 or +infinity.
///
/// Infinity is a dedicated state of this wrapper, never a large float, so
/// arithmetic cannot silently produce it and level-set tests stay exact.
class ExtReal {
 public:
  ExtReal() = default;

  static ExtReal finite(double v);
  static ExtReal infinity();

  bool is_finite() const { return finite_; }
  /// Finite value; throws std::logic_error when infinite.
  double value() const;
  /// True when finite and value() <= r.
  bool at_most(double r) const { return finite_ && value_ <= r; }

  bool operator==(const ExtReal& o) const {
    return finite_ == o.finite_ && (!finite_ || value_ == o.value_);
  }

 private:
  double value_ = 0.0;
  bool finite_ = true;
};

/// Probability vector on a finite state space {0, ..., size()-1}.
///
/// Entries are nonnegative and sum to one within kProbabilityTol.  Inputs
/// whose total deviates by less than kRenormalizeLimit are renormalized;
/// anything worse is rejected with std::invalid_argument.
class ProbabilityVector {
 public:
  explicit ProbabilityVector(std::vector<double> weights);

  static ProbabilityVector delta(std::size_t dim, std::size_t state);
  static ProbabilityVector uniform(std::size_t dim);

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  const std::vector<double>& weights() const { return w_; }

 private:
  std::vector<double> w_;
};

/// Real-valued test function (or signed measure) on a finite state space.
using SignedVector = std::vector<double>;

/// Weight function V: states -> [0, +inf].
class WeightFunction {
 public:
  explicit WeightFunction(std::vector<ExtReal> values);

  /// V identically zero.
  static WeightFunction zero(std::size_t dim);
  /// All-finite weights; throws on negative or non-finite input.
  static WeightFunction from_values(std::vector<double> values);

  std::size_t size() const { return v_.size(); }
  const ExtReal& operator[](std::size_t i) const { return v_[i]; }
  bool is_finite(std::size_t i) const { return v_[i].is_finite(); }

  /// Indices with finite weight, ascending.
  std::vector<std::size_t> finite_states() const;
  bool all_infinite() const;

 private:
  std::vector<ExtReal> v_;
};

/// L1 total variation distance; range [0, 2].  Dimensions must match.
double tv_distance(const ProbabilityVector& mu, const ProbabilityVector& nu);

/// The three weighted functionals of a test function phi against V:
///   weighted_sup = sup |phi(x)| / (1 + V(x))
///   beta_sup     = sup |phi(x)| / (1 + beta V(x))
///   beta_osc     = sup_{x != y} |phi(x) - phi(y)| / (2 + beta V(x) + beta V(y))
/// All suprema run over states with finite V; beta_osc of fewer than two
/// finite states is 0.
struct WeightedNorms {
  double weighted_sup = 0.0;
  double beta_sup = 0.0;
  double beta_osc = 0.0;
};

WeightedNorms weighted_norms(const SignedVector& phi, const WeightFunction& V,
                             double beta);

/// Exact minimizer of c |-> sup_x |phi(x) + c| / (1 + beta V(x)).
///
/// The objective is a convex piecewise-linear function of c, so the minimum
/// sits at a kink (c = -phi(x)) or at a crossing of two branch lines; all
/// candidates are enumerated and evaluated.  Returns the minimal value and,
/// when c_out is non-null, a minimizing shift.
double min_shifted_beta_norm(const SignedVector& phi, const WeightFunction& V,
                             double beta, double* c_out = nullptr);

/// | beta_osc(phi) - min_c ||phi + c||_beta |.  The two quantities agree
/// identically, so this measures only implementation error.
double norm_identity_gap(const SignedVector& phi, const WeightFunction& V,
                         double beta);

}  // namespace ergo
