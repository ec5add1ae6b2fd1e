#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ergo/measures.hpp"

/// Time-indexed transition kernels on finite state spaces.
///
/// Time is the integer grid.  The kernel attached to index n moves mass from
/// time n to time n+1, so the m-step transition ending at time n is the
/// ordered product P_{n-m} P_{n-m+1} ... P_{n-1} (backward_product below).
/// Measures are row vectors acted on from the right (mu P), test functions
/// column vectors acted on from the left (P phi).
namespace ergo {

/// Inclusive integer time interval [lo, hi].
struct TimeWindow {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  TimeWindow() = default;
  TimeWindow(std::int64_t l, std::int64_t h);

  std::int64_t length() const { return hi - lo + 1; }
  bool contains(std::int64_t n) const { return lo <= n && n <= hi; }
};

/// Row-stochastic matrix: entry (x, y) is the mass moved from x to y.
///
/// Rows obey the same normalization contract as ProbabilityVector: raw row
/// sums within kRenormalizeLimit of one are renormalized, worse input is
/// rejected.
class StochasticMatrix {
 public:
  StochasticMatrix(std::size_t dim, std::vector<double> row_major);

  static StochasticMatrix identity(std::size_t dim);

  std::size_t dim() const { return dim_; }
  double operator()(std::size_t r, std::size_t c) const {
    return a_[r * dim_ + c];
  }
  std::span<const double> row(std::size_t r) const {
    return {a_.data() + r * dim_, dim_};
  }
  ProbabilityVector row_measure(std::size_t r) const;
  const std::vector<double>& data() const { return a_; }

  /// nu P for a raw row vector nu (no normalization applied).
  std::vector<double> apply_to_measure(const std::vector<double>& nu) const;
  /// P phi for a test function phi.
  std::vector<double> apply_to_function(const std::vector<double>& phi) const;

  friend StochasticMatrix operator*(const StochasticMatrix& a,
                                    const StochasticMatrix& b);

 private:
  std::size_t dim_;
  std::vector<double> a_;
};

/// Schedule n |-> one-step kernel at time n, for n over all of Z.
///
/// Kinds:
///   constant  - one matrix everywhere (declared period 1)
///   periodic  - P_n = phase[n mod p], true mathematical mod (period p)
///   window    - explicit list on [first, first + count); outside the window
///               evaluation clamps to the nearest boundary matrix
///   callback  - arbitrary pure function of n; the callback must be
///               deterministic, it is consulted on every evaluation
class KernelFamily {
 public:
  static constexpr std::size_t kDefaultMaxStates = 4096;

  using Schedule = std::function<StochasticMatrix(std::int64_t)>;

  static KernelFamily constant(StochasticMatrix P,
                               std::size_t max_states = kDefaultMaxStates);
  static KernelFamily periodic(std::vector<StochasticMatrix> phases,
                               std::size_t max_states = kDefaultMaxStates);
  static KernelFamily window(std::vector<StochasticMatrix> matrices,
                             std::int64_t first_time,
                             std::size_t max_states = kDefaultMaxStates);
  static KernelFamily from_callback(Schedule schedule, std::size_t dim,
                                    std::size_t max_states = kDefaultMaxStates);

  std::size_t dim() const { return dim_; }

  /// One-step kernel for the move n -> n+1.
  StochasticMatrix at(std::int64_t n) const;

  /// Declared period: 1 for constant, p for periodic, nullopt otherwise.
  std::optional<std::int64_t> declared_period() const;

  /// For window kinds, the stored index range [first, last] (inclusive);
  /// evaluation outside it clamps.  nullopt for other kinds.
  std::optional<std::pair<std::int64_t, std::int64_t>> window_span() const;

  enum class Kind { constant, periodic, window, callback };
  Kind kind() const { return kind_; }

 private:
  KernelFamily(Kind k, std::size_t dim) : kind_(k), dim_(dim) {}

  Kind kind_;
  std::size_t dim_;
  std::vector<StochasticMatrix> stored_;
  std::int64_t first_time_ = 0;
  Schedule schedule_;
};

enum class ConstructionMethod { cesaro, backward_limit, extension, manual };

/// Family of probability measures on a stored arithmetic grid of times
/// start, start + stride, ..., start + (count-1) * stride.
class InvariantFamily {
 public:
  InvariantFamily(std::int64_t start, std::int64_t stride,
                  std::vector<ProbabilityVector> measures,
                  ConstructionMethod method);

  bool covers(std::int64_t n) const;
  const ProbabilityVector& at(std::int64_t n) const;

  std::int64_t start() const { return start_; }
  std::int64_t stride() const { return stride_; }
  std::size_t count() const { return measures_.size(); }
  std::int64_t last() const {
    return start_ + stride_ * (std::int64_t(measures_.size()) - 1);
  }
  std::vector<std::int64_t> times() const;
  std::size_t state_count() const { return measures_.front().size(); }

  ConstructionMethod method() const { return method_; }

  /// Worst one-grid-step invariance defect, filled in by the constructors in
  /// ergodic.hpp (or by invariance_residual for externally built families).
  double residual() const { return residual_; }
  void set_residual(double r) { residual_ = r; }

 private:
  std::int64_t start_;
  std::int64_t stride_;
  std::vector<ProbabilityVector> measures_;
  ConstructionMethod method_;
  double residual_ = 0.0;
};

/// Ordered product P_{n-m} P_{n-m+1} ... P_{n-1}; m = 0 gives the identity.
/// Cost O(m d^3): use push_measure / pull_function when only the action on a
/// single vector is needed.
StochasticMatrix backward_product(const KernelFamily& K, std::int64_t n,
                                  std::int64_t m);

/// Push nu forward from time s to time t >= s (O((t-s) d^2)).
ProbabilityVector push_measure(const KernelFamily& K, const ProbabilityVector& nu,
                               std::int64_t s, std::int64_t t);

/// Pull phi back: returns (P_s P_{s+1} ... P_{t-1}) phi for t >= s.
std::vector<double> pull_function(const KernelFamily& K, std::vector<double> phi,
                                  std::int64_t s, std::int64_t t);

/// Worst invariance defect of F over the window: the maximum over stored
/// times n in the window (with n + stride also stored and in the window) of
/// tv_distance(push_measure(F(n), n, n + stride), F(n + stride)).
double invariance_residual(const KernelFamily& K, const InvariantFamily& F,
                           TimeWindow window);

}  // namespace ergo
