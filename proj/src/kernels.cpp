#include "ergo/kernels.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ergo {

TimeWindow::TimeWindow(std::int64_t l, std::int64_t h) : lo(l), hi(h) {
  if (l > h) throw std::invalid_argument("TimeWindow: lo > hi");
}

namespace {

void validate_rows(std::size_t dim, std::vector<double>& a) {
  if (dim == 0) throw std::invalid_argument("StochasticMatrix: dim must be >= 1");
  if (a.size() != dim * dim) {
    throw std::invalid_argument("StochasticMatrix: data size != dim^2");
  }
  for (std::size_t r = 0; r < dim; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double x = a[r * dim + c];
      if (!std::isfinite(x) || x < 0.0) {
        std::ostringstream os;
        os << "StochasticMatrix: entry (" << r << "," << c
           << ") must be finite and nonnegative, got " << x;
        throw std::invalid_argument(os.str());
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > kRenormalizeLimit) {
      std::ostringstream os;
      os << "StochasticMatrix: row " << r << " sums to " << sum;
      throw std::invalid_argument(os.str());
    }
    if (sum != 1.0) {
      for (std::size_t c = 0; c < dim; ++c) a[r * dim + c] /= sum;
    }
  }
}

}  // namespace

StochasticMatrix::StochasticMatrix(std::size_t dim, std::vector<double> row_major)
    : dim_(dim), a_(std::move(row_major)) {
  validate_rows(dim_, a_);
}

StochasticMatrix StochasticMatrix::identity(std::size_t dim) {
  std::vector<double> a(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) a[i * dim + i] = 1.0;
  return StochasticMatrix(dim, std::move(a));
}

ProbabilityVector StochasticMatrix::row_measure(std::size_t r) const {
  return ProbabilityVector(std::vector<double>(a_.begin() + r * dim_,
                                               a_.begin() + (r + 1) * dim_));
}

std::vector<double> StochasticMatrix::apply_to_measure(
    const std::vector<double>& nu) const {
  if (nu.size() != dim_) {
    throw std::invalid_argument("apply_to_measure: dimension mismatch");
  }
  std::vector<double> out(dim_, 0.0);
  for (std::size_t x = 0; x < dim_; ++x) {
    const double w = nu[x];
    if (w == 0.0) continue;
    const double* row = a_.data() + x * dim_;
    for (std::size_t y = 0; y < dim_; ++y) out[y] += w * row[y];
  }
  return out;
}

std::vector<double> StochasticMatrix::apply_to_function(
    const std::vector<double>& phi) const {
  if (phi.size() != dim_) {
    throw std::invalid_argument("apply_to_function: dimension mismatch");
  }
  std::vector<double> out(dim_, 0.0);
  for (std::size_t x = 0; x < dim_; ++x) {
    const double* row = a_.data() + x * dim_;
    double acc = 0.0;
    for (std::size_t y = 0; y < dim_; ++y) acc += row[y] * phi[y];
    out[x] = acc;
  }
  return out;
}

StochasticMatrix operator*(const StochasticMatrix& a, const StochasticMatrix& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("matrix product: dimension mismatch");
  }
  const std::size_t d = a.dim();
  std::vector<double> out(d * d, 0.0);
  for (std::size_t x = 0; x < d; ++x) {
    for (std::size_t k = 0; k < d; ++k) {
      const double w = a(x, k);
      if (w == 0.0) continue;
      const double* row = b.a_.data() + k * d;
      for (std::size_t y = 0; y < d; ++y) out[x * d + y] += w * row[y];
    }
  }
  return StochasticMatrix(d, std::move(out));
}

namespace {

void check_state_cap(std::size_t dim, std::size_t max_states) {
  if (dim == 0) throw std::invalid_argument("KernelFamily: dim must be >= 1");
  if (dim > max_states) {
    std::ostringstream os;
    os << "KernelFamily: " << dim << " states exceeds the cap " << max_states;
    throw std::invalid_argument(os.str());
  }
}

void check_same_dim(const std::vector<StochasticMatrix>& mats) {
  if (mats.empty()) {
    throw std::invalid_argument("KernelFamily: need at least one matrix");
  }
  for (const auto& m : mats) {
    if (m.dim() != mats.front().dim()) {
      throw std::invalid_argument("KernelFamily: matrices must share one dimension");
    }
  }
}

}  // namespace

KernelFamily KernelFamily::constant(StochasticMatrix P, std::size_t max_states) {
  check_state_cap(P.dim(), max_states);
  KernelFamily k(Kind::constant, P.dim());
  k.stored_.push_back(std::move(P));
  return k;
}

KernelFamily KernelFamily::periodic(std::vector<StochasticMatrix> phases,
                                    std::size_t max_states) {
  check_same_dim(phases);
  check_state_cap(phases.front().dim(), max_states);
  KernelFamily k(Kind::periodic, phases.front().dim());
  k.stored_ = std::move(phases);
  return k;
}

KernelFamily KernelFamily::window(std::vector<StochasticMatrix> matrices,
                                  std::int64_t first_time, std::size_t max_states) {
  check_same_dim(matrices);
  check_state_cap(matrices.front().dim(), max_states);
  KernelFamily k(Kind::window, matrices.front().dim());
  k.stored_ = std::move(matrices);
  k.first_time_ = first_time;
  return k;
}

KernelFamily KernelFamily::from_callback(Schedule schedule, std::size_t dim,
                                         std::size_t max_states) {
  check_state_cap(dim, max_states);
  if (!schedule) throw std::invalid_argument("KernelFamily: null callback");
  KernelFamily k(Kind::callback, dim);
  k.schedule_ = std::move(schedule);
  return k;
}

StochasticMatrix KernelFamily::at(std::int64_t n) const {
  switch (kind_) {
    case Kind::constant:
      return stored_.front();
    case Kind::periodic: {
      const std::int64_t p = std::int64_t(stored_.size());
      const std::int64_t r = ((n % p) + p) % p;
      return stored_[std::size_t(r)];
    }
    case Kind::window: {
      std::int64_t idx = n - first_time_;
      if (idx < 0) idx = 0;
      const std::int64_t last = std::int64_t(stored_.size()) - 1;
      if (idx > last) idx = last;
      return stored_[std::size_t(idx)];
    }
    case Kind::callback: {
      StochasticMatrix m = schedule_(n);
      if (m.dim() != dim_) {
        throw std::runtime_error("KernelFamily: callback returned wrong dimension");
      }
      return m;
    }
  }
  throw std::logic_error("KernelFamily: unknown kind");
}

std::optional<std::int64_t> KernelFamily::declared_period() const {
  if (kind_ == Kind::constant) return 1;
  if (kind_ == Kind::periodic) return std::int64_t(stored_.size());
  return std::nullopt;
}

std::optional<std::pair<std::int64_t, std::int64_t>> KernelFamily::window_span()
    const {
  if (kind_ != Kind::window) return std::nullopt;
  return std::make_pair(first_time_,
                        first_time_ + std::int64_t(stored_.size()) - 1);
}

InvariantFamily::InvariantFamily(std::int64_t start, std::int64_t stride,
                                 std::vector<ProbabilityVector> measures,
                                 ConstructionMethod method)
    : start_(start), stride_(stride), measures_(std::move(measures)),
      method_(method) {
  if (stride_ < 1) throw std::invalid_argument("InvariantFamily: stride must be >= 1");
  if (measures_.empty()) {
    throw std::invalid_argument("InvariantFamily: need at least one measure");
  }
  for (const auto& m : measures_) {
    if (m.size() != measures_.front().size()) {
      throw std::invalid_argument("InvariantFamily: measures must share one dimension");
    }
  }
}

bool InvariantFamily::covers(std::int64_t n) const {
  if (n < start_ || n > last()) return false;
  return (n - start_) % stride_ == 0;
}

const ProbabilityVector& InvariantFamily::at(std::int64_t n) const {
  if (!covers(n)) {
    std::ostringstream os;
    os << "InvariantFamily: time " << n << " not on the stored grid ["
       << start_ << ", " << last() << "] stride " << stride_;
    throw std::out_of_range(os.str());
  }
  return measures_[std::size_t((n - start_) / stride_)];
}

std::vector<std::int64_t> InvariantFamily::times() const {
  std::vector<std::int64_t> t;
  t.reserve(measures_.size());
  for (std::size_t j = 0; j < measures_.size(); ++j) {
    t.push_back(start_ + stride_ * std::int64_t(j));
  }
  return t;
}

StochasticMatrix backward_product(const KernelFamily& K, std::int64_t n,
                                  std::int64_t m) {
  if (m < 0) throw std::invalid_argument("backward_product: m must be >= 0");
  if (m == 0) return StochasticMatrix::identity(K.dim());
  StochasticMatrix acc = K.at(n - m);
  for (std::int64_t j = n - m + 1; j < n; ++j) acc = acc * K.at(j);
  return acc;
}

ProbabilityVector push_measure(const KernelFamily& K, const ProbabilityVector& nu,
                               std::int64_t s, std::int64_t t) {
  if (t < s) throw std::invalid_argument("push_measure: requires s <= t");
  if (nu.size() != K.dim()) {
    throw std::invalid_argument("push_measure: dimension mismatch");
  }
  std::vector<double> v = nu.weights();
  std::int64_t steps = 0;
  for (std::int64_t j = s; j < t; ++j) {
    v = K.at(j).apply_to_measure(v);
    // Row-stochastic steps preserve total mass up to roundoff; rescale
    // periodically so very long pushes cannot drift past the constructor's
    // tolerance.
    if (++steps % 1024 == 0) {
      double sum = 0.0;
      for (double x : v) sum += x;
      for (double& x : v) x /= sum;
    }
  }
  return ProbabilityVector(std::move(v));
}

std::vector<double> pull_function(const KernelFamily& K, std::vector<double> phi,
                                  std::int64_t s, std::int64_t t) {
  if (t < s) throw std::invalid_argument("pull_function: requires s <= t");
  if (phi.size() != K.dim()) {
    throw std::invalid_argument("pull_function: dimension mismatch");
  }
  for (std::int64_t j = t - 1; j >= s; --j) {
    phi = K.at(j).apply_to_function(phi);
  }
  return phi;
}

double invariance_residual(const KernelFamily& K, const InvariantFamily& F,
                           TimeWindow window) {
  if (F.state_count() != K.dim()) {
    throw std::invalid_argument("invariance_residual: dimension mismatch");
  }
  const std::int64_t stride = F.stride();
  double worst = 0.0;
  bool any = false;
  for (std::int64_t n = window.lo; n + stride <= window.hi; ++n) {
    if (!F.covers(n) || !F.covers(n + stride)) continue;
    any = true;
    const ProbabilityVector pushed = push_measure(K, F.at(n), n, n + stride);
    worst = std::max(worst, tv_distance(pushed, F.at(n + stride)));
  }
  if (!any && !F.covers(window.lo)) {
    throw std::invalid_argument("invariance_residual: family does not cover the window");
  }
  return worst;
}

}  // namespace ergo
