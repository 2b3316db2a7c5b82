#include "popdyn/regularizer.hpp"

#include <cmath>
#include <string>

#include "popdyn/error.hpp"

namespace popdyn {

namespace {

void require_size(std::size_t expected, Eigen::Index got, const char* what) {
  if (static_cast<std::size_t>(got) != expected) {
    fail(ErrorKind::kDimensionMismatch, std::string(what) + " has " + std::to_string(got) +
                                            " components, regularizer expects " + std::to_string(expected));
  }
}

void require_finite(const Vector& y) {
  if (!y.allFinite()) fail(ErrorKind::kNumerical, "payoff-space vector has non-finite components");
}

}  // namespace

double primal_norm(ReferenceNorm norm, const Vector& z) {
  return norm == ReferenceNorm::kL1 ? z.lpNorm<1>() : z.norm();
}

double dual_norm(ReferenceNorm norm, const Vector& y) {
  return norm == ReferenceNorm::kL1 ? y.lpNorm<Eigen::Infinity>() : y.norm();
}

double log_sum_exp(const Vector& y) {
  const double top = y.maxCoeff();
  return top + std::log((y.array() - top).exp().sum());
}

// ---------------------------------------------------------------------------

EntropicRegularizer::EntropicRegularizer(std::size_t n) : n_(n) {
  if (n == 0) fail(ErrorKind::kInvalidArgument, "regularizer needs at least one strategy");
}

double EntropicRegularizer::range() const { return std::log(static_cast<double>(n_)); }
double EntropicRegularizer::min_value() const { return -std::log(static_cast<double>(n_)); }

double EntropicRegularizer::value(const SimplexState& x) const {
  require_size(n_, static_cast<Eigen::Index>(x.size()), "state");
  double total = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double xi = x[i];
    if (xi > 0.0) total += xi * std::log(xi);
  }
  return total;
}

double EntropicRegularizer::conjugate(const Vector& y) const {
  require_size(n_, y.size(), "payoff vector");
  require_finite(y);
  return log_sum_exp(y);
}

SimplexState EntropicRegularizer::choice(const Vector& y) const {
  require_size(n_, y.size(), "payoff vector");
  require_finite(y);
  Vector w = (y.array() - y.maxCoeff()).exp().matrix();
  w /= w.sum();
  return SimplexState(std::move(w));
}

Vector EntropicRegularizer::subgradient(const SimplexState& x) const {
  require_size(n_, static_cast<Eigen::Index>(x.size()), "state");
  Vector g(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    if (!(x[i] > 0.0)) {
      fail(ErrorKind::kDomain, "entropic subgradient undefined at the boundary: component " +
                                   std::to_string(i) + " is zero");
    }
    g(static_cast<Eigen::Index>(i)) = 1.0 + std::log(x[i]);
  }
  return g;
}

// ---------------------------------------------------------------------------

EuclideanRegularizer::EuclideanRegularizer(std::size_t n) : n_(n) {
  if (n == 0) fail(ErrorKind::kInvalidArgument, "regularizer needs at least one strategy");
}

double EuclideanRegularizer::range() const { return 0.5 * (1.0 - 1.0 / static_cast<double>(n_)); }
double EuclideanRegularizer::min_value() const { return 0.5 / static_cast<double>(n_); }

double EuclideanRegularizer::value(const SimplexState& x) const {
  require_size(n_, static_cast<Eigen::Index>(x.size()), "state");
  return 0.5 * x.weights().squaredNorm();
}

double EuclideanRegularizer::conjugate(const Vector& y) const {
  const SimplexState p = choice(y);
  return y.dot(p.weights()) - 0.5 * p.weights().squaredNorm();
}

SimplexState EuclideanRegularizer::choice(const Vector& y) const {
  require_size(n_, y.size(), "payoff vector");
  require_finite(y);
  // Centering first keeps the threshold search well scaled for large scores.
  const Vector centered = y.array() - y.mean();
  return SimplexState::project_drift(project_onto_simplex(centered));
}

Vector EuclideanRegularizer::subgradient(const SimplexState& x) const {
  require_size(n_, static_cast<Eigen::Index>(x.size()), "state");
  return x.weights();
}

// ---------------------------------------------------------------------------

RegularizerPtr make_regularizer(const std::string& name, std::size_t n) {
  if (name == "entropic") return std::make_shared<EntropicRegularizer>(n);
  if (name == "euclidean") return std::make_shared<EuclideanRegularizer>(n);
  fail(ErrorKind::kConfig, "unknown regularizer '" + name + "' (expected entropic or euclidean)");
}

double h_value(const Regularizer& reg, const SimplexState& x) { return reg.value(x); }
double conjugate_value(const Regularizer& reg, const Vector& y) { return reg.conjugate(y); }
SimplexState choice(const Regularizer& reg, const Vector& y) { return reg.choice(y); }
Vector subgrad_selection(const Regularizer& reg, const SimplexState& x) { return reg.subgradient(x); }

double fenchel_coupling(const Regularizer& reg, const SimplexState& p, const Vector& y) {
  require_size(reg.size(), static_cast<Eigen::Index>(p.size()), "reference state");
  // Invariant under y -> y + c 1; centering avoids cancellation for large scores.
  const Vector centered = y.array() - y.mean();
  return reg.value(p) + reg.conjugate(centered) - p.weights().dot(centered);
}

}  // namespace popdyn
