#include "popdyn/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "popdyn/error.hpp"

namespace popdyn {

namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    fail(ErrorKind::kNumerical, std::string(what) + " has non-finite components");
  }
}

}  // namespace

SimplexState::SimplexState(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) {
    fail(ErrorKind::kInvalidArgument, "simplex state must have at least one component");
  }
  require_finite(weights_, "simplex state");
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (weights_(i) < -kClampTolerance) {
      fail(ErrorKind::kDomain, "simplex state component " + std::to_string(i) +
                                   " is negative (" + std::to_string(weights_(i)) + ")");
    }
    weights_(i) = std::max(weights_(i), 0.0);
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > kSumTolerance) {
    fail(ErrorKind::kDomain, "simplex state components sum to " + std::to_string(total));
  }
  weights_ /= total;
}

SimplexState SimplexState::uniform(std::size_t n) {
  if (n == 0) fail(ErrorKind::kInvalidArgument, "strategy count must be positive");
  return SimplexState(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

SimplexState SimplexState::vertex(std::size_t n, std::size_t index) {
  if (index >= n) fail(ErrorKind::kInvalidArgument, "vertex index out of range");
  Vector w = Vector::Zero(static_cast<Eigen::Index>(n));
  w(static_cast<Eigen::Index>(index)) = 1.0;
  return SimplexState(std::move(w));
}

SimplexState SimplexState::project_drift(const Vector& raw, double* correction) {
  require_finite(raw, "integrator state");
  Vector w = raw.cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0)) fail(ErrorKind::kNumerical, "integrator state lost all mass");
  w /= total;
  if (correction != nullptr) *correction = (w - raw).cwiseAbs().maxCoeff();
  return SimplexState(std::move(w));
}

SimplexState sample_simplex(std::size_t n, Rng& rng) {
  std::exponential_distribution<double> exp1(1.0);
  Vector w(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = exp1(rng);
  w /= w.sum();
  return SimplexState(std::move(w));
}

double linf_distance(const SimplexState& a, const SimplexState& b) {
  if (a.size() != b.size()) fail(ErrorKind::kDimensionMismatch, "states of different size");
  return (a.weights() - b.weights()).cwiseAbs().maxCoeff();
}

Vector project_onto_simplex(const Vector& y) {
  const Eigen::Index n = y.size();
  std::vector<double> sorted(y.data(), y.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) threshold = candidate;
  }
  return (y.array() - threshold).cwiseMax(0.0).matrix();
}

}  // namespace popdyn
