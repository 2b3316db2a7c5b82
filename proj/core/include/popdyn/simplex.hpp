#pragma once

#include <cstddef>
#include <random>

#include <Eigen/Dense>

namespace popdyn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Components in [-kClampTolerance, 0) are treated as roundoff and clamped.
inline constexpr double kClampTolerance = 1e-12;
/// Maximum allowed deviation of the component sum from one.
inline constexpr double kSumTolerance = 1e-10;

/// A population state: a point of the probability simplex over the strategy set.
class SimplexState {
 public:
  /// Validates `weights`: components below -kClampTolerance or a sum farther
  /// than kSumTolerance from one are rejected; tiny negatives are clamped and
  /// the vector is renormalized.
  explicit SimplexState(Vector weights);

  static SimplexState uniform(std::size_t n);
  static SimplexState vertex(std::size_t n, std::size_t index);

  /// Clamp-and-renormalize for integrator output. Accepts any finite vector
  /// with positive mass; `correction` (if given) receives the sup-norm size of
  /// the adjustment.
  static SimplexState project_drift(const Vector& raw, double* correction = nullptr);

  const Vector& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  double operator[](std::size_t i) const { return weights_(static_cast<Eigen::Index>(i)); }

  bool is_interior() const noexcept { return weights_.minCoeff() > 0.0; }

 private:
  Vector weights_;
};

/// Uniform draw on the simplex by normalized exponential spacings.
SimplexState sample_simplex(std::size_t n, Rng& rng);

/// Sup-norm distance between two states of equal size.
double linf_distance(const SimplexState& a, const SimplexState& b);

/// Euclidean projection onto the simplex (sort-and-threshold).
Vector project_onto_simplex(const Vector& y);

}  // namespace popdyn
