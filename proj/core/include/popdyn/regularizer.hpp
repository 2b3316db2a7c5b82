#pragma once

#include <memory>
#include <string>

#include "popdyn/simplex.hpp"

namespace popdyn {

/// Norm relative to which a regularizer is strongly convex.
enum class ReferenceNorm { kL1, kL2 };

double primal_norm(ReferenceNorm norm, const Vector& z);
/// Dual of the reference norm (L-infinity for L1, L2 for L2).
double dual_norm(ReferenceNorm norm, const Vector& y);

/// A strictly convex regularizer h supported on the simplex, together with its
/// convex conjugate h*, the choice map Q = grad h*, and a continuous
/// subgradient selection on the prox-domain.
class Regularizer {
 public:
  virtual ~Regularizer() = default;

  virtual std::string name() const = 0;
  virtual std::size_t size() const = 0;

  /// Strong-convexity modulus K relative to reference_norm().
  virtual double modulus() const = 0;
  virtual ReferenceNorm reference_norm() const = 0;

  /// max h - min h over the simplex.
  virtual double range() const = 0;
  virtual double min_value() const = 0;

  virtual double value(const SimplexState& x) const = 0;
  virtual double conjugate(const Vector& y) const = 0;
  virtual SimplexState choice(const Vector& y) const = 0;

  /// Element of the subdifferential at x. Throws a domain error outside the
  /// prox-domain.
  virtual Vector subgradient(const SimplexState& x) const = 0;
};

using RegularizerPtr = std::shared_ptr<const Regularizer>;

/// h(x) = sum x log x; Q is the logit (softmax) map.
class EntropicRegularizer final : public Regularizer {
 public:
  explicit EntropicRegularizer(std::size_t n);

  std::string name() const override { return "entropic"; }
  std::size_t size() const override { return n_; }
  double modulus() const override { return 1.0; }
  ReferenceNorm reference_norm() const override { return ReferenceNorm::kL1; }
  double range() const override;
  double min_value() const override;

  double value(const SimplexState& x) const override;
  double conjugate(const Vector& y) const override;
  SimplexState choice(const Vector& y) const override;
  Vector subgradient(const SimplexState& x) const override;

 private:
  std::size_t n_;
};

/// h(x) = 1/2 |x|^2; Q is the Euclidean projection onto the simplex.
class EuclideanRegularizer final : public Regularizer {
 public:
  explicit EuclideanRegularizer(std::size_t n);

  std::string name() const override { return "euclidean"; }
  std::size_t size() const override { return n_; }
  double modulus() const override { return 1.0; }
  ReferenceNorm reference_norm() const override { return ReferenceNorm::kL2; }
  double range() const override;
  double min_value() const override;

  double value(const SimplexState& x) const override;
  double conjugate(const Vector& y) const override;
  SimplexState choice(const Vector& y) const override;
  Vector subgradient(const SimplexState& x) const override;

 private:
  std::size_t n_;
};

/// "entropic" or "euclidean".
RegularizerPtr make_regularizer(const std::string& name, std::size_t n);

// Free-function spellings of the capabilities.
double h_value(const Regularizer& reg, const SimplexState& x);
double conjugate_value(const Regularizer& reg, const Vector& y);
SimplexState choice(const Regularizer& reg, const Vector& y);
Vector subgrad_selection(const Regularizer& reg, const SimplexState& x);

/// Fenchel coupling h(p) + h*(y) - <p, y>. Nonnegative, zero iff p = Q(y).
double fenchel_coupling(const Regularizer& reg, const SimplexState& p, const Vector& y);

/// log sum exp with max shift.
double log_sum_exp(const Vector& y);

}  // namespace popdyn
