#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "popdyn/simplex.hpp"

namespace popdyn {

struct StructureFlags {
  bool is_potential = false;
  bool is_monotone = false;
  bool is_strictly_monotone = false;
};

/// Payoff field v: X -> R^A of a single-population game, with optional
/// Jacobian and potential capabilities. Copies share the underlying callables.
class PayoffField {
 public:
  using EvalFn = std::function<Vector(const Vector&)>;
  using JacobianFn = std::function<Matrix(const Vector&)>;
  using PotentialFn = std::function<double(const Vector&)>;

  PayoffField(std::string name, std::size_t n_strategies, EvalFn eval,
              JacobianFn jacobian = {}, PotentialFn potential = {}, StructureFlags flags = {});

  const std::string& name() const noexcept { return name_; }
  std::size_t n_strategies() const noexcept { return n_; }
  const StructureFlags& flags() const noexcept { return flags_; }

  bool has_jacobian() const noexcept { return static_cast<bool>(jacobian_); }
  bool has_potential() const noexcept { return static_cast<bool>(potential_); }

  /// Unchecked evaluation on raw weights; hot loops use this.
  Vector operator()(const Vector& x) const { return eval_(x); }

  Vector eval(const SimplexState& x) const;
  Matrix jacobian(const SimplexState& x) const;
  double potential(const SimplexState& x) const;

  /// Potential on raw weights (for finite-difference probes along segments).
  double potential_raw(const Vector& x) const;

 private:
  std::string name_;
  std::size_t n_;
  EvalFn eval_;
  JacobianFn jacobian_;
  PotentialFn potential_;
  StructureFlags flags_;
};

/// v(x), after checking the dimension.
Vector payoff_eval(const PayoffField& game, const SimplexState& x);

/// Random-matching field v(x) = A x.
PayoffField random_matching_field(const Matrix& a, std::string name = "matrix");

/// Nonatomic congestion field v_a(x) = -slope_a * x_a.
PayoffField congestion_field(const Vector& slopes, std::string name = "congestion");

struct MatrixGameSpec {
  Matrix matrix;
};

struct CongestionGameSpec {
  Vector slopes;
};

struct BuiltinGameSpec {
  std::string name;
};

/// Serializable description of a game.
struct GameSpec {
  std::variant<MatrixGameSpec, CongestionGameSpec, BuiltinGameSpec> kind;
  std::string name;
  std::optional<StructureFlags> declared_flags;
};

GameSpec game_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GameSpec& spec);

/// Builds the payoff field. Built-in names resolve through builtin_game.
PayoffField make_field(const GameSpec& spec);

std::vector<std::string> builtin_names();
/// Resolves a built-in name to its concrete matrix or congestion description.
GameSpec builtin_game(const std::string& name);
/// Known equilibria of a built-in game (empty when none is tabulated).
std::vector<SimplexState> builtin_equilibria(const std::string& name);

struct MonotoneReport {
  double max_violation = 0.0;
  Vector witness_x;
  Vector witness_x_prime;
  bool consistent = false;
};

/// Samples pairs uniformly on X and reports max <v(x') - v(x), x' - x>.
MonotoneReport check_monotone_sampled(const PayoffField& game, int n_pairs, std::uint64_t rng_seed);

struct PotentialReport {
  double max_residual = 0.0;
  double curvature_estimate = 0.0;
  double bound = 0.0;
  bool passed = false;
};

/// Verifies the directional-derivative identity of the potential by forward
/// differences along sampled segments.
PotentialReport check_potential_sampled(const PayoffField& game, int n_points, double fd_step,
                                        std::uint64_t rng_seed);

}  // namespace popdyn
