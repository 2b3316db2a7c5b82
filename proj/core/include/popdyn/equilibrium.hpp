#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "popdyn/error.hpp"
#include "popdyn/game.hpp"
#include "popdyn/regularizer.hpp"

namespace popdyn {

/// Payoffs within this of the maximum count as best responses.
inline constexpr double kArgmaxTolerance = 1e-12;
/// Mass allowed outside the best-response face for a state to count as a rest point.
inline constexpr double kStationaryTolerance = 1e-9;

struct BestResponseResult {
  std::vector<std::size_t> argmax_indices;
  SimplexState selected_vertex;
  double max_value;
};

/// Best-response set of v(x); the selection is the vertex of the lowest index.
BestResponseResult best_response(const PayoffField& game, const SimplexState& x);
BestResponseResult best_response_of_payoffs(const Vector& payoffs);

/// True when x lies (within kStationaryTolerance) on the face spanned by its
/// best responses, i.e. x is a rest point of the best-response dynamics.
bool in_best_response_face(const BestResponseResult& br, const SimplexState& x);

/// Q_h(v(x) / eps).
SimplexState regularized_best_response(const PayoffField& game, const Regularizer& reg, double eps,
                                       const SimplexState& x);

/// <v(x), BR(x) - x>.
double gap(const PayoffField& game, const SimplexState& x);

/// max_x' <v(x), x' - x> - eps (h(x') - h(x)).
double regularized_gap(const PayoffField& game, const Regularizer& reg, double eps, const SimplexState& x);

struct MviReport {
  double max_violation;
  Vector witness;
};

/// max over uniformly sampled x of <v(x), x - x_star>.
MviReport mvi_violation(const PayoffField& game, const SimplexState& x_star, int n_samples,
                        std::uint64_t rng_seed);

struct EssReport {
  double max_local_violation;
  Vector witness;
};

/// max of <v(x), x - x_star> over sampled x != x_star within `radius` (L2) of x_star.
EssReport ess_check(const PayoffField& game, const SimplexState& x_star, double radius, int n_samples,
                    std::uint64_t rng_seed);

struct CertificateFlags {
  bool is_eq = false;
  bool is_mvi_consistent = false;
  bool is_ess_consistent = false;
};

struct EquilibriumCertificate {
  SimplexState point;
  double svi_residual;
  double mvi_violation;
  double ess_violation;
  double fixed_point_residual;
  int iterations;
  CertificateFlags flags;
};

nlohmann::json to_json(const EquilibriumCertificate& cert);

struct CertificateOptions {
  double gap_tolerance = 1e-8;
  double mvi_tolerance = 1e-9;
  double ess_radius = 0.1;
  int n_samples = 2000;
  std::uint64_t rng_seed = 0;
};

/// Evaluates the sampled SVI / MVI / ESS evidence at `point`.
EquilibriumCertificate certify(const PayoffField& game, const SimplexState& point,
                               const CertificateOptions& options = {});

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& message, SimplexState best, double residual, int iterations)
      : Error(ErrorKind::kNonConvergence, message),
        best_(std::move(best)),
        residual_(residual),
        iterations_(iterations) {}

  const SimplexState& best_iterate() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  SimplexState best_;
  double residual_;
  int iterations_;
};

struct FixedPointOptions {
  double damping = 0.5;
  int max_iter = 100000;
  double tol = 1e-10;
  CertificateOptions certificate{};
};

/// Fixed-point solver for an eps-regularized equilibrium x = rBR(x): Newton
/// steps on the residual rBR(x) - x (finite-difference Jacobian, backtracking),
/// falling back to the damped iteration x <- (1 - d) x + d rBR(x) whose
/// damping is halved whenever the residual grows. Throws NonConvergenceError
/// when max_iter is exhausted.
EquilibriumCertificate solve_regularized_equilibrium(const PayoffField& game, const Regularizer& reg, double eps,
                                                     const SimplexState& x0, const FixedPointOptions& options = {});

struct LatticePoint {
  SimplexState state;
  double gap;
  std::vector<int> coordinates;
};

struct BruteForceResult {
  /// Candidates within `slack` of the minimum gap, sorted by gap.
  std::vector<LatticePoint> points;
  double min_gap;
  /// Largest gap difference between neighbouring lattice points.
  double slack;
  /// Connected components (lattice adjacency) of `points`, as indices into it.
  std::vector<std::vector<std::size_t>> clusters;
};

/// Grid oracle: enumerates the simplex lattice with the given spacing.
BruteForceResult brute_force_equilibria(const PayoffField& game, double grid_step);

}  // namespace popdyn
