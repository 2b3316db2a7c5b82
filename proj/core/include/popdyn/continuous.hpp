#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "popdyn/game.hpp"
#include "popdyn/regularizer.hpp"
#include "popdyn/schedule.hpp"

namespace popdyn {

/// A reference point for the fenchel_<name> / regret_<name> channels.
struct NamedState {
  std::string name;
  SimplexState state;
};

/// Vertices e0..e{n-1}, followed by `extra`.
std::vector<NamedState> default_references(std::size_t n, const std::vector<NamedState>& extra = {});

/// Recorded output of a continuous-time integration.
///
/// `states` holds the integrated population variable (the mean process for
/// the best-reply family, the played state for DAD); `means` holds its running
/// time average, the exact solution of d xbar/dt = (x - xbar)/t started at
/// t0 = dt with xbar = x, using trapezoidal quadrature. Channels hold NaN where
/// a diagnostic is undefined.
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<SimplexState> states;
  std::vector<SimplexState> means;
  std::vector<Vector> payoffs;
  std::vector<Vector> scores;  // DAD only
  std::vector<NamedState> references;
  std::map<std::string, std::vector<double>> channels;

  double dt = 0.0;
  std::size_t stride = 1;
  std::size_t steps = 0;
  double max_projection_correction = 0.0;
  int max_events_per_step = 0;

  const std::vector<double>& channel(const std::string& name) const;
  bool has_channel(const std::string& name) const { return channels.count(name) > 0; }
  std::size_t size() const noexcept { return times.size(); }
};

struct IntegrationOptions {
  double horizon = 10.0;
  double dt = 1e-3;
  /// Recording cap: every ceil(steps / max_records)-th step is kept (the final
  /// step always is).
  std::size_t max_records = 10000;
  std::vector<NamedState> references;  // empty -> vertices
};

/// Best-response dynamics dx/dt in BR(x) - x. Explicit Euler on the
/// lowest-index selection, with each step split at best-response switches and
/// a zero step at rest points (x on its best-response face).
TrajectoryRecord integrate_brd(const PayoffField& game, const SimplexState& x0, const IntegrationOptions& options);

/// Regularized best-response dynamics dx/dt = Q(v(x)/eps) - x, RK4.
TrajectoryRecord integrate_rbrd(const PayoffField& game, const Regularizer& reg, double eps, const SimplexState& x0,
                                const IntegrationOptions& options);

/// Vanishing regularization dx/dt = Q(v(x)/eps_t) - x, RK4 with eps frozen at
/// the left endpoint of each step.
TrajectoryRecord integrate_vbrd(const PayoffField& game, const Regularizer& reg, const Schedule& eps_schedule,
                                const SimplexState& x0, const IntegrationOptions& options);

/// Dual averaging dynamics dy/dt = v(Q(eta_t y)), x_t = Q(eta_t y_t); RK4 with
/// eta frozen at the left endpoint of each step.
TrajectoryRecord integrate_dad(const PayoffField& game, const Regularizer& reg, const Schedule& eta_schedule,
                               const Vector& y0, const IntegrationOptions& options);

/// x_a (v_a(x) - <v(x), x>).
Vector replicator_rhs(const PayoffField& game, const SimplexState& x);

/// Payoffs centered over supp(x), zero off the support.
Vector projection_rhs(const PayoffField& game, const SimplexState& x);

struct RegretSeries {
  std::vector<double> values;
  /// Richardson estimate of the quadrature error (fine vs. every-other-point grid).
  std::vector<double> error_estimate;
};

/// Trapezoidal R_p(t) = int_0^t <v(x_s), p - x_s> ds over the recorded grid.
RegretSeries regret_along_trajectory(const TrajectoryRecord& traj, const SimplexState& p);

}  // namespace popdyn
