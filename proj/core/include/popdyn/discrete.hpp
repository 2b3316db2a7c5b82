#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "popdyn/continuous.hpp"
#include "popdyn/game.hpp"
#include "popdyn/regularizer.hpp"
#include "popdyn/schedule.hpp"

namespace popdyn {

/// Output of a discrete-time process over steps n = 1..N. Entry k of every
/// series belongs to n = k + 1.
///
/// Channels (NaN where undefined for the process):
///   gap        gap of the empirical mean xbar_n
///   reg_gap    regularized gap of xbar_n at eps_n (RFP, VRFP)
///   potential  F(xbar_n) for FP/RFP/VRFP, F(x_n) for DA
///   regret_<r> sum_{k<=n} <v(x_k), p_r - x_k>
///   fenchel_<r>, energy, r_n, eta, stolz, eta_cesaro   (DA only)
struct RunRecord {
  std::string process;
  std::vector<SimplexState> states;
  std::vector<SimplexState> means;
  std::vector<Vector> payoffs;
  std::vector<NamedState> references;
  std::map<std::string, std::vector<double>> channels;

  // DA only.
  std::vector<Vector> scores;
  std::vector<double> etas;
  Vector initial_score;
  double eta0 = 0.0;
  /// x_1 = Q(eta_0 S_0); otherwise the first template step is skipped.
  bool consistent_start = true;

  const std::vector<double>& channel(const std::string& name) const;
  bool has_channel(const std::string& name) const { return channels.count(name) > 0; }
  std::size_t size() const noexcept { return states.size(); }
  bool is_dual_averaging() const noexcept { return !scores.empty(); }
};

struct DiscreteOptions {
  std::vector<NamedState> references;  // empty -> vertices
};

/// Fictitious play x_{n+1} = BR(xbar_n), lowest-index selection; xbar_n is
/// repeated when it already lies on its best-response face.
RunRecord run_fp(const PayoffField& game, const SimplexState& x1, std::size_t n_steps,
                 const DiscreteOptions& options = {});

/// x_{n+1} = Q(v(xbar_n) / eps).
RunRecord run_rfp(const PayoffField& game, const Regularizer& reg, double eps, const SimplexState& x1,
                  std::size_t n_steps, const DiscreteOptions& options = {});

/// x_{n+1} = Q(v(xbar_n) / eps_n) with eps_n decreasing to zero.
RunRecord run_vrfp(const PayoffField& game, const Regularizer& reg, const Schedule& eps_schedule,
                   const SimplexState& x1, std::size_t n_steps, const DiscreteOptions& options = {});

/// Dual averaging S_n = S_{n-1} + v(x_n), x_{n+1} = Q(eta_n S_n), eta_0 := eta_1.
///
/// Initialization: with neither argument, S_0 = 0 and x_1 = Q(0). With only
/// S_0, x_1 = Q(eta_0 S_0). With only x_1, S_0 is a subgradient of h at x_1
/// scaled by 1/eta_0 so that x_1 = Q(eta_0 S_0) (S_0 = 0 when h is not
/// subdifferentiable there). With both, they are used as given.
RunRecord run_da(const PayoffField& game, const Regularizer& reg, const Schedule& eta_schedule,
                 const std::optional<Vector>& s0, const std::optional<SimplexState>& x1, std::size_t n_steps,
                 const DiscreteOptions& options = {});

/// Running sum_{k<=n} <v(x_k), p - x_k>.
std::vector<double> discrete_regret(const RunRecord& record, const SimplexState& p);

/// Right-hand side of the summed template inequality:
///   E_0 + (h(p) - min h)(1/eta_n - 1/eta_0) + (1/2K) sum_{k<=n} eta_{k-1} |v(x_k)|_*^2,
/// which for S_0 = 0 is (h(p) - min h)/eta_n + ... <= Omega/eta_n + ...
std::vector<double> da_regret_bound(const RunRecord& record, const Regularizer& reg, const SimplexState& p);

struct TemplateReport {
  double max_slack_violation = 0.0;
  std::size_t worst_step = 0;  // n of the largest violation
  std::size_t first_step = 1;
  /// lhs - rhs per checked step.
  std::vector<double> violations;
};

/// Checks E_n <= E_{n-1} + <v(x_n), x_n - p> + (h(p) - min h) r_n
///                + eta_{n-1}/(2K) |v(x_n)|_*^2
/// with E_n = F_h(p, eta_n S_n) / eta_n, at every step.
TemplateReport template_inequality_check(const RunRecord& record, const Regularizer& reg, const SimplexState& p);

struct ZoneLevel {
  double level = 0.0;
  std::optional<std::size_t> first_entry;
  std::optional<std::size_t> last_entry;
  std::size_t exits_after_entry = 0;
  /// Entered, and never left after the first entry.
  bool absorbed = false;
};

struct ZoneReport {
  std::vector<double> coupling;  // F_h(p, eta_n S_n)
  std::vector<ZoneLevel> levels;
};

/// Tracks n -> F_h(p, eta_n S_n) against the zones {F < level}. Steps n <=
/// burn_in are ignored for entry/exit bookkeeping.
ZoneReport fenchel_zone_monitor(const RunRecord& record, const Regularizer& reg, const SimplexState& p,
                                const std::vector<double>& levels, std::size_t burn_in = 0);

}  // namespace popdyn
