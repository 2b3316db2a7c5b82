#include "popdyn/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "popdyn/equilibrium.hpp"
#include "popdyn/error.hpp"

namespace popdyn {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

void require_run(const PayoffField& game, const SimplexState& x1, std::size_t n_steps) {
  if (n_steps < 1) fail(ErrorKind::kInvalidArgument, "horizon N must be at least 1");
  if (x1.size() != game.n_strategies()) {
    fail(ErrorKind::kDimensionMismatch, "initial state has " + std::to_string(x1.size()) + " components, game has " +
                                            std::to_string(game.n_strategies()));
  }
}

void require_compatible(const PayoffField& game, const Regularizer& reg) {
  if (reg.size() != game.n_strategies()) {
    fail(ErrorKind::kDimensionMismatch, "regularizer and game have different strategy counts");
  }
}

class Builder {
 public:
  Builder(RunRecord& record, const PayoffField& game, const DiscreteOptions& options, std::string process,
          std::size_t n_steps)
      : record_(record), game_(game) {
    record_.process = std::move(process);
    record_.references = options.references.empty() ? default_references(game.n_strategies()) : options.references;
    for (const auto& ref : record_.references) {
      if (ref.state.size() != game.n_strategies()) {
        fail(ErrorKind::kDimensionMismatch, "reference point '" + ref.name + "' has the wrong size");
      }
    }
    regret_.assign(record_.references.size(), 0.0);
    record_.states.reserve(n_steps);
    record_.means.reserve(n_steps);
    record_.payoffs.reserve(n_steps);
  }

  /// Appends x_n, v(x_n) and xbar_n; returns v(xbar_n).
  Vector push(const SimplexState& x, const Vector& v, const Vector& mean) {
    record_.states.push_back(x);
    record_.payoffs.push_back(v);
    const SimplexState mean_state = SimplexState::project_drift(mean);
    record_.means.push_back(mean_state);
    for (std::size_t r = 0; r < regret_.size(); ++r) {
      regret_[r] += v.dot(record_.references[r].state.weights() - x.weights());
      put("regret_" + record_.references[r].name, regret_[r]);
    }
    const Vector v_mean = game_(mean);
    put("gap", v_mean.maxCoeff() - v_mean.dot(mean));
    return v_mean;
  }

  void put(const std::string& channel, double value) { record_.channels[channel].push_back(value); }

 private:
  RunRecord& record_;
  const PayoffField& game_;
  std::vector<double> regret_;
};

/// Shared loop of the fictitious-play family. `respond(mean, v_mean, n)`
/// returns x_{n+1}; `annotate(mean, v_mean, n)` adds process channels.
RunRecord run_empirical(const PayoffField& game, const SimplexState& x1, std::size_t n_steps,
                        const DiscreteOptions& options, const std::string& process,
                        const std::function<SimplexState(const Vector&, const Vector&, std::size_t)>& respond,
                        const std::function<void(Builder&, const Vector&, const Vector&, std::size_t)>& annotate) {
  RunRecord record;
  Builder builder(record, game, options, process, n_steps);
  SimplexState x = x1;
  Vector mean = x1.weights();
  for (std::size_t n = 1; n <= n_steps; ++n) {
    guard_step(n - 1, [&] {
      if (n > 1) mean += (x.weights() - mean) / static_cast<double>(n);
      if (!mean.allFinite()) fail(ErrorKind::kNumerical, "non-finite empirical mean at n = " + std::to_string(n));
      const Vector v = game(x.weights());
      const Vector v_mean = builder.push(x, v, mean);
      builder.put("potential", game.has_potential() ? game.potential_raw(mean) : kMissing);
      annotate(builder, mean, v_mean, n);
      if (n < n_steps) x = respond(mean, v_mean, n);
    });
  }
  return record;
}

void annotate_regularized(Builder& builder, const Regularizer& reg, const Vector& mean, const Vector& v_mean,
                          double eps) {
  const SimplexState m = SimplexState::project_drift(mean);
  const SimplexState target = reg.choice(v_mean / eps);
  builder.put("reg_gap", v_mean.dot(target.weights() - m.weights()) - eps * (reg.value(target) - reg.value(m)));
  builder.put("eps", eps);
}

}  // namespace

const std::vector<double>& RunRecord::channel(const std::string& name) const {
  const auto it = channels.find(name);
  if (it == channels.end()) fail(ErrorKind::kInvalidArgument, "run record has no channel '" + name + "'");
  return it->second;
}

RunRecord run_fp(const PayoffField& game, const SimplexState& x1, std::size_t n_steps,
                 const DiscreteOptions& options) {
  require_run(game, x1, n_steps);
  return run_empirical(
      game, x1, n_steps, options, "fp",
      [](const Vector& mean, const Vector& v_mean, std::size_t) {
        const BestResponseResult br = best_response_of_payoffs(v_mean);
        const SimplexState m = SimplexState::project_drift(mean);
        return in_best_response_face(br, m) ? m : br.selected_vertex;
      },
      [](Builder& b, const Vector&, const Vector&, std::size_t) { b.put("reg_gap", kMissing); });
}

RunRecord run_rfp(const PayoffField& game, const Regularizer& reg, double eps, const SimplexState& x1,
                  std::size_t n_steps, const DiscreteOptions& options) {
  require_run(game, x1, n_steps);
  require_compatible(game, reg);
  if (!(eps > 0.0) || !std::isfinite(eps)) fail(ErrorKind::kInvalidArgument, "regularization weight must be positive");
  return run_empirical(
      game, x1, n_steps, options, "rfp",
      [&](const Vector&, const Vector& v_mean, std::size_t) { return reg.choice(v_mean / eps); },
      [&](Builder& b, const Vector& mean, const Vector& v_mean, std::size_t) {
        annotate_regularized(b, reg, mean, v_mean, eps);
      });
}

RunRecord run_vrfp(const PayoffField& game, const Regularizer& reg, const Schedule& eps_schedule,
                   const SimplexState& x1, std::size_t n_steps, const DiscreteOptions& options) {
  require_run(game, x1, n_steps);
  require_compatible(game, reg);
  if (!eps_schedule.is_vanishing()) {
    fail(ErrorKind::kInvalidArgument, "VRFP needs a regularization schedule decreasing to zero");
  }
  eps_schedule.validate_positive_from(1.0);
  return run_empirical(
      game, x1, n_steps, options, "vrfp",
      [&](const Vector&, const Vector& v_mean, std::size_t n) {
        return reg.choice(v_mean / eps_schedule(static_cast<double>(n)));
      },
      [&](Builder& b, const Vector& mean, const Vector& v_mean, std::size_t n) {
        annotate_regularized(b, reg, mean, v_mean, eps_schedule(static_cast<double>(n)));
      });
}

RunRecord run_da(const PayoffField& game, const Regularizer& reg, const Schedule& eta_schedule,
                 const std::optional<Vector>& s0, const std::optional<SimplexState>& x1, std::size_t n_steps,
                 const DiscreteOptions& options) {
  require_compatible(game, reg);
  if (!eta_schedule.is_nonincreasing()) fail(ErrorKind::kInvalidArgument, "learning rate must be non-increasing");
  eta_schedule.validate_positive_from(1.0);
  const std::size_t n = game.n_strategies();
  const double eta0 = eta_schedule(1.0);

  Vector score = Vector::Zero(static_cast<Eigen::Index>(n));
  if (s0) {
    if (static_cast<std::size_t>(s0->size()) != n) fail(ErrorKind::kDimensionMismatch, "initial score has the wrong size");
    if (!s0->allFinite()) fail(ErrorKind::kInvalidArgument, "initial score must be finite");
    score = *s0;
  } else if (x1) {
    if (x1->size() != n) fail(ErrorKind::kDimensionMismatch, "initial state has the wrong size");
    try {
      score = reg.subgradient(*x1) / eta0;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDomain) throw;
    }
  }
  SimplexState x = x1 ? *x1 : reg.choice(eta0 * score);
  require_run(game, x, n_steps);

  RunRecord record;
  record.initial_score = score;
  record.eta0 = eta0;
  record.consistent_start = linf_distance(x, reg.choice(eta0 * score)) <= 1e-12;
  record.scores.reserve(n_steps);
  record.etas.reserve(n_steps);
  Builder builder(record, game, options, "da", n_steps);
  const SimplexState primary = record.references.front().state;

  Vector mean = x.weights();
  double previous_eta = eta0;
  double eta_sum = 0.0;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    guard_step(k - 1, [&] {
      const double step = static_cast<double>(k);
      if (k > 1) mean += (x.weights() - mean) / step;
      const Vector v = game(x.weights());
      score += v;
      if (!score.allFinite()) fail(ErrorKind::kNumerical, "non-finite score at n = " + std::to_string(k));
      const double eta = eta_schedule(step);
      eta_sum += eta;
      record.scores.push_back(score);
      record.etas.push_back(eta);
      builder.push(x, v, mean);
      builder.put("reg_gap", kMissing);
      builder.put("potential", game.has_potential() ? game.potential(x) : kMissing);
      const Vector y = eta * score;
      for (const auto& ref : record.references) builder.put("fenchel_" + ref.name, fenchel_coupling(reg, ref.state, y));
      builder.put("energy", fenchel_coupling(reg, primary, y) / eta);
      builder.put("r_n", 1.0 / eta - 1.0 / previous_eta);
      builder.put("eta", eta);
      builder.put("stolz", 1.0 / (step * eta));
      builder.put("eta_cesaro", eta_sum / step);
      previous_eta = eta;
      if (k < n_steps) x = reg.choice(y);
    });
  }
  return record;
}

std::vector<double> discrete_regret(const RunRecord& record, const SimplexState& p) {
  if (record.size() == 0 || record.payoffs.size() != record.size()) {
    fail(ErrorKind::kInvalidArgument, "run record has no states");
  }
  std::vector<double> out(record.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < record.size(); ++k) {
    if (record.states[k].size() != p.size()) fail(ErrorKind::kDimensionMismatch, "comparator has the wrong size");
    sum += record.payoffs[k].dot(p.weights() - record.states[k].weights());
    out[k] = sum;
  }
  return out;
}

namespace {

void require_da(const RunRecord& record, const Regularizer& reg, const SimplexState& p) {
  if (!record.is_dual_averaging() || record.etas.size() != record.size()) {
    fail(ErrorKind::kInvalidArgument, "record lacks dual-averaging channels (scores, learning rates)");
  }
  if (reg.size() != p.size() || p.size() != record.states.front().size()) {
    fail(ErrorKind::kDimensionMismatch, "comparator, regularizer and record sizes differ");
  }
}

}  // namespace

std::vector<double> da_regret_bound(const RunRecord& record, const Regularizer& reg, const SimplexState& p) {
  require_da(record, reg, p);
  const double spread = reg.value(p) - reg.min_value();
  const double e0 = fenchel_coupling(reg, p, record.eta0 * record.initial_score) / record.eta0;
  std::vector<double> out(record.size());
  double quadratic = 0.0;
  double previous_eta = record.eta0;
  for (std::size_t k = 0; k < record.size(); ++k) {
    const double dual = dual_norm(reg.reference_norm(), record.payoffs[k]);
    quadratic += previous_eta * dual * dual / (2.0 * reg.modulus());
    previous_eta = record.etas[k];
    out[k] = e0 + spread * (1.0 / record.etas[k] - 1.0 / record.eta0) + quadratic;
  }
  return out;
}

TemplateReport template_inequality_check(const RunRecord& record, const Regularizer& reg, const SimplexState& p) {
  require_da(record, reg, p);
  const double spread = reg.value(p) - reg.min_value();
  TemplateReport report;
  report.first_step = record.consistent_start ? 1 : 2;
  report.max_slack_violation = -std::numeric_limits<double>::infinity();

  double previous_eta = record.eta0;
  double previous_energy = fenchel_coupling(reg, p, record.eta0 * record.initial_score) / record.eta0;
  for (std::size_t k = 0; k < record.size(); ++k) {
    const double eta = record.etas[k];
    const double energy = fenchel_coupling(reg, p, eta * record.scores[k]) / eta;
    const Vector& v = record.payoffs[k];
    const double dual = dual_norm(reg.reference_norm(), v);
    const double rhs = previous_energy + v.dot(record.states[k].weights() - p.weights()) +
                       spread * (1.0 / eta - 1.0 / previous_eta) + previous_eta * dual * dual / (2.0 * reg.modulus());
    if (k + 1 >= report.first_step) {
      const double violation = energy - rhs;
      report.violations.push_back(violation);
      if (violation > report.max_slack_violation) {
        report.max_slack_violation = violation;
        report.worst_step = k + 1;
      }
    }
    previous_energy = energy;
    previous_eta = eta;
  }
  if (report.violations.empty()) report.max_slack_violation = 0.0;
  return report;
}

ZoneReport fenchel_zone_monitor(const RunRecord& record, const Regularizer& reg, const SimplexState& p,
                                const std::vector<double>& levels, std::size_t burn_in) {
  require_da(record, reg, p);
  ZoneReport report;
  report.coupling.reserve(record.size());
  for (std::size_t k = 0; k < record.size(); ++k) {
    report.coupling.push_back(fenchel_coupling(reg, p, record.etas[k] * record.scores[k]));
  }
  for (double level : levels) {
    if (!(level > 0.0)) fail(ErrorKind::kInvalidArgument, "zone levels must be positive");
    ZoneLevel zone;
    zone.level = level;
    bool inside = false;
    for (std::size_t k = burn_in; k < record.size(); ++k) {
      const bool now = report.coupling[k] < level;
      if (now && !inside) {
        if (!zone.first_entry) zone.first_entry = k + 1;
        zone.last_entry = k + 1;
      }
      if (!now && inside) ++zone.exits_after_entry;
      inside = now;
    }
    zone.absorbed = zone.first_entry.has_value() && zone.exits_after_entry == 0;
    report.levels.push_back(zone);
  }
  return report;
}

}  // namespace popdyn
