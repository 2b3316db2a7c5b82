#include "popdyn/invariants.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "popdyn/continuous.hpp"
#include "popdyn/discrete.hpp"
#include "popdyn/equilibrium.hpp"
#include "popdyn/error.hpp"
#include "popdyn/harness.hpp"

namespace popdyn {

namespace {

using nlohmann::json;
using Results = std::vector<InvariantResult>;
using Check = std::function<Results(const json&)>;

InvariantResult result(std::string name, double value, double threshold, std::string detail = {}) {
  InvariantResult r;
  r.name = std::move(name);
  r.value = value;
  r.threshold = threshold;
  r.passed = value <= threshold;
  r.detail = std::move(detail);
  return r;
}

PayoffField game(const std::string& name) { return make_field(builtin_game(name)); }

SimplexState state(const json& j, std::size_t n) {
  if (j.is_string() && j.get<std::string>() == "uniform") return SimplexState::uniform(n);
  const auto w = j.get<std::vector<double>>();
  if (w.size() != n) fail(ErrorKind::kConfig, "fixture state has the wrong size");
  return SimplexState(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())));
}

Vector random_scores(std::size_t n, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = normal(rng);
  return y;
}

const std::vector<std::string> kRegularizers = {"entropic", "euclidean"};

Results choice_gradient(const json& p) {
  const int samples = p.value("samples", 100);
  const double delta = p.value("delta", 1e-5);
  Rng rng(p.value("seed", 7u));
  double worst = 0.0;
  for (const auto& name : kRegularizers) {
    for (std::size_t n : {2u, 3u, 5u}) {
      const auto reg = make_regularizer(name, n);
      for (int s = 0; s < samples; ++s) {
        const Vector y = random_scores(n, 2.0, rng);
        const Vector q = reg->choice(y).weights();
        Vector fd(q.size());
        for (Eigen::Index i = 0; i < y.size(); ++i) {
          Vector up = y;
          Vector down = y;
          up(i) += delta;
          down(i) -= delta;
          fd(i) = (reg->conjugate(up) - reg->conjugate(down)) / (2.0 * delta);
        }
        worst = std::max(worst, (fd - q).cwiseAbs().maxCoeff() / q.cwiseAbs().maxCoeff());
      }
    }
  }
  return {result("choice_gradient", worst, p.value("tolerance", 1e-5), "max relative error of Q vs FD grad h*")};
}

Results fenchel_bound(const json& p) {
  const int pairs = p.value("pairs", 1000);
  Rng rng(p.value("seed", 11u));
  double negativity = 0.0;
  double convexity = 0.0;
  for (const auto& name : kRegularizers) {
    for (std::size_t n : {2u, 3u, 4u}) {
      const auto reg = make_regularizer(name, n);
      for (int s = 0; s < pairs; ++s) {
        const SimplexState x = s % 10 == 0 ? SimplexState::vertex(n, static_cast<std::size_t>(s) % n)
                                           : sample_simplex(n, rng);
        const Vector y = random_scores(n, 3.0, rng);
        const double f = fenchel_coupling(*reg, x, y);
        const double dist = primal_norm(reg->reference_norm(), reg->choice(y).weights() - x.weights());
        negativity = std::max(negativity, -f);
        convexity = std::max(convexity, 0.5 * reg->modulus() * dist * dist - f);
      }
    }
  }
  const double tol = p.value("tolerance", 1e-10);
  return {result("fenchel_nonnegative", negativity, tol), result("fenchel_strong_convexity", convexity, tol)};
}

Results choice_identities(const json& p) {
  Rng rng(p.value("seed", 13u));
  double shift = 0.0;
  double inverse = 0.0;
  for (const auto& name : kRegularizers) {
    const auto reg = make_regularizer(name, 4);
    for (int s = 0; s < p.value("samples", 200); ++s) {
      const Vector y = random_scores(4, 2.0, rng);
      const double c = std::normal_distribution<double>(0.0, 10.0)(rng);
      shift = std::max(shift, (reg->choice(y + Vector::Constant(4, c)).weights() - reg->choice(y).weights())
                                  .cwiseAbs()
                                  .maxCoeff());
      const SimplexState x = sample_simplex(4, rng);
      if (x.weights().minCoeff() > 1e-6) inverse = std::max(inverse, linf_distance(reg->choice(reg->subgradient(x)), x));
    }
  }
  return {result("choice_shift_invariance", shift, p.value("shift_tolerance", 1e-12)),
          result("inverse_differentiability", inverse, p.value("inverse_tolerance", 1e-9))};
}

Results game_structure(const json& p) {
  const auto rps = check_monotone_sampled(game("rps"), p.value("pairs", 1000), p.value("seed", 17u));
  const auto potential = check_potential_sampled(game("congestion"), p.value("points", 200), 1e-5, 19);
  const PayoffField congestion = game("congestion");
  Rng rng(23);
  double jac = 0.0;
  for (int s = 0; s < 50; ++s) {
    const SimplexState x = sample_simplex(2, rng);
    const Matrix analytic = congestion.jacobian(x);
    for (Eigen::Index j = 0; j < 2; ++j) {
      Vector up = x.weights();
      Vector down = x.weights();
      up(j) += 1e-5;
      down(j) -= 1e-5;
      const Vector col = (congestion(up) - congestion(down)) / 2e-5;
      jac = std::max(jac, (col - analytic.col(j)).cwiseAbs().maxCoeff() / std::max(1.0, analytic.col(j).norm()));
    }
  }
  return {result("antisymmetric_monotone_equality", std::abs(rps.max_violation), 1e-12),
          result("potential_identity", potential.max_residual, potential.bound),
          result("jacobian_finite_difference", jac, 1e-6)};
}

double max_increase(const std::vector<double>& series) {
  double worst = 0.0;
  for (std::size_t k = 1; k < series.size(); ++k) worst = std::max(worst, series[k] - series[k - 1]);
  return worst;
}

IntegrationOptions options(double horizon, double dt) {
  IntegrationOptions o;
  o.horizon = horizon;
  o.dt = dt;
  o.max_records = static_cast<std::size_t>(std::llround(horizon / dt)) + 1;
  return o;
}

Results brd(const json& p) {
  const PayoffField rps = game("rps");
  const double t = p.value("T", 10.0);
  const double dt = p.value("dt", 1e-3);
  const auto decay = integrate_brd(rps, state(p.value("start", json::array({0.6, 0.3, 0.1})), 3), options(t, dt));
  const auto& gap = decay.channel("gap");
  double envelope = 0.0;
  for (std::size_t k = 0; k < gap.size(); ++k) {
    envelope = std::max(envelope, gap[k] - gap.front() * std::exp(-decay.times[k]) * (1.0 + 10.0 * dt) - 1e-6);
  }
  const auto rest = integrate_brd(rps, SimplexState::uniform(3), options(t, dt));
  const auto ascent =
      integrate_brd(game("congestion"), state(json::array({0.1, 0.9}), 2), options(p.value("T_potential", 50.0), dt));
  std::vector<double> negated = ascent.channel("potential");
  for (double& v : negated) v = -v;
  return {result("brd_gap_decay", gap.back(), gap.front() * std::exp(-t) * 1.1 + 1e-6),
          result("brd_gap_monotone", max_increase(gap), 1e-9),
          result("brd_gap_envelope", envelope, 0.0),
          result("brd_rest_point", linf_distance(rest.states.back(), SimplexState::uniform(3)), 1e-9),
          result("brd_potential_ascent", max_increase(negated), 1e-9),
          result("brd_potential_terminal_gap", ascent.channel("gap").back(), 1e-6),
          result("brd_projection_correction", std::max(decay.max_projection_correction,
                                                       ascent.max_projection_correction), 1e-12)};
}

Results rbrd(const json& p) {
  const auto reg3 = make_regularizer("entropic", 3);
  const auto reg2 = make_regularizer("entropic", 2);
  const double dt = p.value("dt", 1e-3);
  const auto rps = integrate_rbrd(game("rps"), *reg3, 1.0, state(json::array({0.6, 0.3, 0.1}), 3),
                                  options(p.value("T", 40.0), dt));
  const auto cong = integrate_rbrd(game("congestion"), *reg2, 0.5, state(json::array({0.1, 0.9}), 2),
                                   options(p.value("T", 40.0), dt));
  std::vector<double> negated = cong.channel("potential");
  for (double& v : negated) v = -v;
  double correlation = 0.0;
  for (const auto* rec : {&rps, &cong}) {
    for (double v : rec->channel("reg_correlation")) correlation = std::max(correlation, -v);
  }
  return {result("rbrd_reg_gap_monotone", max_increase(rps.channel("reg_gap")), 1e-9),
          result("rbrd_terminal_distance", linf_distance(rps.states.back(), SimplexState::uniform(3)), 1e-8),
          result("rbrd_regularized_potential_ascent", max_increase(negated), 1e-9),
          result("rbrd_regularized_correlation", correlation, 1e-10)};
}

Results vbrd(const json& p) {
  const auto reg3 = make_regularizer("entropic", 3);
  const auto rec = integrate_vbrd(game("rps"), *reg3, Schedule::power(1.0, 1.0, 1.0),
                                  state(json::array({0.6, 0.3, 0.1}), 3), options(p.value("T", 200.0), 1e-2));
  return {result("vbrd_energy_monotone", max_increase(rec.channel("energy")), p.value("slack", 1e-9)),
          result("vbrd_terminal_gap", rec.channel("gap").back(), p.value("gap_tolerance", 5e-3))};
}

/// Central difference of the DAD velocity d/dt Q(y) = DQ(y) v(Q(y)) (eta = 1).
Vector dad_velocity(const PayoffField& g, const Regularizer& reg, const Vector& y) {
  const Vector v = g(reg.choice(y).weights());
  const double h = 1e-5;
  return (reg.choice(y + h * v).weights() - reg.choice(y - h * v).weights()) / (2.0 * h);
}

Results dad(const json& p) {
  const auto reg = make_regularizer("entropic", 3);
  const PayoffField rps = game("rps");
  const Schedule one = Schedule::constant(1.0);
  const double omega = reg->range();

  // Regret bound from the origin, and from a generic start against F(p, y0).
  const auto origin = integrate_dad(rps, *reg, one, Vector::Zero(3), options(p.value("T", 100.0), 1e-3));
  double regret = -std::numeric_limits<double>::infinity();
  for (const auto& ref : origin.references) {
    for (double v : origin.channel("regret_" + ref.name)) regret = std::max(regret, v);
  }
  const Vector y0 = reg->subgradient(SimplexState(Vector{{0.6, 0.3, 0.1}}));
  const auto moving = integrate_dad(rps, *reg, one, y0, options(p.value("T", 100.0), 1e-3));
  double general = -std::numeric_limits<double>::infinity();
  for (const auto& ref : moving.references) {
    const double bound = fenchel_coupling(*reg, ref.state, y0);
    for (double v : moving.channel("regret_" + ref.name)) general = std::max(general, v - bound);
  }

  // Fenchel derivative identity along the recorded grid.
  double identity = 0.0;
  for (const auto& ref : moving.references) {
    const auto& f = moving.channel("fenchel_" + ref.name);
    for (std::size_t k = 1; k + 1 < moving.size(); k += 97) {
      const double slope = (f[k + 1] - f[k - 1]) / (moving.times[k + 1] - moving.times[k - 1]);
      const double expected = moving.payoffs[k].dot(moving.states[k].weights() - ref.state.weights());
      identity = std::max(identity, std::abs(slope - expected));
    }
  }

  // Positive correlation on potential games.
  double correlation = 0.0;
  for (const std::string name : {"congestion", "coordination", "gess"}) {
    const PayoffField g = game(name);
    const auto r = make_regularizer("entropic", g.n_strategies());
    Vector start = Vector::LinSpaced(static_cast<Eigen::Index>(g.n_strategies()), 0.2, 1.0);
    const auto rec = integrate_dad(g, *r, one, r->subgradient(SimplexState(start / start.sum())), options(20.0, 1e-3));
    for (std::size_t k = 0; k < rec.size(); k += 10) {
      const Vector xdot = dad_velocity(g, *r, rec.scores[k]);
      if (xdot.norm() >= 1e-6) correlation = std::max(correlation, -rec.payoffs[k].dot(xdot));
    }
  }

  // No-regret under a vanishing learning rate.
  const auto reg2 = make_regularizer("entropic", 2);
  const Schedule eta = Schedule::power(1.0, 0.5, 1.0);
  const double horizon = p.value("T", 100.0);
  const auto cong = integrate_dad(game("congestion"), *reg2, eta, Vector::Zero(2), options(horizon, 1e-3));
  double no_regret = -std::numeric_limits<double>::infinity();
  for (const auto& ref : cong.references) {
    const double t = cong.times.back();
    no_regret = std::max(no_regret, cong.channel("regret_" + ref.name).back() / t -
                                        reg2->range() / (t * eta(t)) * (1.0 + 1e-3));
  }

  // Time average on RPS against the frozen C / sqrt(T) envelope.
  const double c = p.value("time_average_constant", 1.0);
  double average = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < moving.size(); ++k) {
    const double t = moving.times[k];
    if (t < 1.0) continue;
    average = std::max(average, linf_distance(moving.means[k], SimplexState::uniform(3)) - c / std::sqrt(t));
  }

  return {result("dad_regret_bound_origin", regret, omega + 1e-3),
          result("dad_regret_bound_general", general, 1e-3),
          result("dad_fenchel_derivative", identity, 1e-6),
          result("dad_positive_correlation", correlation, 1e-9),
          result("dad_no_regret", no_regret, 0.0),
          result("dad_time_average", average, 0.0)};
}

Results equivalences(const json& p) {
  const auto reg = make_regularizer("entropic", 3);
  const PayoffField rps = game("rps");
  const SimplexState x0(Vector{{0.6, 0.3, 0.1}});
  const double dt = 1e-3;
  const auto rec = integrate_dad(rps, *reg, Schedule::constant(1.0), reg->subgradient(x0), options(10.0, dt));
  Vector x = x0.weights();
  double replicator = linf_distance(rec.states.front(), x0);
  for (std::size_t k = 1; k < rec.size(); ++k) {
    const auto f = [&](const Vector& z) { return replicator_rhs(rps, SimplexState::project_drift(z)); };
    const Vector k1 = f(x);
    const Vector k2 = f(x + 0.5 * dt * k1);
    const Vector k3 = f(x + 0.5 * dt * k2);
    const Vector k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    replicator = std::max(replicator, (rec.states[k].weights() - x).cwiseAbs().maxCoeff());
  }

  // Euclidean DAD: velocity of x_t = proj(y_t) against projection_rhs on interior points.
  const auto euclid = make_regularizer("euclidean", 3);
  const auto erec = integrate_dad(rps, *euclid, Schedule::constant(1.0), Vector{{0.2, 0.0, -0.1}}, options(5.0, dt));
  double projection = 0.0;
  for (std::size_t k = 0; k < erec.size(); k += 10) {
    if (erec.states[k].weights().minCoeff() < 1e-3) continue;
    projection = std::max(projection, (dad_velocity(rps, *euclid, erec.scores[k]) - projection_rhs(rps, erec.states[k]))
                                          .cwiseAbs()
                                          .maxCoeff());
  }
  return {result("dad_replicator_match", replicator, p.value("replicator_tolerance", 1e-4)),
          result("dad_projection_match", projection, p.value("projection_tolerance", 1e-6))};
}

Results discrete(const json& p) {
  const std::size_t n_steps = p.value("N", 10000u);
  Results out;
  double template_worst = -std::numeric_limits<double>::infinity();
  double bound_worst = -std::numeric_limits<double>::infinity();
  double score_worst = 0.0;
  Rng start_rng(p.value("seed", 5u));
  for (const std::string name : {"rps", "gess", "coordination", "congestion", "neg_identity"}) {
    const PayoffField g = game(name);
    for (const auto& reg_name : kRegularizers) {
      const auto reg = make_regularizer(reg_name, g.n_strategies());
      const auto rec = run_da(g, *reg, Schedule::power(1.0, 0.5), std::nullopt,
                              sample_simplex(g.n_strategies(), start_rng), n_steps);
      for (const auto& eq : builtin_equilibria(name)) {
        template_worst = std::max(template_worst, template_inequality_check(rec, *reg, eq).max_slack_violation);
      }
      for (const auto& ref : rec.references) {
        const auto regret = discrete_regret(rec, ref.state);
        const auto bound = da_regret_bound(rec, *reg, ref.state);
        for (std::size_t k = 0; k < regret.size(); ++k) bound_worst = std::max(bound_worst, regret[k] - bound[k]);
      }
      for (std::size_t k = 1; k < rec.size(); ++k) {
        const Vector recomputed = rec.scores[k - 1] + rec.payoffs[k];
        if (recomputed != rec.scores[k]) score_worst = std::max(score_worst, (recomputed - rec.scores[k]).cwiseAbs().maxCoeff());
      }
    }
  }
  out.push_back(result("da_template_inequality", template_worst, 1e-9));
  out.push_back(result("da_regret_bound", bound_worst, 1e-9));
  out.push_back(result("da_score_recursion", score_worst, 0.0));

  const auto fp = run_fp(game("rps"), SimplexState::vertex(3, 0), n_steps);
  double recursion = 0.0;
  for (std::size_t k = 0; k + 1 < fp.size(); ++k) {
    const Vector lhs = fp.means[k + 1].weights() - fp.means[k].weights();
    const Vector rhs = (fp.states[k + 1].weights() - fp.means[k].weights()) / static_cast<double>(k + 2);
    recursion = std::max(recursion, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  out.push_back(result("fp_mean_recursion", recursion, 1e-12));

  const auto coord = run_fp(game("coordination"), SimplexState::vertex(2, 0), n_steps);
  const auto coord_regret = discrete_regret(coord, SimplexState::vertex(2, 0));
  out.push_back(result("fp_coordination_regret", *std::max_element(coord_regret.begin(), coord_regret.end()), 0.0));

  double matching = 0.0;
  const auto reg = make_regularizer("entropic", 3);
  for (double eps : {1.0, 0.25}) {
    const auto rfp = run_rfp(game("rps"), *reg, eps, SimplexState::uniform(3), n_steps);
    const auto da = run_da(game("rps"), *reg, Schedule::power(1.0 / eps, 1.0), std::nullopt, std::nullopt, n_steps);
    for (std::size_t k = 0; k < rfp.size(); ++k) matching = std::max(matching, linf_distance(rfp.states[k], da.states[k]));
  }
  out.push_back(result("random_matching_equality", matching, 1e-12));

  double learn = 0.0;
  double stolz = 0.0;
  for (double q : {0.25, 0.5, 0.75}) {
    const auto rec = run_da(game("rps"), *reg, Schedule::power(1.0, q), std::nullopt, std::nullopt, 100000);
    const double big_n = static_cast<double>(rec.size());
    learn = std::max(learn, rec.channel("r_n").back() / (2.0 * q * std::pow(big_n, q - 1.0)));
    stolz = std::max(stolz, rec.channel("stolz").back() / std::pow(big_n, q - 1.0));
  }
  out.push_back(result("learning_rate_increment", learn, 1.0));
  out.push_back(result("stolz_envelope", stolz, 1.0 + 1e-9));

  // Started on a regularized equilibrium the residual is tiny from n = 1 on.
  const PayoffField congestion = game("congestion");
  const auto reg2 = make_regularizer("entropic", 2);
  const auto fixed = solve_regularized_equilibrium(congestion, *reg2, 0.5, SimplexState::uniform(2));
  const auto rfp = run_rfp(congestion, *reg2, 0.5, fixed.point, 2000);
  std::optional<std::size_t> settled;
  double drift = 0.0;
  for (std::size_t k = 0; k < rfp.size(); ++k) {
    const double residual =
        linf_distance(rfp.means[k], regularized_best_response(congestion, *reg2, 0.5, rfp.means[k]));
    if (!settled && residual <= 1e-10) settled = k;
    if (settled) drift = std::max(drift, residual);
  }
  out.push_back(result("rfp_fixed_point_persistence", settled ? drift : 1.0, 1e-9));
  return out;
}

Results oracle(const json& p) {
  const double step = p.value("step", 1e-2);
  double agreement = 0.0;
  for (const auto& name : builtin_names()) {
    const auto bf = brute_force_equilibria(game(name), step);
    const auto equilibria = builtin_equilibria(name);
    for (const auto& cluster : bf.clusters) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& eq : equilibria) nearest = std::min(nearest, linf_distance(bf.points[cluster.front()].state, eq));
      agreement = std::max(agreement, nearest);
    }
    for (const auto& eq : equilibria) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& cluster : bf.clusters) {
        for (std::size_t i : cluster) nearest = std::min(nearest, linf_distance(bf.points[i].state, eq));
      }
      agreement = std::max(agreement, nearest);
    }
  }
  const auto coord = brute_force_equilibria(game("coordination"), step);
  return {result("brute_force_agreement", agreement, 2.0 * step),
          result("coordination_clusters", std::abs(static_cast<double>(coord.clusters.size()) - 3.0), 0.0)};
}

Results harness_contracts(const json& p) {
  const json config = {{"game", "rps"},
                       {"dynamic", "dad"},
                       {"regularizer", "entropic"},
                       {"eta_schedule", 1.0},
                       {"initial_state", {0.6, 0.3, 0.1}},
                       {"horizon", {{"T", p.value("T", 5.0)}, {"dt", 1e-3}}}};
  const ExperimentConfig c = config_from_json(config);
  const TrajectoryTable a = simulate(c);
  const TrajectoryTable b = simulate(c);
  const std::string csv = format_csv(a);
  const RunSummary direct = summarize(a);
  const RunSummary parsed = summarize(parse_csv(csv));
  double roundtrip = 0.0;
  for (std::size_t i = 0; i < direct.terminal_state.size(); ++i) {
    roundtrip = std::max(roundtrip, std::abs(direct.terminal_state[i] - parsed.terminal_state[i]));
    roundtrip = std::max(roundtrip, std::abs(direct.terminal_mean[i] - parsed.terminal_mean[i]));
  }
  for (const auto& [name, stats] : direct.channels) {
    const auto& other = parsed.channels.at(name);
    for (auto [x, y] : {std::pair{stats.initial, other.initial}, {stats.final, other.final}, {stats.min, other.min},
                        {stats.max, other.max}}) {
      roundtrip = std::max(roundtrip, std::abs(x - y));
    }
  }
  return {result("csv_determinism", csv == format_csv(b) ? 0.0 : 1.0, 0.0),
          result("csv_roundtrip", roundtrip, 1e-9)};
}

const std::map<std::string, Check>& registry() {
  static const std::map<std::string, Check> checks = {
      {"choice_gradient", choice_gradient}, {"fenchel_bound", fenchel_bound},
      {"choice_identities", choice_identities}, {"game_structure", game_structure},
      {"brd", brd},                         {"rbrd", rbrd},
      {"vbrd", vbrd},                       {"dad", dad},
      {"equivalences", equivalences},       {"discrete", discrete},
      {"oracle", oracle},                   {"harness", harness_contracts},
  };
  return checks;
}

}  // namespace

std::vector<std::string> invariant_names() {
  std::vector<std::string> names;
  for (const auto& [name, check] : registry()) names.push_back(name);
  return names;
}

std::vector<InvariantResult> run_invariant_suite(const nlohmann::json& fixture) {
  if (!fixture.is_object() || fixture.value("version", 0) != 1) {
    fail(ErrorKind::kConfig, "invariant fixture must be an object with \"version\": 1");
  }
  if (!fixture.contains("invariants") || !fixture.at("invariants").is_object()) {
    fail(ErrorKind::kConfig, "invariant fixture needs an \"invariants\" object");
  }
  std::vector<InvariantResult> out;
  for (const auto& item : fixture.at("invariants").items()) {
    const auto it = registry().find(item.key());
    if (it == registry().end()) fail(ErrorKind::kConfig, "unknown invariant '" + item.key() + "'");
    const auto start = std::chrono::steady_clock::now();
    Results results = it->second(item.value());
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto& r : results) {
      r.seconds = seconds / static_cast<double>(results.size());
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace popdyn
