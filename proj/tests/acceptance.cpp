// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "popdyn/continuous.hpp"
#include "popdyn/discrete.hpp"
#include "popdyn/equilibrium.hpp"
#include "popdyn/error.hpp"
#include "popdyn/regularizer.hpp"

namespace {

using popdyn::IntegrationOptions;
using popdyn::Schedule;
using popdyn::SimplexState;
using popdyn::Vector;

struct Outcome {
  bool passed;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

std::string fmt(const char* format, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

popdyn::PayoffField builtin(const std::string& name) { return popdyn::make_field(popdyn::builtin_game(name)); }

IntegrationOptions horizon(double t, double dt, std::size_t records = 0) {
  IntegrationOptions o;
  o.horizon = t;
  o.dt = dt;
  o.max_records = records == 0 ? static_cast<std::size_t>(std::llround(t / dt)) + 1 : records;
  return o;
}

double max_increase(const std::vector<double>& series) {
  double worst = -INFINITY;
  for (std::size_t k = 1; k < series.size(); ++k) worst = std::max(worst, series[k] - series[k - 1]);
  return worst;
}

double state_gap(const popdyn::PayoffField& game, const SimplexState& x) {
  return oracle::gap(game(x.weights()), x.weights());
}

double sup_distance(const SimplexState& x, const Vector& target) {
  return (x.weights() - target).cwiseAbs().maxCoeff();
}

double l2_distance(const SimplexState& x, const Vector& target) { return (x.weights() - target).norm(); }

Vector uniform(std::size_t n) { return Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)); }

const SimplexState kStart(Vector{{0.6, 0.3, 0.1}});

Vector random_scores(popdyn::Rng& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector y(3);
  for (Eigen::Index i = 0; i < 3; ++i) y(i) = normal(rng);
  return y;
}

// Worst template violation over the run's references plus the uniform point.
double template_violation(const popdyn::RunRecord& run, const popdyn::Regularizer& reg) {
  double worst = -INFINITY;
  std::vector<SimplexState> points{SimplexState::uniform(reg.size())};
  for (const auto& ref : run.references) points.push_back(ref.state);
  for (const auto& p : points) worst = std::max(worst, popdyn::template_inequality_check(run, reg, p).max_slack_violation);
  return worst;
}

Outcome regularizer_analytics() {
  double worst_fd = 0.0;
  double worst_coupling = 0.0;
  for (const char* name : {"entropic", "euclidean"}) {
    const auto reg = popdyn::make_regularizer(name, 3);
    popdyn::Rng rng(101);
    for (int s = 0; s < 100; ++s) {
      const Vector y = random_scores(rng, 1.0);
      const Vector q = reg->choice(y).weights();
      for (Eigen::Index i = 0; i < 3; ++i) {
        Vector up = y;
        Vector down = y;
        up(i) += 1e-5;
        down(i) -= 1e-5;
        const double fd = (reg->conjugate(up) - reg->conjugate(down)) / 2e-5;
        worst_fd = std::max(worst_fd, std::abs(fd - q(i)) / std::max(std::abs(q(i)), 1e-1));
      }
    }
    for (int s = 0; s < 1000; ++s) {
      const SimplexState p = popdyn::sample_simplex(3, rng);
      const Vector y = random_scores(rng, 3.0);
      const double coupling = popdyn::fenchel_coupling(*reg, p, y);
      const Vector diff = reg->choice(y).weights() - p.weights();
      const double bound = 0.5 * reg->modulus() * std::pow(popdyn::primal_norm(reg->reference_norm(), diff), 2);
      worst_coupling = std::max({worst_coupling, -coupling, bound - coupling});
    }
  }
  return {worst_fd <= 1e-5 && worst_coupling <= 1e-10,
          fmt("fd rel err %.3g (<= 1e-5), coupling violation %.3g (<= 1e-10)", worst_fd, worst_coupling)};
}

Outcome brd_gap_decay() {
  const auto game = builtin("rps");
  const auto rec = popdyn::integrate_brd(game, kStart, horizon(10.0, 1e-3));
  const double initial = state_gap(game, rec.states.front());
  const double final = state_gap(game, rec.states.back());
  const double bound = initial * std::exp(-10.0) * 1.1 + 1e-6;
  return {final <= bound, fmt("gap(xbar_T) %.4g <= %.4g", final, bound)};
}

Outcome brd_potential_ascent() {
  const auto game = builtin("congestion");
  const auto rec = popdyn::integrate_brd(game, SimplexState(Vector{{0.1, 0.9}}), horizon(50.0, 1e-3));
  const auto& potential = rec.channel("potential");
  double descent = 0.0;
  for (std::size_t k = 1; k < potential.size(); ++k) descent = std::max(descent, potential[k - 1] - potential[k]);
  const double final = state_gap(game, rec.states.back());
  return {descent <= 1e-9 && final <= 1e-6, fmt("max potential drop %.3g (<= 1e-9), terminal gap %.3g (<= 1e-6)",
                                               descent, final)};
}

Outcome rbrd_lyapunov() {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::integrate_rbrd(builtin("rps"), ent, 1.0, kStart, horizon(40.0, 1e-3));
  const double increase = std::max(0.0, max_increase(rec.channel("reg_gap")));
  const double distance = sup_distance(rec.states.back(), uniform(3));
  return {increase <= 1e-9 && distance <= 1e-8,
          fmt("max G_eps increase %.3g (<= 1e-9), distance to logit eq %.3g (<= 1e-8)", increase, distance)};
}

Outcome vbrd_convergence() {
  const popdyn::EntropicRegularizer ent3(3);
  const popdyn::EntropicRegularizer ent2(2);
  const Schedule eps = Schedule::power(1.0, 1.0, 1.0);
  const auto congestion = builtin("congestion");
  const auto rps = builtin("rps");
  const auto a = popdyn::integrate_vbrd(congestion, ent2, eps, SimplexState(Vector{{0.1, 0.9}}),
                                        horizon(200.0, 1e-2, 1000));
  const auto b = popdyn::integrate_vbrd(rps, ent3, eps, kStart, horizon(200.0, 1e-2, 1000));
  const double ga = state_gap(congestion, a.states.back());
  const double gb = state_gap(rps, b.states.back());
  return {ga <= 5e-3 && gb <= 5e-3, fmt("terminal gap congestion %.3g, rps %.3g (<= 5e-3)", ga, gb)};
}

Outcome continuous_regret() {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::integrate_dad(builtin("rps"), ent, Schedule::constant(1.0), Vector::Zero(3),
                                         horizon(100.0, 1e-3));
  double worst = -INFINITY;
  for (std::size_t i = 0; i < 3; ++i) {
    for (double v : popdyn::regret_along_trajectory(rec, SimplexState::vertex(3, i)).values) worst = std::max(worst, v);
  }
  const double bound = std::log(3.0) + 1e-3;
  return {worst <= bound, fmt("max vertex regret %.6g <= %.6g", worst, bound)};
}

Outcome dynamics_equivalences() {
  const popdyn::EntropicRegularizer ent(3);
  const double dt = 1e-3;
  const auto rec = popdyn::integrate_dad(builtin("rps"), ent, Schedule::constant(1.0), ent.subgradient(kStart),
                                         horizon(10.0, dt));
  const auto reference = oracle::rk4([](const Vector& x) { return oracle::replicator(oracle::kRps, x); },
                                     kStart.weights(), dt, rec.size() - 1);
  double replicator = 0.0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    replicator = std::max(replicator, (rec.states[k].weights() - reference[k]).cwiseAbs().maxCoeff());
  }

  const popdyn::EuclideanRegularizer euc(3);
  const auto game = builtin("rps");
  const double fine = 1e-4;
  const auto proj = popdyn::integrate_dad(game, euc, Schedule::constant(1.0), Vector{{0.2, 0.0, -0.1}},
                                          horizon(1.0, fine));
  double projection = 0.0;
  int checked = 0;
  for (std::size_t k = 1; k + 1 < proj.size(); ++k) {
    const auto support = [&](std::size_t i) { return proj.states[i].weights().array() > 0.0; };
    if ((support(k - 1) != support(k)).any() || (support(k + 1) != support(k)).any()) continue;
    const Vector slope = (proj.states[k + 1].weights() - proj.states[k - 1].weights()) / (2.0 * fine);
    projection = std::max(projection, (slope - popdyn::projection_rhs(game, proj.states[k])).cwiseAbs().maxCoeff());
    ++checked;
  }
  const bool ok = replicator <= 1e-4 && projection <= 1e-6 && checked > 100;
  return {ok, fmt("replicator sup gap %.3g (<= 1e-4), projection slope err %.3g (<= 1e-6)", replicator, projection) +
                  " over " + std::to_string(checked) + " steps"};
}

Outcome gess_continuous() {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::integrate_dad(builtin("gess"), ent, Schedule::power(1.0, 0.5, 1.0), ent.subgradient(kStart),
                                         horizon(500.0, 1e-2, 1000));
  const double distance = l2_distance(rec.states.back(), uniform(3));
  return {distance <= 1e-3, fmt("|x_T - uniform| %.3g (<= 1e-3)", distance)};
}

// The discrete criteria share their runs.
struct DiscreteRuns {
  popdyn::EntropicRegularizer ent{3};
  popdyn::RunRecord gess;
  popdyn::RunRecord rps;
  popdyn::RunRecord matching;
  popdyn::RunRecord rfp_matching;
};

const DiscreteRuns& discrete_runs() {
  static const DiscreteRuns runs = [] {
    DiscreteRuns r;
    const Schedule root = Schedule::power(1.0, 0.5);
    r.gess = popdyn::run_da(builtin("gess"), r.ent, root, std::nullopt, kStart, 100000);
    r.rps = popdyn::run_da(builtin("rps"), r.ent, root, std::nullopt, kStart, 100000);
    const double eps = 0.5;
    // The correspondence needs a zero initial score, i.e. both processes start at Q(0).
    r.matching =
        popdyn::run_da(builtin("rps"), r.ent, Schedule::power(1.0 / eps, 1.0), std::nullopt, std::nullopt, 10000);
    r.rfp_matching = popdyn::run_rfp(builtin("rps"), r.ent, eps, SimplexState::uniform(3), 10000);
    return r;
  }();
  return runs;
}

Outcome template_inequality() {
  const auto& r = discrete_runs();
  const double worst = std::max({template_violation(r.gess, r.ent), template_violation(r.rps, r.ent),
                                 template_violation(r.matching, r.ent)});
  return {worst <= 1e-9, fmt("max slack violation %.3g (<= 1e-9) over 3 runs", worst)};
}

Outcome da_gess() {
  const auto& r = discrete_runs();
  const double distance = l2_distance(r.gess.states.back(), uniform(3));
  const auto zone = popdyn::fenchel_zone_monitor(r.gess, r.ent, SimplexState::uniform(3), {1e-2});
  const auto& level = zone.levels.front();
  const bool ok = distance <= 1e-3 && level.absorbed;
  return {ok, fmt("|x_N - uniform| %.3g (<= 1e-3), zone 1e-2 entered at n=%.0f", distance,
                  level.first_entry ? static_cast<double>(*level.first_entry) : -1.0) +
                  ", exits " + std::to_string(level.exits_after_entry)};
}

Outcome da_time_average() {
  const auto& r = discrete_runs();
  const double distance = sup_distance(r.rps.means.back(), uniform(3));
  return {distance <= 1e-2, fmt("|xbar_N - uniform| %.3g (<= 1e-2)", distance)};
}

Outcome fictitious_play() {
  const auto rps = builtin("rps");
  const auto fp = popdyn::run_fp(rps, SimplexState::vertex(3, 0), 100000);
  const double fp_distance = sup_distance(fp.means.back(), uniform(3));

  const popdyn::EntropicRegularizer ent(3);
  const auto rfp = popdyn::run_rfp(rps, ent, 1.0, SimplexState::vertex(3, 0), 10000);
  const double rfp_distance = sup_distance(rfp.means.back(), uniform(3));

  const auto congestion = builtin("congestion");
  const auto cfp = popdyn::run_fp(congestion, SimplexState::vertex(2, 0), 100000);
  const double cgap = state_gap(congestion, cfp.means.back());

  const bool ok = fp_distance <= 5e-3 && rfp_distance <= 1e-3 && cgap <= 1e-3;
  return {ok, fmt("fp rps %.3g (<= 5e-3), rfp %.3g (<= 1e-3)", fp_distance, rfp_distance) +
                  fmt(", fp congestion gap %.3g (<= 1e-3)", cgap)};
}

Outcome random_matching() {
  const auto& r = discrete_runs();
  double worst = 0.0;
  for (std::size_t k = 0; k < r.matching.size(); ++k) {
    worst = std::max(worst, (r.matching.states[k].weights() - r.rfp_matching.states[k].weights()).cwiseAbs().maxCoeff());
  }
  const bool ok = r.matching.size() == r.rfp_matching.size() && worst <= 1e-12;
  return {ok, fmt("max per-step deviation %.3g (<= 1e-12) over %.0f steps", worst, static_cast<double>(r.matching.size()))};
}

Outcome oracle_equivalence() {
  const double step = 1e-2;
  bool ok = true;
  std::string detail;
  double worst = 0.0;
  for (const auto& name : popdyn::builtin_names()) {
    const auto game = builtin(name);
    const std::size_t n = game.n_strategies();
    const auto grid = popdyn::brute_force_equilibria(game, step);
    const auto reg = popdyn::make_regularizer("entropic", n);
    std::vector<SimplexState> starts{SimplexState::uniform(n)};
    for (std::size_t i = 0; i < n; ++i) starts.push_back(SimplexState::vertex(n, i));
    std::vector<bool> cluster_hit(grid.clusters.size(), false);
    for (const auto& start : starts) {
      const auto cert = popdyn::solve_regularized_equilibrium(game, *reg, 1e-2, start);
      double nearest = INFINITY;
      for (std::size_t c = 0; c < grid.clusters.size(); ++c) {
        for (std::size_t p : grid.clusters[c]) {
          const double d = popdyn::linf_distance(cert.point, grid.points[p].state);
          nearest = std::min(nearest, d);
          if (d <= step) cluster_hit[c] = true;
        }
      }
      worst = std::max(worst, nearest);
      if (nearest > step) ok = false;
    }
    const auto hits = static_cast<std::size_t>(std::count(cluster_hit.begin(), cluster_hit.end(), true));
    if (hits != grid.clusters.size()) ok = false;
    detail += name + ":" + std::to_string(grid.clusters.size()) + " ";
    if (name == "coordination" && grid.clusters.size() != 3) ok = false;
  }
  return {ok, fmt("solver-to-grid distance %.3g (<= 1e-2); clusters ", worst) + detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"regularizer analytics", regularizer_analytics},
      {"BRD exponential gap decay", brd_gap_decay},
      {"BRD potential ascent", brd_potential_ascent},
      {"RBRD Lyapunov", rbrd_lyapunov},
      {"VBRD convergence", vbrd_convergence},
      {"continuous regret bound", continuous_regret},
      {"dynamics equivalences", dynamics_equivalences},
      {"GESS attraction (continuous)", gess_continuous},
      {"discrete template inequality", template_inequality},
      {"DA on GESS game", da_gess},
      {"DA time averages", da_time_average},
      {"FP / RFP empirical frequencies", fictitious_play},
      {"random-matching correspondence", random_matching},
      {"grid oracle equivalence", oracle_equivalence},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto begin = std::chrono::steady_clock::now();
    Outcome out{false, ""};
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    std::printf("%s  %-32s %s [%.2fs]\n", out.passed ? "PASS" : "FAIL", c.name.c_str(), out.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!out.passed) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
