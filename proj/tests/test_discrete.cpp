#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "popdyn/discrete.hpp"
#include "popdyn/equilibrium.hpp"
#include "popdyn/error.hpp"

namespace {

using popdyn::Schedule;
using popdyn::SimplexState;
using popdyn::Vector;

popdyn::PayoffField builtin(const std::string& name) { return popdyn::make_field(popdyn::builtin_game(name)); }

const SimplexState kUniform3 = SimplexState::uniform(3);

TEST(Fp, RpsTimeAverageConverges) {
  const auto rec = popdyn::run_fp(builtin("rps"), SimplexState::vertex(3, 0), 100000);
  EXPECT_LE(popdyn::linf_distance(rec.means.back(), kUniform3), 5e-3);
}

TEST(Fp, CongestionGapVanishes) {
  const auto rec = popdyn::run_fp(builtin("congestion"), SimplexState::vertex(2, 1), 10000);
  EXPECT_LE(rec.channel("gap").back(), 1e-3);
}

TEST(Fp, UniformRpsIsConstant) {
  const auto rec = popdyn::run_fp(builtin("rps"), kUniform3, 1000);
  for (std::size_t k = 0; k < rec.size(); ++k) {
    EXPECT_LE(popdyn::linf_distance(rec.states[k], kUniform3), 1e-15);
    EXPECT_LE(popdyn::linf_distance(rec.means[k], kUniform3), 1e-15);
  }
}

TEST(Fp, MatchesPlainLoopOracle) {
  // Independent FP on RPS: best reply to the mean, lowest index on ties.
  const auto rec = popdyn::run_fp(builtin("rps"), SimplexState::vertex(3, 2), 500);
  Vector mean = SimplexState::vertex(3, 2).weights();
  for (std::size_t k = 1; k < rec.size(); ++k) {
    const Vector v = oracle::mat_vec(oracle::kRps, mean);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < 3; ++i) {
      if (v(i) > v(best) + 1e-12) best = i;
    }
    Vector x = Vector::Zero(3);
    x(best) = 1.0;
    ASSERT_EQ(rec.states[k].weights(), x) << k;
    mean += (x - mean) / static_cast<double>(k + 1);
    EXPECT_LE((rec.means[k].weights() - mean).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Fp, MeanRecursionIsExact) {
  const auto rec = popdyn::run_fp(builtin("rps"), SimplexState::vertex(3, 0), 5000);
  for (std::size_t k = 0; k + 1 < rec.size(); ++k) {
    const Vector lhs = rec.means[k + 1].weights() - rec.means[k].weights();
    const Vector rhs = (rec.states[k + 1].weights() - rec.means[k].weights()) / static_cast<double>(k + 2);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Rfp, LogitEquilibriumOfRps) {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::run_rfp(builtin("rps"), ent, 1.0, SimplexState::vertex(3, 0), 10000);
  EXPECT_LE(popdyn::linf_distance(rec.means.back(), kUniform3), 1e-3);
  EXPECT_TRUE(rec.has_channel("reg_gap"));
}

TEST(Rfp, EuclideanCongestionMatchesSolver) {
  const popdyn::EuclideanRegularizer euc(2);
  const auto game = builtin("congestion");
  const auto rec = popdyn::run_rfp(game, euc, 0.1, SimplexState::vertex(2, 0), 10000);
  const auto fixed = popdyn::solve_regularized_equilibrium(game, euc, 0.1, SimplexState::uniform(2));
  EXPECT_LE(popdyn::linf_distance(rec.means.back(), fixed.point), 1e-3);
}

TEST(Rfp, HeavyRegularizationGivesUniform) {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::run_rfp(builtin("rps"), ent, 1e6, SimplexState::vertex(3, 0), 10000);
  EXPECT_LE(popdyn::linf_distance(rec.means.back(), kUniform3), 1e-4);
}

TEST(Rfp, StatesAreSoftmaxOfMeanPayoffs) {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::run_rfp(builtin("rps"), ent, 0.3, SimplexState::vertex(3, 1), 300);
  for (std::size_t k = 1; k < rec.size(); ++k) {
    const Vector expected = oracle::softmax(oracle::mat_vec(oracle::kRps, rec.means[k - 1].weights()) / 0.3);
    EXPECT_LE((rec.states[k].weights() - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Rfp, RejectsNonpositiveEps) {
  const popdyn::EntropicRegularizer ent(3);
  EXPECT_THROW(popdyn::run_rfp(builtin("rps"), ent, 0.0, kUniform3, 10), popdyn::Error);
}

TEST(Vrfp, ConvergesWithVanishingEps) {
  const Schedule eps = Schedule::power(1.0, 0.5);
  const popdyn::EntropicRegularizer ent2(2);
  const auto cong = popdyn::run_vrfp(builtin("congestion"), ent2, eps, SimplexState::vertex(2, 1), 100000);
  EXPECT_LE(cong.channel("gap").back(), 5e-3);
  const popdyn::EntropicRegularizer ent3(3);
  const auto rps = popdyn::run_vrfp(builtin("rps"), ent3, eps, SimplexState::vertex(3, 0), 100000);
  EXPECT_LE(popdyn::linf_distance(rps.means.back(), kUniform3), 1e-2);
}

TEST(Vrfp, RejectsNonVanishingSchedules) {
  const popdyn::EntropicRegularizer ent(3);
  EXPECT_THROW(popdyn::run_vrfp(builtin("rps"), ent, Schedule::table({0.0, 10.0}, {0.1, 0.2}), kUniform3, 10),
               popdyn::Error);
  EXPECT_THROW(popdyn::run_vrfp(builtin("rps"), ent, Schedule::constant(0.1), kUniform3, 10), popdyn::Error);
}

TEST(Da, GessConvergesAndIsAbsorbed) {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::run_da(builtin("gess"), ent, Schedule::power(1.0, 0.5), std::nullopt,
                                  SimplexState(Vector{{0.6, 0.3, 0.1}}), 100000);
  EXPECT_LE((rec.states.back().weights() - kUniform3.weights()).norm(), 1e-3);
  const auto zone = popdyn::fenchel_zone_monitor(rec, ent, kUniform3, {1e-2});
  ASSERT_TRUE(zone.levels.front().first_entry.has_value());
  EXPECT_TRUE(zone.levels.front().absorbed);
  EXPECT_EQ(zone.levels.front().exits_after_entry, 0u);
  EXPECT_LE(popdyn::template_inequality_check(rec, ent, kUniform3).max_slack_violation, 1e-9);
}

TEST(Da, RpsTimeAverage) {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::run_da(builtin("rps"), ent, Schedule::power(1.0, 0.5), std::nullopt,
                                  SimplexState(Vector{{0.6, 0.3, 0.1}}), 100000);
  EXPECT_LE(popdyn::linf_distance(rec.means.back(), kUniform3), 1e-2);
}

TEST(Da, ReproducesRfpUnderRandomMatching) {
  const popdyn::EntropicRegularizer ent(3);
  for (double eps : {1.0, 0.1}) {
    const auto rfp = popdyn::run_rfp(builtin("rps"), ent, eps, kUniform3, 5000);
    const auto da = popdyn::run_da(builtin("rps"), ent, Schedule::power(1.0 / eps, 1.0), std::nullopt, std::nullopt, 5000);
    for (std::size_t k = 0; k < rfp.size(); ++k) EXPECT_LE(popdyn::linf_distance(rfp.states[k], da.states[k]), 1e-12);
  }
}

TEST(Da, MatchesSoftmaxOracle) {
  const popdyn::EntropicRegularizer ent(3);
  const Schedule eta = Schedule::power(1.0, 0.5);
  const auto rec = popdyn::run_da(builtin("rps"), ent, eta, std::nullopt, std::nullopt, 200);
  Vector score = Vector::Zero(3);
  Vector x = oracle::softmax(score);
  for (std::size_t k = 0; k < rec.size(); ++k) {
    EXPECT_LE((rec.states[k].weights() - x).cwiseAbs().maxCoeff(), 1e-12) << k;
    score += oracle::mat_vec(oracle::kRps, x);
    EXPECT_LE((rec.scores[k] - score).cwiseAbs().maxCoeff(), 1e-12);
    const double n = static_cast<double>(k + 1);
    x = oracle::softmax(score / std::sqrt(n));
  }
}

TEST(Da, InitializationRules) {
  const popdyn::EntropicRegularizer ent(3);
  const auto game = builtin("rps");
  const Schedule eta = Schedule::constant(0.5);

  const auto neither = popdyn::run_da(game, ent, eta, std::nullopt, std::nullopt, 3);
  EXPECT_EQ(neither.initial_score, Vector::Zero(3));
  EXPECT_LE(popdyn::linf_distance(neither.states.front(), kUniform3), 1e-15);

  const Vector s0{{1.0, 0.0, -1.0}};
  const auto score_only = popdyn::run_da(game, ent, eta, s0, std::nullopt, 3);
  EXPECT_LE((score_only.states.front().weights() - oracle::softmax(0.5 * s0)).cwiseAbs().maxCoeff(), 1e-15);

  const SimplexState x1(Vector{{0.2, 0.3, 0.5}});
  const auto state_only = popdyn::run_da(game, ent, eta, std::nullopt, x1, 3);
  EXPECT_TRUE(state_only.consistent_start);
  EXPECT_LE(popdyn::linf_distance(ent.choice(0.5 * state_only.initial_score), x1), 1e-12);

  const auto boundary = popdyn::run_da(game, ent, eta, std::nullopt, SimplexState::vertex(3, 0), 3);
  EXPECT_EQ(boundary.initial_score, Vector::Zero(3));
  EXPECT_FALSE(boundary.consistent_start);

  const auto both = popdyn::run_da(game, ent, eta, Vector::Zero(3), x1, 3);
  EXPECT_FALSE(both.consistent_start);
  EXPECT_EQ(both.states.front().weights(), x1.weights());
}

TEST(Da, LearningRateChannels) {
  const popdyn::EntropicRegularizer ent(3);
  const auto constant = popdyn::run_da(builtin("rps"), ent, Schedule::constant(0.3), std::nullopt, std::nullopt, 100);
  for (double r : constant.channel("r_n")) EXPECT_EQ(r, 0.0);

  for (double p : {0.25, 0.5, 0.75}) {
    const auto rec = popdyn::run_da(builtin("rps"), ent, Schedule::power(1.0, p), std::nullopt, std::nullopt, 100000);
    const double n = static_cast<double>(rec.size());
    const auto& r = rec.channel("r_n");
    EXPECT_EQ(r.front(), 0.0);
    EXPECT_NEAR(r.back(), std::pow(n, p) - std::pow(n - 1.0, p), 1e-9);
    EXPECT_LE(r.back(), 2.0 * p * std::pow(n, p - 1.0));
    EXPECT_NEAR(rec.channel("eta").back(), std::pow(n, -p), 1e-15);
    EXPECT_NEAR(rec.channel("stolz").back(), std::pow(n, p - 1.0), 1e-12);
  }
}

TEST(Da, RejectsIncreasingLearningRate) {
  const popdyn::EntropicRegularizer ent(3);
  EXPECT_THROW(popdyn::run_da(builtin("rps"), ent, Schedule::table({1.0, 5.0}, {0.1, 1.0}), std::nullopt, std::nullopt, 10),
               popdyn::Error);
}

TEST(Da, OverflowReportsLastGoodStep) {
  const popdyn::EntropicRegularizer ent(3);
  // Scores grow by about 1e307 per step and overflow a few steps in.
  const auto game = popdyn::random_matching_field(popdyn::Matrix::Constant(3, 3, 1e307));
  try {
    popdyn::run_da(game, ent, Schedule::constant(1.0), std::nullopt, std::nullopt, 100);
    FAIL() << "expected a numerical error";
  } catch (const popdyn::Error& e) {
    EXPECT_EQ(e.kind(), popdyn::ErrorKind::kNumerical);
    const std::string message = e.what();
    const auto at = message.rfind("last good step ");
    ASSERT_NE(at, std::string::npos) << message;
    const int last_good = std::stoi(message.substr(at + 15));
    EXPECT_GT(last_good, 0) << message;
    EXPECT_LT(last_good, 20) << message;
  }
}

TEST(Regret, ZeroAtUniformRps) {
  const auto rec = popdyn::run_fp(builtin("rps"), kUniform3, 200);
  for (std::size_t i = 0; i < 3; ++i) {
    for (double v : popdyn::discrete_regret(rec, SimplexState::vertex(3, i))) EXPECT_NEAR(v, 0.0, 1e-15);
  }
}

TEST(Regret, DaBoundHoldsAtEveryStep) {
  for (const char* reg_name : {"entropic", "euclidean"}) {
    const auto reg = popdyn::make_regularizer(reg_name, 3);
    const auto rec = popdyn::run_da(builtin("rps"), *reg, Schedule::power(1.0, 0.5), std::nullopt, std::nullopt, 20000);
    for (std::size_t i = 0; i < 3; ++i) {
      const SimplexState p = SimplexState::vertex(3, i);
      const auto regret = popdyn::discrete_regret(rec, p);
      const auto bound = popdyn::da_regret_bound(rec, *reg, p);
      // Independent evaluation of Omega / eta_n + (1/2K) sum eta_{k-1} |v_k|_*^2 for S_0 = 0.
      double sum = 0.0;
      for (std::size_t k = 0; k < rec.size(); ++k) {
        const double eta_prev = k == 0 ? rec.eta0 : rec.etas[k - 1];
        const double dual = popdyn::dual_norm(reg->reference_norm(), rec.payoffs[k]);
        sum += eta_prev * dual * dual / (2.0 * reg->modulus());
        const double simple = reg->range() / rec.etas[k] + sum;
        EXPECT_LE(regret[k], bound[k] + 1e-9) << reg_name << " " << k;
        EXPECT_LE(bound[k], simple + 1e-9) << reg_name << " " << k;
      }
    }
  }
}

TEST(Regret, FpOnCoordinationLocksIn) {
  const auto rec = popdyn::run_fp(builtin("coordination"), SimplexState::vertex(2, 0), 1000);
  for (double v : popdyn::discrete_regret(rec, SimplexState::vertex(2, 0))) EXPECT_LE(v, 0.0);
}

TEST(Template, HoldsOnEveryBuiltin) {
  popdyn::Rng rng(77);
  for (const auto& name : popdyn::builtin_names()) {
    const auto game = builtin(name);
    for (const char* reg_name : {"entropic", "euclidean"}) {
      const auto reg = popdyn::make_regularizer(reg_name, game.n_strategies());
      for (const Schedule& eta : {Schedule::power(1.0, 0.5), Schedule::constant(0.2), Schedule::power(2.0, 0.75)}) {
        const auto rec = popdyn::run_da(game, *reg, eta, std::nullopt,
                                        popdyn::sample_simplex(game.n_strategies(), rng), 3000);
        for (const auto& p : {SimplexState::uniform(game.n_strategies()), SimplexState::vertex(game.n_strategies(), 0)}) {
          const auto report = popdyn::template_inequality_check(rec, *reg, p);
          EXPECT_LE(report.max_slack_violation, 1e-9) << name << " " << reg_name;
          EXPECT_EQ(report.violations.size(), rec.size() - report.first_step + 1);
        }
      }
    }
  }
}

TEST(Template, RejectsNonDaRecords) {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::run_fp(builtin("rps"), kUniform3, 10);
  EXPECT_THROW(popdyn::template_inequality_check(rec, ent, kUniform3), popdyn::Error);
}

TEST(Zone, NonEquilibriumReferenceIsNotAbsorbing) {
  const popdyn::EntropicRegularizer ent(3);
  const auto rec = popdyn::run_da(builtin("rps"), ent, Schedule::power(1.0, 0.5), std::nullopt,
                                  SimplexState(Vector{{0.6, 0.3, 0.1}}), 20000);
  const auto zone = popdyn::fenchel_zone_monitor(rec, ent, SimplexState::vertex(3, 0), {0.5});
  EXPECT_FALSE(zone.levels.front().absorbed);
  EXPECT_EQ(zone.coupling.size(), rec.size());
}

TEST(Zone, LocalEssOfCoordination) {
  const popdyn::EntropicRegularizer ent(2);
  const SimplexState e0 = SimplexState::vertex(2, 0);
  const auto rec = popdyn::run_da(builtin("coordination"), ent, Schedule::constant(0.1), std::nullopt,
                                  SimplexState(Vector{{0.9, 0.1}}), 5000);
  const auto zone = popdyn::fenchel_zone_monitor(rec, ent, e0, {1e-2});
  ASSERT_TRUE(zone.levels.front().first_entry.has_value());
  EXPECT_TRUE(zone.levels.front().absorbed);
  for (std::size_t k = *zone.levels.front().first_entry; k < zone.coupling.size(); ++k) {
    EXPECT_LE(zone.coupling[k], zone.coupling[k - 1] + 1e-12);
  }
}

}  // namespace
