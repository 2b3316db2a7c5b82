#include <gtest/gtest.h>

#include "oracles.hpp"
#include "popdyn/error.hpp"
#include "popdyn/game.hpp"

namespace {

using popdyn::ErrorKind;
using popdyn::Matrix;
using popdyn::SimplexState;
using popdyn::Vector;

Matrix rps() {
  Matrix a(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a(r, c) = oracle::kRps[r][c];
  return a;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const popdyn::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kConfig;
}

TEST(PayoffEval, RpsAtUniformIsZero) {
  const auto game = popdyn::random_matching_field(rps());
  EXPECT_LE(popdyn::payoff_eval(game, SimplexState::uniform(3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PayoffEval, RpsAtFirstVertex) {
  const auto game = popdyn::random_matching_field(rps());
  const Vector v = popdyn::payoff_eval(game, SimplexState::vertex(3, 0));
  EXPECT_EQ(v, (Vector{{0.0, 1.0, -1.0}}));
}

TEST(PayoffEval, CongestionByHand) {
  const auto game = popdyn::congestion_field(Vector{{1.0, 2.0}});
  const Vector v = popdyn::payoff_eval(game, SimplexState(Vector{{2.0 / 3.0, 1.0 / 3.0}}));
  EXPECT_NEAR(v(0), -2.0 / 3.0, 1e-15);
  EXPECT_NEAR(v(1), -2.0 / 3.0, 1e-15);
}

TEST(PayoffEval, DimensionMismatchIsStructured) {
  const auto game = popdyn::random_matching_field(rps());
  EXPECT_EQ(kind_of([&] { popdyn::payoff_eval(game, SimplexState::uniform(2)); }), ErrorKind::kDimensionMismatch);
}

TEST(PayoffEval, MatchesPlainMatrixProduct) {
  const std::vector<std::vector<double>> rows = {{0.3, -1.2, 2.0}, {0.7, 0.1, -0.4}, {-2.2, 1.5, 0.9}};
  Matrix a(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a(r, c) = rows[r][c];
  const auto game = popdyn::random_matching_field(a);
  popdyn::Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const SimplexState x = popdyn::sample_simplex(3, rng);
    EXPECT_LE((game.eval(x) - oracle::mat_vec(rows, x.weights())).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(RandomMatching, NegativeIdentityFlags) {
  const auto game = popdyn::random_matching_field(-Matrix::Identity(3, 3));
  EXPECT_TRUE(game.flags().is_potential);
  EXPECT_TRUE(game.flags().is_strictly_monotone);
  const SimplexState x(Vector{{0.2, 0.3, 0.5}});
  EXPECT_NEAR(game.potential(x), -0.5 * x.weights().squaredNorm(), 1e-15);
}

TEST(RandomMatching, RpsIsMonotoneNotPotential) {
  const auto game = popdyn::random_matching_field(rps());
  EXPECT_TRUE(game.flags().is_monotone);
  EXPECT_FALSE(game.flags().is_strictly_monotone);
  EXPECT_FALSE(game.flags().is_potential);
  EXPECT_FALSE(game.has_potential());
}

TEST(RandomMatching, CoordinationIsPotentialNotMonotone) {
  const auto game = popdyn::random_matching_field(Matrix::Identity(2, 2));
  EXPECT_TRUE(game.flags().is_potential);
  EXPECT_FALSE(game.flags().is_monotone);
  const SimplexState x(Vector{{0.25, 0.75}});
  EXPECT_NEAR(game.potential(x), 0.5 * (0.0625 + 0.5625), 1e-15);
}

TEST(RandomMatching, RejectsNonSquare) {
  EXPECT_EQ(kind_of([] { popdyn::random_matching_field(Matrix::Zero(2, 3)); }), ErrorKind::kInvalidArgument);
}

TEST(Congestion, EquilibriaAndPotential) {
  const auto unequal = popdyn::congestion_field(Vector{{1.0, 2.0}});
  const Vector v = unequal.eval(SimplexState(Vector{{2.0 / 3.0, 1.0 / 3.0}}));
  EXPECT_NEAR(v(0), v(1), 1e-15);
  const auto equal = popdyn::congestion_field(Vector{{1.0, 1.0}});
  const Vector w = equal.eval(SimplexState::uniform(2));
  EXPECT_EQ(w(0), w(1));
  const auto three = popdyn::congestion_field(Vector{{1.0, 1.0, 1.0}});
  EXPECT_NEAR(three.potential(SimplexState::uniform(3)), -1.0 / 6.0, 1e-15);
  EXPECT_TRUE(three.flags().is_strictly_monotone);
}

TEST(Congestion, RejectsNonpositiveSlopes) {
  EXPECT_EQ(kind_of([] { popdyn::congestion_field(Vector{{1.0, 0.0}}); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([] { popdyn::congestion_field(Vector{{-1.0, 1.0}}); }), ErrorKind::kInvalidArgument);
}

TEST(MonotoneCheck, RpsIsExactlyNeutral) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto report = popdyn::check_monotone_sampled(popdyn::random_matching_field(rps()), 1000, seed);
    EXPECT_LE(std::abs(report.max_violation), 1e-12);
    EXPECT_TRUE(report.consistent);
  }
}

TEST(MonotoneCheck, CoordinationViolatesWithWitness) {
  const auto game = popdyn::random_matching_field(Matrix::Identity(2, 2));
  const auto report = popdyn::check_monotone_sampled(game, 1000, 4);
  EXPECT_GT(report.max_violation, 0.0);
  EXPECT_FALSE(report.consistent);
  const Vector dx = report.witness_x_prime - report.witness_x;
  EXPECT_NEAR(report.max_violation, dx.squaredNorm(), 1e-12);
}

TEST(MonotoneCheck, NegativeIdentityEqualsMinusSquaredDistance) {
  const auto game = popdyn::random_matching_field(-Matrix::Identity(3, 3));
  const auto report = popdyn::check_monotone_sampled(game, 500, 5);
  EXPECT_LE(report.max_violation, 0.0);
  const Vector dx = report.witness_x_prime - report.witness_x;
  EXPECT_NEAR(report.max_violation, -dx.squaredNorm(), 1e-12);
}

TEST(PotentialCheck, QuadraticPotentialsHaveFirstOrderResidual) {
  const double step = 1e-4;
  for (const auto& game : {popdyn::congestion_field(Vector{{1.0, 2.0}}),
                           popdyn::random_matching_field(-Matrix::Identity(3, 3))}) {
    const auto report = popdyn::check_potential_sampled(game, 200, step, 9);
    EXPECT_TRUE(report.passed) << game.name();
    EXPECT_LE(report.max_residual, 10.0 * step * 2.0) << game.name();
    EXPECT_GT(report.max_residual, 0.0) << game.name();
  }
}

TEST(PotentialCheck, RpsHasNoPotential) {
  const auto game = popdyn::random_matching_field(rps());
  try {
    popdyn::check_potential_sampled(game, 10, 1e-4, 1);
    FAIL() << "expected an error";
  } catch (const popdyn::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingCapability);
    EXPECT_NE(std::string(e.what()).find("missing potential capability"), std::string::npos);
  }
}

TEST(Jacobian, MatchesCentralDifferences) {
  const double h = 1e-5;
  for (const auto& name : popdyn::builtin_names()) {
    const auto game = popdyn::make_field(popdyn::builtin_game(name));
    popdyn::Rng rng(2);
    const SimplexState x = popdyn::sample_simplex(game.n_strategies(), rng);
    const Matrix jac = game.jacobian(x);
    for (Eigen::Index j = 0; j < jac.cols(); ++j) {
      Vector up = x.weights();
      Vector down = x.weights();
      up(j) += h;
      down(j) -= h;
      const Vector fd = (game(up) - game(down)) / (2.0 * h);
      EXPECT_LE((fd - jac.col(j)).norm(), 1e-6 * std::max(1.0, jac.col(j).norm())) << name;
    }
  }
}

TEST(GameSpecJson, RoundTripsEveryKind) {
  for (const auto& name : popdyn::builtin_names()) {
    const auto spec = popdyn::game_spec_from_json(name);
    const auto again = popdyn::game_spec_from_json(popdyn::to_json(spec));
    EXPECT_EQ(popdyn::to_json(again), popdyn::to_json(spec));
  }
  const nlohmann::json matrix = {{"kind", "matrix"}, {"matrix", {{1, 2}, {3, 4}}}, {"name", "m"}};
  const auto field = popdyn::make_field(popdyn::game_spec_from_json(matrix));
  EXPECT_EQ(field.eval(SimplexState::vertex(2, 1)), (Vector{{2.0, 4.0}}));
  const nlohmann::json congestion = {{"kind", "congestion"}, {"slopes", {1, 3}}};
  EXPECT_EQ(popdyn::make_field(popdyn::game_spec_from_json(congestion)).n_strategies(), 2u);
}

TEST(GameSpecJson, InvalidDescriptionsAreConfigErrors) {
  EXPECT_EQ(kind_of([] { popdyn::game_spec_from_json(nlohmann::json{{"kind", "matrix"}, {"matrix", {{1, 2}}}}); }),
            ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { popdyn::game_spec_from_json(nlohmann::json{{"kind", "bogus"}}); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { popdyn::make_field(popdyn::game_spec_from_json("nope")); }), ErrorKind::kConfig);
}

TEST(Builtins, TabulatedEquilibriaHaveZeroGap) {
  for (const auto& name : popdyn::builtin_names()) {
    const auto game = popdyn::make_field(popdyn::builtin_game(name));
    for (const auto& eq : popdyn::builtin_equilibria(name)) {
      EXPECT_LE(oracle::gap(game.eval(eq), eq.weights()), 1e-15) << name;
    }
  }
}

}  // namespace
