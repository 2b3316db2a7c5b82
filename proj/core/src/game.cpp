#include "popdyn/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "popdyn/error.hpp"

namespace popdyn {

PayoffField::PayoffField(std::string name, std::size_t n_strategies, EvalFn eval,
                         JacobianFn jacobian, PotentialFn potential, StructureFlags flags)
    : name_(std::move(name)),
      n_(n_strategies),
      eval_(std::move(eval)),
      jacobian_(std::move(jacobian)),
      potential_(std::move(potential)),
      flags_(flags) {
  if (n_ == 0) fail(ErrorKind::kInvalidArgument, "payoff field needs at least one strategy");
  if (!eval_) fail(ErrorKind::kInvalidArgument, "payoff field needs an evaluator");
  flags_.is_potential = flags_.is_potential && has_potential();
}

namespace {

void require_size(const PayoffField& game, std::size_t got) {
  if (got != game.n_strategies()) {
    fail(ErrorKind::kDimensionMismatch, "game '" + game.name() + "' has " +
                                            std::to_string(game.n_strategies()) +
                                            " strategies, state has " + std::to_string(got));
  }
}

}  // namespace

Vector PayoffField::eval(const SimplexState& x) const {
  require_size(*this, x.size());
  Vector v = eval_(x.weights());
  if (!v.allFinite()) fail(ErrorKind::kNumerical, "payoff field '" + name_ + "' returned non-finite values");
  return v;
}

Matrix PayoffField::jacobian(const SimplexState& x) const {
  if (!jacobian_) fail(ErrorKind::kMissingCapability, "missing jacobian capability for '" + name_ + "'");
  require_size(*this, x.size());
  return jacobian_(x.weights());
}

double PayoffField::potential(const SimplexState& x) const {
  require_size(*this, x.size());
  return potential_raw(x.weights());
}

double PayoffField::potential_raw(const Vector& x) const {
  if (!potential_) fail(ErrorKind::kMissingCapability, "missing potential capability for '" + name_ + "'");
  return potential_(x);
}

Vector payoff_eval(const PayoffField& game, const SimplexState& x) { return game.eval(x); }

namespace {

// Orthonormal-free basis of the tangent space {z : sum z = 0}: columns e_i - e_last.
Matrix tangent_basis(Eigen::Index n) {
  Matrix basis = Matrix::Zero(n, std::max<Eigen::Index>(n - 1, 0));
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    basis(i, i) = 1.0;
    basis(n - 1, i) = -1.0;
  }
  return basis;
}

}  // namespace

PayoffField random_matching_field(const Matrix& a, std::string name) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    fail(ErrorKind::kInvalidArgument, "random matching needs a non-empty square matrix, got " +
                                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  if (!a.allFinite()) fail(ErrorKind::kInvalidArgument, "payoff matrix has non-finite entries");

  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const bool symmetric = (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;

  StructureFlags flags;
  flags.is_potential = symmetric;
  if (a.rows() == 1) {
    flags.is_monotone = true;
    flags.is_strictly_monotone = true;
  } else {
    const Matrix basis = tangent_basis(a.rows());
    const Matrix sym = 0.5 * (a + a.transpose());
    const Matrix restricted = basis.transpose() * sym * basis;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(restricted, Eigen::EigenvaluesOnly);
    const double top = solver.eigenvalues().maxCoeff();
    flags.is_monotone = top <= 1e-12 * scale;
    flags.is_strictly_monotone = top < -1e-12 * scale;
  }

  PayoffField::PotentialFn potential;
  if (symmetric) {
    potential = [a](const Vector& x) { return 0.5 * x.dot(a * x); };
  }
  return PayoffField(
      std::move(name), static_cast<std::size_t>(a.rows()), [a](const Vector& x) -> Vector { return a * x; },
      [a](const Vector&) -> Matrix { return a; }, std::move(potential), flags);
}

PayoffField congestion_field(const Vector& slopes, std::string name) {
  if (slopes.size() == 0) fail(ErrorKind::kInvalidArgument, "congestion game needs at least one strategy");
  for (Eigen::Index i = 0; i < slopes.size(); ++i) {
    if (!(slopes(i) > 0.0) || !std::isfinite(slopes(i))) {
      fail(ErrorKind::kInvalidArgument,
           "congestion slope " + std::to_string(i) + " must be positive, got " + std::to_string(slopes(i)));
    }
  }
  StructureFlags flags{.is_potential = true, .is_monotone = true, .is_strictly_monotone = true};
  return PayoffField(
      std::move(name), static_cast<std::size_t>(slopes.size()),
      [slopes](const Vector& x) -> Vector { return -(slopes.array() * x.array()).matrix(); },
      [slopes](const Vector&) -> Matrix { return Matrix((-slopes).asDiagonal()); },
      [slopes](const Vector& x) { return -0.5 * (slopes.array() * x.array().square()).sum(); }, flags);
}

// ---------------------------------------------------------------------------
// Built-in games

namespace {

Matrix rows_to_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double value : row) m(r, c++) = value;
    ++r;
  }
  return m;
}

}  // namespace

std::vector<std::string> builtin_names() { return {"rps", "coordination", "neg_identity", "gess", "congestion"}; }

GameSpec builtin_game(const std::string& name) {
  if (name == "rps") {
    return {MatrixGameSpec{rows_to_matrix({{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}})}, name, std::nullopt};
  }
  if (name == "coordination") {
    return {MatrixGameSpec{Matrix::Identity(2, 2)}, name, std::nullopt};
  }
  if (name == "neg_identity") {
    return {MatrixGameSpec{-Matrix::Identity(3, 3)}, name, std::nullopt};
  }
  if (name == "gess") {
    // v(x) = 1 - x on the simplex, written as (11^T - I) x.
    return {MatrixGameSpec{Matrix::Ones(3, 3) - Matrix::Identity(3, 3)}, name, std::nullopt};
  }
  if (name == "congestion") {
    Vector slopes(2);
    slopes << 1.0, 2.0;
    return {CongestionGameSpec{slopes}, name, std::nullopt};
  }
  fail(ErrorKind::kConfig, "unknown built-in game '" + name + "'");
}

std::vector<SimplexState> builtin_equilibria(const std::string& name) {
  if (name == "rps" || name == "neg_identity" || name == "gess") return {SimplexState::uniform(3)};
  if (name == "coordination") {
    Vector mid(2);
    mid << 0.5, 0.5;
    return {SimplexState::vertex(2, 0), SimplexState::vertex(2, 1), SimplexState(mid)};
  }
  if (name == "congestion") {
    Vector eq(2);
    eq << 2.0 / 3.0, 1.0 / 3.0;
    return {SimplexState(eq)};
  }
  return {};
}

PayoffField make_field(const GameSpec& spec) {
  return std::visit(
      [&](const auto& kind) -> PayoffField {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, MatrixGameSpec>) {
          return random_matching_field(kind.matrix, spec.name.empty() ? "matrix" : spec.name);
        } else if constexpr (std::is_same_v<T, CongestionGameSpec>) {
          return congestion_field(kind.slopes, spec.name.empty() ? "congestion" : spec.name);
        } else {
          return make_field(builtin_game(kind.name));
        }
      },
      spec.kind);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) fail(ErrorKind::kConfig, "game.matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  if (rows != cols) {
    fail(ErrorKind::kConfig, "game.matrix must be square, got " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      fail(ErrorKind::kConfig, "game.matrix row " + std::to_string(r) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Vector vector_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array() || j.empty()) fail(ErrorKind::kConfig, std::string(field) + " must be a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

GameSpec game_spec_from_json(const nlohmann::json& j) {
  if (j.is_string()) return GameSpec{BuiltinGameSpec{j.get<std::string>()}, j.get<std::string>(), std::nullopt};
  if (!j.is_object()) fail(ErrorKind::kConfig, "game must be an object or a built-in name");
  const std::string kind = j.value("kind", std::string("builtin"));
  GameSpec spec;
  spec.name = j.value("name", std::string());
  try {
    if (kind == "matrix") {
      if (!j.contains("matrix")) fail(ErrorKind::kConfig, "game.matrix is required for kind 'matrix'");
      spec.kind = MatrixGameSpec{matrix_from_json(j.at("matrix"))};
    } else if (kind == "congestion") {
      if (!j.contains("slopes")) fail(ErrorKind::kConfig, "game.slopes is required for kind 'congestion'");
      Vector slopes = vector_from_json(j.at("slopes"), "game.slopes");
      if ((slopes.array() < 0.0).any()) fail(ErrorKind::kConfig, "game.slopes must be nonnegative");
      spec.kind = CongestionGameSpec{std::move(slopes)};
    } else if (kind == "builtin") {
      if (spec.name.empty()) fail(ErrorKind::kConfig, "game.name is required for kind 'builtin'");
      builtin_game(spec.name);
      spec.kind = BuiltinGameSpec{spec.name};
    } else {
      fail(ErrorKind::kConfig, "game.kind must be matrix, congestion or builtin (got '" + kind + "')");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed game: ") + e.what());
  }
  if (j.contains("flags")) {
    const auto& f = j.at("flags");
    spec.declared_flags = StructureFlags{f.value("is_potential", false), f.value("is_monotone", false),
                                         f.value("is_strictly_monotone", false)};
  }
  return spec;
}

nlohmann::json to_json(const GameSpec& spec) {
  nlohmann::json j;
  std::visit(
      [&](const auto& kind) {
        using T = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<T, MatrixGameSpec>) {
          j["kind"] = "matrix";
          nlohmann::json rows = nlohmann::json::array();
          for (Eigen::Index r = 0; r < kind.matrix.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < kind.matrix.cols(); ++c) row.push_back(kind.matrix(r, c));
            rows.push_back(std::move(row));
          }
          j["matrix"] = std::move(rows);
        } else if constexpr (std::is_same_v<T, CongestionGameSpec>) {
          j["kind"] = "congestion";
          j["slopes"] = std::vector<double>(kind.slopes.data(), kind.slopes.data() + kind.slopes.size());
        } else {
          j["kind"] = "builtin";
        }
      },
      spec.kind);
  if (!spec.name.empty()) j["name"] = spec.name;
  if (spec.declared_flags) {
    j["flags"] = {{"is_potential", spec.declared_flags->is_potential},
                  {"is_monotone", spec.declared_flags->is_monotone},
                  {"is_strictly_monotone", spec.declared_flags->is_strictly_monotone}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Sampled structure checks

MonotoneReport check_monotone_sampled(const PayoffField& game, int n_pairs, std::uint64_t rng_seed) {
  if (n_pairs < 1) fail(ErrorKind::kInvalidArgument, "n_pairs must be at least 1");
  Rng rng(rng_seed);
  MonotoneReport report;
  report.max_violation = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_pairs; ++k) {
    const SimplexState x = sample_simplex(game.n_strategies(), rng);
    const SimplexState xp = sample_simplex(game.n_strategies(), rng);
    const double value = (game.eval(xp) - game.eval(x)).dot(xp.weights() - x.weights());
    if (value > report.max_violation) {
      report.max_violation = value;
      report.witness_x = x.weights();
      report.witness_x_prime = xp.weights();
    }
  }
  report.consistent = report.max_violation <= 1e-9;
  return report;
}

PotentialReport check_potential_sampled(const PayoffField& game, int n_points, double fd_step,
                                        std::uint64_t rng_seed) {
  if (!game.has_potential()) {
    fail(ErrorKind::kMissingCapability, "missing potential capability for '" + game.name() + "'");
  }
  if (n_points < 1) fail(ErrorKind::kInvalidArgument, "n_points must be at least 1");
  if (!(fd_step > 0.0 && fd_step <= 1e-2)) fail(ErrorKind::kInvalidArgument, "fd_step must lie in (0, 1e-2]");

  Rng rng(rng_seed);
  PotentialReport report;
  double value_scale = 0.0;
  for (int k = 0; k < n_points; ++k) {
    const Vector x = sample_simplex(game.n_strategies(), rng).weights();
    const Vector dir = sample_simplex(game.n_strategies(), rng).weights() - x;
    const double f0 = game.potential_raw(x);
    const double f1 = game.potential_raw(x + fd_step * dir);
    const double f2 = game.potential_raw(x + 2.0 * fd_step * dir);
    const double slope = (f1 - f0) / fd_step;
    report.max_residual = std::max(report.max_residual, std::abs(slope - game(x).dot(dir)));
    report.curvature_estimate =
        std::max(report.curvature_estimate, std::abs(f2 - 2.0 * f1 + f0) / (fd_step * fd_step));
    value_scale = std::max(value_scale, std::abs(f0));
  }
  // Roundoff floor of a forward difference quotient.
  const double roundoff = 100.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, value_scale) / fd_step;
  report.bound = 10.0 * fd_step * report.curvature_estimate + roundoff;
  report.passed = report.max_residual <= report.bound;
  return report;
}

}  // namespace popdyn
