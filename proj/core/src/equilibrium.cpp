#include "popdyn/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <unordered_map>

namespace popdyn {

namespace {

void require_positive_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    fail(ErrorKind::kInvalidArgument, "regularization weight must be positive, got " + std::to_string(eps));
  }
}

}  // namespace

BestResponseResult best_response_of_payoffs(const Vector& payoffs) {
  const double top = payoffs.maxCoeff();
  std::vector<std::size_t> argmax;
  for (Eigen::Index i = 0; i < payoffs.size(); ++i) {
    if (payoffs(i) >= top - kArgmaxTolerance) argmax.push_back(static_cast<std::size_t>(i));
  }
  const auto n = static_cast<std::size_t>(payoffs.size());
  return {argmax, SimplexState::vertex(n, argmax.front()), top};
}

BestResponseResult best_response(const PayoffField& game, const SimplexState& x) {
  return best_response_of_payoffs(game.eval(x));
}

bool in_best_response_face(const BestResponseResult& br, const SimplexState& x) {
  double outside = x.weights().sum();
  for (std::size_t i : br.argmax_indices) outside -= x[i];
  return outside <= kStationaryTolerance;
}

SimplexState regularized_best_response(const PayoffField& game, const Regularizer& reg, double eps,
                                       const SimplexState& x) {
  require_positive_eps(eps);
  return reg.choice(game.eval(x) / eps);
}

double gap(const PayoffField& game, const SimplexState& x) {
  const Vector v = game.eval(x);
  return v.maxCoeff() - v.dot(x.weights());
}

double regularized_gap(const PayoffField& game, const Regularizer& reg, double eps, const SimplexState& x) {
  require_positive_eps(eps);
  const Vector v = game.eval(x);
  const SimplexState target = reg.choice(v / eps);
  return v.dot(target.weights() - x.weights()) - eps * (reg.value(target) - reg.value(x));
}

MviReport mvi_violation(const PayoffField& game, const SimplexState& x_star, int n_samples,
                        std::uint64_t rng_seed) {
  if (n_samples < 1) fail(ErrorKind::kInvalidArgument, "n_samples must be at least 1");
  if (x_star.size() != game.n_strategies()) fail(ErrorKind::kDimensionMismatch, "reference state size");
  Rng rng(rng_seed);
  MviReport report{-std::numeric_limits<double>::infinity(), Vector()};
  auto consider = [&](const SimplexState& x) {
    const double value = game.eval(x).dot(x.weights() - x_star.weights());
    if (value > report.max_violation) {
      report.max_violation = value;
      report.witness = x.weights();
    }
  };
  // Vertices are where MVI violations of non-monotone games usually peak.
  for (std::size_t i = 0; i < game.n_strategies(); ++i) consider(SimplexState::vertex(game.n_strategies(), i));
  for (int k = 0; k < n_samples; ++k) consider(sample_simplex(game.n_strategies(), rng));
  return report;
}

EssReport ess_check(const PayoffField& game, const SimplexState& x_star, double radius, int n_samples,
                    std::uint64_t rng_seed) {
  if (!(radius > 0.0)) fail(ErrorKind::kInvalidArgument, "radius must be positive");
  if (n_samples < 1) fail(ErrorKind::kInvalidArgument, "n_samples must be at least 1");
  if (x_star.size() != game.n_strategies()) fail(ErrorKind::kDimensionMismatch, "reference state size");
  Rng rng(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  EssReport report{-std::numeric_limits<double>::infinity(), Vector()};
  // Every point of the ball intersected with X lies on a segment from x_star
  // to some z in X, so shrinking uniform draws toward x_star covers it.
  int accepted = 0;
  while (accepted < n_samples) {
    const Vector z = sample_simplex(game.n_strategies(), rng).weights();
    const Vector dir = z - x_star.weights();
    const double length = dir.norm();
    if (length <= 0.0) continue;
    double t = std::min(1.0, radius / length) * unit(rng);
    if (t <= 0.0) continue;
    const SimplexState x = SimplexState::project_drift(x_star.weights() + t * dir);
    const double value = game.eval(x).dot(x.weights() - x_star.weights());
    if (value > report.max_local_violation) {
      report.max_local_violation = value;
      report.witness = x.weights();
    }
    ++accepted;
  }
  return report;
}

nlohmann::json to_json(const EquilibriumCertificate& cert) {
  const Vector& w = cert.point.weights();
  return {{"point", std::vector<double>(w.data(), w.data() + w.size())},
          {"svi_residual", cert.svi_residual},
          {"mvi_violation", cert.mvi_violation},
          {"ess_violation", cert.ess_violation},
          {"fixed_point_residual", cert.fixed_point_residual},
          {"iterations", cert.iterations},
          {"flags",
           {{"is_eq", cert.flags.is_eq},
            {"is_mvi_consistent", cert.flags.is_mvi_consistent},
            {"is_ess_consistent", cert.flags.is_ess_consistent}}}};
}

EquilibriumCertificate certify(const PayoffField& game, const SimplexState& point, const CertificateOptions& options) {
  EquilibriumCertificate cert{point, 0.0, 0.0, 0.0, 0.0, 0, {}};
  cert.svi_residual = gap(game, point);
  cert.mvi_violation = mvi_violation(game, point, options.n_samples, options.rng_seed).max_violation;
  cert.ess_violation =
      ess_check(game, point, options.ess_radius, options.n_samples, options.rng_seed + 1).max_local_violation;
  cert.flags.is_eq = cert.svi_residual <= options.gap_tolerance;
  // MVI solutions are equilibria, so MVI consistency is only claimed for equilibria.
  cert.flags.is_mvi_consistent = cert.flags.is_eq && cert.mvi_violation <= options.mvi_tolerance;
  cert.flags.is_ess_consistent = cert.flags.is_eq && cert.ess_violation < 0.0;
  return cert;
}

EquilibriumCertificate solve_regularized_equilibrium(const PayoffField& game, const Regularizer& reg, double eps,
                                                     const SimplexState& x0, const FixedPointOptions& options) {
  require_positive_eps(eps);
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    fail(ErrorKind::kInvalidArgument, "damping must lie in (0, 1]");
  }
  if (!(options.tol > 0.0)) fail(ErrorKind::kInvalidArgument, "tolerance must be positive");
  if (x0.size() != game.n_strategies() || reg.size() != game.n_strategies()) {
    fail(ErrorKind::kDimensionMismatch, "game, regularizer and initial state sizes differ");
  }

  const auto residual_of = [&](const Vector& point) -> Vector {
    return reg.choice(game(point) / eps).weights() - point;
  };
  const Eigen::Index n = x0.weights().size();
  // Tangent basis of the simplex: e_i - e_{n-1}.
  Matrix basis = Matrix::Zero(n, n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    basis(i, i) = 1.0;
    basis(n - 1, i) = -1.0;
  }
  // Newton step on the residual in tangent coordinates, finite-difference
  // Jacobian, with a short backtracking search. Returns false when no tried
  // step reduces the residual norm.
  const auto newton = [&](Vector& point, Vector& r) {
    if (n < 2) return false;
    constexpr double kFd = 1e-7;
    Matrix jac(n, n - 1);
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
      const double h = std::min({kFd, 0.5 * point(j), 0.5 * point(n - 1)});
      if (!(h > 0.0)) return false;
      jac.col(j) = (residual_of(point + h * basis.col(j)) - residual_of(point - h * basis.col(j))) / (2.0 * h);
    }
    const Vector z = jac.colPivHouseholderQr().solve(-r);
    const Vector step = basis * z;
    if (!step.allFinite()) return false;
    for (double scale = 1.0; scale >= 1.0 / 16.0; scale *= 0.5) {
      const Vector trial = point + scale * step;
      if (trial.minCoeff() < 0.0) continue;
      const Vector trial_r = residual_of(trial);
      if (trial_r.norm() < 0.5 * r.norm()) {
        point = trial;
        r = trial_r;
        return true;
      }
    }
    return false;
  };

  Vector x = SimplexState::project_drift(x0.weights()).weights();
  Vector r = residual_of(x);
  Vector best = x;
  double best_residual = std::numeric_limits<double>::infinity();
  double damping = options.damping;
  constexpr int kPatience = 50;
  int stalled = 0;
  // Damped fixed-point steps when Newton fails; the damping is halved each
  // time the best residual goes kPatience iterations without improving.
  for (int iter = 0; iter <= options.max_iter; ++iter) {
    const double residual = r.cwiseAbs().maxCoeff();
    if (residual <= options.tol) {
      EquilibriumCertificate cert = certify(game, SimplexState(x), options.certificate);
      cert.fixed_point_residual = residual;
      cert.iterations = iter;
      return cert;
    }
    if (residual < best_residual) {
      best_residual = residual;
      best = x;
      stalled = 0;
    } else if (++stalled >= kPatience) {
      damping = std::max(0.5 * damping, 1e-12);
      stalled = 0;
    }
    if (newton(x, r)) continue;
    x = SimplexState::project_drift(x + damping * r).weights();
    r = residual_of(x);
  }
  char message[160];
  std::snprintf(message, sizeof message,
                "regularized equilibrium iteration did not reach tolerance %.3g (best residual %.3g)", options.tol,
                best_residual);
  throw NonConvergenceError(message,
                            SimplexState::project_drift(best), best_residual, options.max_iter);
}

// ---------------------------------------------------------------------------
// Grid oracle

namespace {

void enumerate_compositions(int remaining, std::size_t slot, std::vector<int>& current,
                            std::vector<std::vector<int>>& out) {
  if (slot + 1 == current.size()) {
    current[slot] = remaining;
    out.push_back(current);
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    current[slot] = k;
    enumerate_compositions(remaining - k, slot + 1, current, out);
  }
}

std::uint64_t lattice_key(const std::vector<int>& c, int m) {
  std::uint64_t key = 0;
  for (int value : c) key = key * static_cast<std::uint64_t>(m + 1) + static_cast<std::uint64_t>(value);
  return key;
}

}  // namespace

BruteForceResult brute_force_equilibria(const PayoffField& game, double grid_step) {
  const std::size_t n = game.n_strategies();
  if (n > 4) fail(ErrorKind::kInvalidArgument, "grid oracle supports at most 4 strategies, got " + std::to_string(n));
  if (!(grid_step >= 1e-3 && grid_step <= 0.5)) fail(ErrorKind::kInvalidArgument, "grid_step must lie in [1e-3, 0.5]");
  const int m = static_cast<int>(std::lround(1.0 / grid_step));

  std::vector<std::vector<int>> lattice;
  std::vector<int> scratch(n, 0);
  enumerate_compositions(m, 0, scratch, lattice);

  std::vector<double> gaps(lattice.size());
  std::unordered_map<std::uint64_t, std::size_t> index;
  index.reserve(lattice.size());
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    Vector w(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) w(static_cast<Eigen::Index>(i)) = lattice[k][i] / static_cast<double>(m);
    gaps[k] = gap(game, SimplexState(std::move(w)));
    index.emplace(lattice_key(lattice[k], m), k);
  }

  // Visits the lattice neighbours c + e_j - e_i of point k.
  auto for_each_neighbour = [&](std::size_t k, auto&& visit) {
    std::vector<int> c = lattice[k];
    for (std::size_t i = 0; i < n; ++i) {
      if (c[i] == 0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        --c[i];
        ++c[j];
        if (auto it = index.find(lattice_key(c, m)); it != index.end()) visit(it->second);
        ++c[i];
        --c[j];
      }
    }
  };

  BruteForceResult result;
  result.min_gap = *std::min_element(gaps.begin(), gaps.end());
  result.slack = 0.0;
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    for_each_neighbour(k, [&](std::size_t other) {
      result.slack = std::max(result.slack, std::abs(gaps[k] - gaps[other]));
    });
  }

  const double threshold = result.min_gap + result.slack * (1.0 + 1e-9);
  std::vector<std::size_t> selected;
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    if (gaps[k] <= threshold) selected.push_back(k);
  }
  std::stable_sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) { return gaps[a] < gaps[b]; });

  std::unordered_map<std::size_t, std::size_t> position;
  for (std::size_t p = 0; p < selected.size(); ++p) {
    const std::size_t k = selected[p];
    Vector w(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) w(static_cast<Eigen::Index>(i)) = lattice[k][i] / static_cast<double>(m);
    result.points.push_back({SimplexState(std::move(w)), gaps[k], lattice[k]});
    position.emplace(k, p);
  }

  std::vector<bool> seen(selected.size(), false);
  for (std::size_t start = 0; start < selected.size(); ++start) {
    if (seen[start]) continue;
    std::vector<std::size_t> cluster;
    std::deque<std::size_t> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      cluster.push_back(p);
      for_each_neighbour(selected[p], [&](std::size_t other) {
        if (auto it = position.find(other); it != position.end() && !seen[it->second]) {
          seen[it->second] = true;
          queue.push_back(it->second);
        }
      });
    }
    std::sort(cluster.begin(), cluster.end());
    result.clusters.push_back(std::move(cluster));
  }
  return result;
}

}  // namespace popdyn
