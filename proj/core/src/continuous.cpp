#include "popdyn/continuous.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "popdyn/equilibrium.hpp"
#include "popdyn/error.hpp"

namespace popdyn {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxEventsPerStep = 64;
// A candidate best-response vertex must carry the flow at least this long
// (in time units) before another strategy overtakes it.
constexpr double kMinEventProgress = 1e-10;

std::size_t step_count(const IntegrationOptions& options) {
  if (!(options.dt > 0.0 && options.dt <= 1.0)) fail(ErrorKind::kInvalidArgument, "dt must lie in (0, 1]");
  if (!(options.horizon >= options.dt)) fail(ErrorKind::kInvalidArgument, "horizon must be at least dt");
  if (options.max_records < 2) fail(ErrorKind::kInvalidArgument, "max_records must be at least 2");
  const double ratio = options.horizon / options.dt;
  const double rounded = std::round(ratio);
  return static_cast<std::size_t>(std::abs(ratio - rounded) <= 1e-9 * ratio ? rounded : std::ceil(ratio));
}

/// Shared bookkeeping: running mean, regret quadrature, subsampled recording.
class Recorder {
 public:
  Recorder(TrajectoryRecord& record, const PayoffField& game, const IntegrationOptions& options)
      : record_(record), dt_(options.dt) {
    record_.dt = options.dt;
    record_.steps = step_count(options);
    record_.stride = std::max<std::size_t>(1, (record_.steps + options.max_records - 1) / options.max_records);
    record_.references = options.references.empty() ? default_references(game.n_strategies()) : options.references;
    for (const auto& ref : record_.references) {
      if (ref.state.size() != game.n_strategies()) {
        fail(ErrorKind::kDimensionMismatch, "reference point '" + ref.name + "' has the wrong size");
      }
    }
    regret_.assign(record_.references.size(), 0.0);
    previous_integrand_.assign(record_.references.size(), 0.0);
  }

  std::size_t steps() const { return record_.steps; }

  /// Advances the mean/regret accumulators with the state at step k and
  /// returns true when step k is recorded.
  bool observe(std::size_t k, const SimplexState& x, const Vector& payoff) {
    const double t = static_cast<double>(k) * dt_;
    std::vector<double> integrand(record_.references.size());
    for (std::size_t r = 0; r < integrand.size(); ++r) {
      integrand[r] = payoff.dot(record_.references[r].state.weights() - x.weights());
    }
    if (k == 0) {
      mean_ = x.weights();
    } else {
      for (std::size_t r = 0; r < integrand.size(); ++r) {
        regret_[r] += 0.5 * dt_ * (previous_integrand_[r] + integrand[r]);
      }
      if (k == 1) {
        anchor_time_ = t;
        anchor_ = x.weights();
        integral_ = Vector::Zero(x.weights().size());
        mean_ = x.weights();
      } else {
        integral_ += 0.5 * dt_ * (previous_state_ + x.weights());
        mean_ = (anchor_time_ * anchor_ + integral_) / t;
      }
    }
    previous_integrand_ = integrand;
    previous_state_ = x.weights();

    if (k % record_.stride != 0 && k != record_.steps) return false;
    record_.times.push_back(t);
    record_.states.push_back(x);
    record_.means.push_back(SimplexState::project_drift(mean_));
    record_.payoffs.push_back(payoff);
    for (std::size_t r = 0; r < record_.references.size(); ++r) {
      put("regret_" + record_.references[r].name, regret_[r]);
    }
    return true;
  }

  void put(const std::string& channel, double value) { record_.channels[channel].push_back(value); }

  void note_correction(double correction) {
    record_.max_projection_correction = std::max(record_.max_projection_correction, correction);
  }

 private:
  TrajectoryRecord& record_;
  double dt_;
  std::vector<double> regret_;
  std::vector<double> previous_integrand_;
  Vector previous_state_;
  Vector mean_;
  Vector anchor_;
  Vector integral_;
  double anchor_time_ = 0.0;
};

void require_compatible(const PayoffField& game, const Regularizer& reg) {
  if (reg.size() != game.n_strategies()) {
    fail(ErrorKind::kDimensionMismatch, "regularizer and game have different strategy counts");
  }
}

void require_state(const PayoffField& game, const SimplexState& x) {
  if (x.size() != game.n_strategies()) {
    fail(ErrorKind::kDimensionMismatch, "initial state has " + std::to_string(x.size()) + " components, game has " +
                                            std::to_string(game.n_strategies()));
  }
}

template <typename Fn>
double guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDomain) return kMissing;
    throw;
  }
}

void require_finite_step(const Vector& next, std::size_t k) {
  if (!next.allFinite()) fail(ErrorKind::kNumerical, "non-finite state at step " + std::to_string(k + 1));
}

template <typename Rhs>
Vector rk4_step(const Vector& x, double dt, Rhs&& rhs) {
  const Vector k1 = rhs(x);
  const Vector k2 = rhs(x + 0.5 * dt * k1);
  const Vector k3 = rhs(x + 0.5 * dt * k2);
  const Vector k4 = rhs(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// --- best-response dynamics ------------------------------------------------

Vector toward_vertex(const Vector& x, std::size_t vertex, double tau) {
  Vector next = (1.0 - tau) * x;
  next(static_cast<Eigen::Index>(vertex)) += tau;
  return next;
}

/// Largest fraction s of `tau` such that `vertex` stays a best response along
/// the Euler segment toward it.
double viable_fraction(const PayoffField& game, const Vector& x, std::size_t vertex, double tau) {
  auto deficit = [&](double s) {
    const Vector v = game(toward_vertex(x, vertex, s * tau));
    return v.maxCoeff() - v(static_cast<Eigen::Index>(vertex));
  };
  if (deficit(1.0) <= kArgmaxTolerance) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 80 && hi - lo > 1e-17; ++it) {
    const double mid = 0.5 * (lo + hi);
    (deficit(mid) <= kArgmaxTolerance ? lo : hi) = mid;
  }
  return lo;
}

/// Filippov sliding velocity on the best-response face: sigma in the face with
/// the payoff ties preserved to first order. Empty when no such sigma exists.
std::optional<Vector> sliding_target(const PayoffField& game, const Vector& x, const std::vector<std::size_t>& face) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Matrix jac(n, n);
  if (game.has_jacobian()) {
    jac = game.jacobian(SimplexState::project_drift(x));
  } else {
    const double h = 1e-7;
    const Vector base = game(x);
    for (Eigen::Index j = 0; j < n; ++j) {
      Vector shifted = x;
      shifted(j) += h;
      jac.col(j) = (game(shifted) - base) / h;
    }
  }
  const auto m = static_cast<Eigen::Index>(face.size());
  // Unknowns: sigma over the face, plus the common payoff growth rate c.
  Matrix system = Matrix::Zero(m + 1, m + 1);
  Vector rhs = Vector::Zero(m + 1);
  const Vector drift = jac * x;
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto row = static_cast<Eigen::Index>(face[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < m; ++c) system(r, c) = jac(row, static_cast<Eigen::Index>(face[static_cast<std::size_t>(c)]));
    system(r, m) = -1.0;
    rhs(r) = drift(row);
  }
  system.block(m, 0, 1, m).setOnes();
  rhs(m) = 1.0;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) return std::nullopt;
  const Vector solution = lu.solve(rhs);
  Vector sigma = Vector::Zero(n);
  for (Eigen::Index r = 0; r < m; ++r) {
    if (solution(r) < -1e-12) return std::nullopt;
    sigma(static_cast<Eigen::Index>(face[static_cast<std::size_t>(r)])) = std::max(solution(r), 0.0);
  }
  return sigma;
}

Vector advance_brd(const PayoffField& game, Vector x, double dt, int& events) {
  double remaining = dt;
  events = 0;
  while (remaining > 0.0) {
    const BestResponseResult br = best_response_of_payoffs(game(x));
    if (in_best_response_face(br, SimplexState::project_drift(x))) break;

    bool moved = false;
    for (std::size_t candidate : br.argmax_indices) {
      const double s = viable_fraction(game, x, candidate, remaining);
      if (s == 1.0 || s * remaining > kMinEventProgress) {
        x = toward_vertex(x, candidate, s * remaining);
        remaining = s == 1.0 ? 0.0 : remaining * (1.0 - s);
        moved = true;
        break;
      }
    }
    if (moved && remaining > 0.0) ++events;
    if (!moved || events >= kMaxEventsPerStep) {
      const std::optional<Vector> sigma =
          br.argmax_indices.size() > 1 ? sliding_target(game, x, br.argmax_indices) : std::nullopt;
      x = sigma ? Vector((1.0 - remaining) * x + remaining * *sigma)
                : toward_vertex(x, br.argmax_indices.front(), remaining);
      remaining = 0.0;
    }
  }
  return x;
}

}  // namespace

const std::vector<double>& TrajectoryRecord::channel(const std::string& name) const {
  const auto it = channels.find(name);
  if (it == channels.end()) fail(ErrorKind::kInvalidArgument, "trajectory has no channel '" + name + "'");
  return it->second;
}

std::vector<NamedState> default_references(std::size_t n, const std::vector<NamedState>& extra) {
  std::vector<NamedState> refs;
  for (std::size_t i = 0; i < n; ++i) refs.push_back({"e" + std::to_string(i), SimplexState::vertex(n, i)});
  refs.insert(refs.end(), extra.begin(), extra.end());
  return refs;
}

TrajectoryRecord integrate_brd(const PayoffField& game, const SimplexState& x0, const IntegrationOptions& options) {
  require_state(game, x0);
  TrajectoryRecord record;
  Recorder recorder(record, game, options);

  SimplexState x = x0;
  for (std::size_t k = 0;; ++k) {
    const Vector v = game(x.weights());
    if (recorder.observe(k, x, v)) {
      recorder.put("gap", v.maxCoeff() - v.dot(x.weights()));
      recorder.put("potential", game.has_potential() ? game.potential(x) : kMissing);
    }
    if (k == recorder.steps()) break;
    int events = 0;
    const Vector next = guard_step(k, [&] {
      Vector out = advance_brd(game, x.weights(), options.dt, events);
      require_finite_step(out, k);
      return out;
    });
    record.max_events_per_step = std::max(record.max_events_per_step, events);
    double correction = 0.0;
    x = SimplexState::project_drift(next, &correction);
    recorder.note_correction(correction);
  }
  return record;
}

namespace {

struct RegularizedChannels {
  const PayoffField& game;
  const Regularizer& reg;

  void put(Recorder& recorder, const SimplexState& x, const Vector& v, double eps) const {
    recorder.put("gap", v.maxCoeff() - v.dot(x.weights()));
    const SimplexState target = reg.choice(v / eps);
    const double h_x = reg.value(x);
    const double reg_gap = v.dot(target.weights() - x.weights()) - eps * (reg.value(target) - h_x);
    recorder.put("reg_gap", reg_gap);
    if (game.has_potential()) {
      const double f = game.potential(x);
      recorder.put("raw_potential", f);
      recorder.put("potential", f - eps * h_x);
    } else {
      recorder.put("raw_potential", kMissing);
      recorder.put("potential", kMissing);
    }
    recorder.put("raw_h", h_x);
    recorder.put("eps", eps);
    // <v(x) - eps grad h(x), rBR(x) - x>; undefined on the entropic boundary.
    recorder.put("reg_correlation", guarded([&] {
                   return (v - eps * reg.subgradient(x)).dot(target.weights() - x.weights());
                 }));
  }
};

TrajectoryRecord integrate_regularized(const PayoffField& game, const Regularizer& reg, const Schedule& eps_schedule,
                                       const SimplexState& x0, const IntegrationOptions& options, bool vanishing) {
  require_state(game, x0);
  require_compatible(game, reg);
  eps_schedule.validate_positive_from(0.0);
  TrajectoryRecord record;
  Recorder recorder(record, game, options);
  const RegularizedChannels channels{game, reg};

  SimplexState x = x0;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * options.dt;
    const double eps = eps_schedule(t);
    const Vector v = game(x.weights());
    if (recorder.observe(k, x, v)) {
      channels.put(recorder, x, v, eps);
      if (vanishing) recorder.put("energy", record.channels["reg_gap"].back() + reg.range() * eps);
    }
    if (k == recorder.steps()) break;
    auto rhs = [&](const Vector& z) -> Vector { return reg.choice(game(z) / eps).weights() - z; };
    double correction = 0.0;
    const Vector next = guard_step(k, [&] {
      Vector out = rk4_step(x.weights(), options.dt, rhs);
      require_finite_step(out, k);
      return out;
    });
    x = SimplexState::project_drift(next, &correction);
    recorder.note_correction(correction);
  }
  return record;
}

}  // namespace

TrajectoryRecord integrate_rbrd(const PayoffField& game, const Regularizer& reg, double eps, const SimplexState& x0,
                                const IntegrationOptions& options) {
  if (!(eps > 0.0)) fail(ErrorKind::kInvalidArgument, "regularization weight must be positive");
  return integrate_regularized(game, reg, Schedule::constant(eps), x0, options, false);
}

TrajectoryRecord integrate_vbrd(const PayoffField& game, const Regularizer& reg, const Schedule& eps_schedule,
                                const SimplexState& x0, const IntegrationOptions& options) {
  if (!eps_schedule.is_vanishing()) {
    fail(ErrorKind::kInvalidArgument, "VBRD needs a strictly decreasing regularization schedule tending to zero");
  }
  return integrate_regularized(game, reg, eps_schedule, x0, options, true);
}

TrajectoryRecord integrate_dad(const PayoffField& game, const Regularizer& reg, const Schedule& eta_schedule,
                               const Vector& y0, const IntegrationOptions& options) {
  require_compatible(game, reg);
  if (static_cast<std::size_t>(y0.size()) != game.n_strategies()) {
    fail(ErrorKind::kDimensionMismatch, "initial score has the wrong size");
  }
  if (!y0.allFinite()) fail(ErrorKind::kInvalidArgument, "initial score must be finite");
  if (!eta_schedule.is_nonincreasing()) fail(ErrorKind::kInvalidArgument, "learning rate must be non-increasing");
  eta_schedule.validate_positive_from(0.0);

  TrajectoryRecord record;
  Recorder recorder(record, game, options);
  const SimplexState& primary = record.references.front().state;

  Vector y = y0;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * options.dt;
    const double eta = eta_schedule(t);
    const SimplexState x = reg.choice(eta * y);
    const Vector v = game(x.weights());
    if (recorder.observe(k, x, v)) {
      record.scores.push_back(y);
      recorder.put("gap", v.maxCoeff() - v.dot(x.weights()));
      recorder.put("potential", game.has_potential() ? game.potential(x) : kMissing);
      for (const auto& ref : record.references) {
        recorder.put("fenchel_" + ref.name, fenchel_coupling(reg, ref.state, eta * y));
      }
      recorder.put("energy", fenchel_coupling(reg, primary, eta * y) / eta);
      recorder.put("eta", eta);
      recorder.put("score_norm", y.norm());
    }
    if (k == recorder.steps()) break;
    y = guard_step(k, [&] {
      Vector out = rk4_step(y, options.dt, [&](const Vector& z) -> Vector { return game(reg.choice(eta * z).weights()); });
      require_finite_step(out, k);
      return out;
    });
  }
  return record;
}

Vector replicator_rhs(const PayoffField& game, const SimplexState& x) {
  const Vector v = game.eval(x);
  const double mean_payoff = v.dot(x.weights());
  return (x.weights().array() * (v.array() - mean_payoff)).matrix();
}

Vector projection_rhs(const PayoffField& game, const SimplexState& x) {
  const Vector v = game.eval(x);
  double total = 0.0;
  int support = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) {
      total += v(static_cast<Eigen::Index>(i));
      ++support;
    }
  }
  const double mean_payoff = total / support;
  Vector rhs = Vector::Zero(v.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) rhs(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(i)) - mean_payoff;
  }
  return rhs;
}

RegretSeries regret_along_trajectory(const TrajectoryRecord& traj, const SimplexState& p) {
  const std::size_t n = traj.size();
  if (n == 0 || traj.payoffs.size() != n) fail(ErrorKind::kInvalidArgument, "trajectory has no payoff record");
  for (std::size_t k = 1; k < n; ++k) {
    if (!(traj.times[k] > traj.times[k - 1])) fail(ErrorKind::kInvalidArgument, "trajectory times must increase");
  }
  std::vector<double> integrand(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (static_cast<std::size_t>(traj.payoffs[k].size()) != p.size()) {
      fail(ErrorKind::kDimensionMismatch, "comparator has the wrong size");
    }
    integrand[k] = traj.payoffs[k].dot(p.weights() - traj.states[k].weights());
  }

  RegretSeries out;
  out.values.assign(n, 0.0);
  out.error_estimate.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    out.values[k] = out.values[k - 1] + 0.5 * (traj.times[k] - traj.times[k - 1]) * (integrand[k] + integrand[k - 1]);
  }
  // Coarse trapezoid over even indices; |fine - coarse| / 3 estimates the fine error.
  double coarse = 0.0;
  for (std::size_t k = 2; k < n; k += 2) {
    coarse += 0.5 * (traj.times[k] - traj.times[k - 2]) * (integrand[k] + integrand[k - 2]);
    const double estimate = std::abs(out.values[k] - coarse) / 3.0;
    out.error_estimate[k] = estimate;
    out.error_estimate[k - 1] = std::max(out.error_estimate[k - 1], estimate);
    if (k + 1 < n) out.error_estimate[k + 1] = estimate;
  }
  return out;
}

}  // namespace popdyn
