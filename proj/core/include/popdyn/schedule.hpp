#pragma once

#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace popdyn {

/// Time-indexed weight: a regularization weight eps_t or a learning rate eta_t.
/// Continuous dynamics evaluate it at t >= 0; discrete processes at n = 1, 2, ...
class Schedule {
 public:
  struct Constant {
    double value;
  };
  /// scale / (t + offset)^exponent
  struct Power {
    double scale;
    double exponent;
    double offset;
  };
  /// Step interpolation: values[k] on [breakpoints[k], breakpoints[k+1]);
  /// values[0] before the first breakpoint.
  struct Table {
    std::vector<double> breakpoints;
    std::vector<double> values;
  };

  static Schedule constant(double value);
  static Schedule power(double scale, double exponent, double offset = 0.0);
  static Schedule table(std::vector<double> breakpoints, std::vector<double> values);

  double operator()(double t) const;

  bool is_constant() const;
  /// Strictly decreasing on [t_start, inf) and tending to zero.
  bool is_vanishing() const;
  bool is_nonincreasing() const;

  /// Throws unless the schedule is finite and strictly positive from t_start on.
  void validate_positive_from(double t_start) const;

  const std::variant<Constant, Power, Table>& kind() const noexcept { return kind_; }

 private:
  explicit Schedule(std::variant<Constant, Power, Table> kind) : kind_(std::move(kind)) {}
  std::variant<Constant, Power, Table> kind_;
};

/// Accepts a bare number (constant) or {"kind": "constant"|"power"|"table", ...}.
Schedule schedule_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Schedule& schedule);

}  // namespace popdyn
