#include "popdyn/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "popdyn/error.hpp"

namespace popdyn {

Schedule Schedule::constant(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    fail(ErrorKind::kInvalidArgument, "constant schedule must be positive, got " + std::to_string(value));
  }
  return Schedule(Constant{value});
}

Schedule Schedule::power(double scale, double exponent, double offset) {
  if (!(scale > 0.0) || !std::isfinite(scale)) fail(ErrorKind::kInvalidArgument, "power schedule scale must be positive");
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) {
    fail(ErrorKind::kInvalidArgument, "power schedule exponent must be nonnegative");
  }
  if (!std::isfinite(offset)) fail(ErrorKind::kInvalidArgument, "power schedule offset must be finite");
  return Schedule(Power{scale, exponent, offset});
}

Schedule Schedule::table(std::vector<double> breakpoints, std::vector<double> values) {
  if (values.empty() || breakpoints.size() != values.size()) {
    fail(ErrorKind::kInvalidArgument, "table schedule needs one value per breakpoint");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > 0.0) || !std::isfinite(values[k])) {
      fail(ErrorKind::kInvalidArgument, "table schedule values must be positive");
    }
    if (k > 0 && !(breakpoints[k] > breakpoints[k - 1])) {
      fail(ErrorKind::kInvalidArgument, "table schedule breakpoints must be strictly increasing");
    }
  }
  return Schedule(Table{std::move(breakpoints), std::move(values)});
}

double Schedule::operator()(double t) const {
  return std::visit(
      [t](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return k.value;
        } else if constexpr (std::is_same_v<T, Power>) {
          return k.scale / std::pow(t + k.offset, k.exponent);
        } else {
          const auto it = std::upper_bound(k.breakpoints.begin(), k.breakpoints.end(), t);
          if (it == k.breakpoints.begin()) return k.values.front();
          return k.values[static_cast<std::size_t>(it - k.breakpoints.begin()) - 1];
        }
      },
      kind_);
}

bool Schedule::is_constant() const {
  if (std::holds_alternative<Constant>(kind_)) return true;
  if (const auto* p = std::get_if<Power>(&kind_)) return p->exponent == 0.0;
  const auto& t = std::get<Table>(kind_);
  return std::all_of(t.values.begin(), t.values.end(), [&](double v) { return v == t.values.front(); });
}

bool Schedule::is_vanishing() const {
  // Tables are eventually constant, so only power laws vanish.
  if (const auto* p = std::get_if<Power>(&kind_)) return p->exponent > 0.0;
  return false;
}

bool Schedule::is_nonincreasing() const {
  if (std::holds_alternative<Constant>(kind_) || std::holds_alternative<Power>(kind_)) return true;
  const auto& t = std::get<Table>(kind_);
  return std::is_sorted(t.values.rbegin(), t.values.rend());
}

void Schedule::validate_positive_from(double t_start) const {
  if (const auto* p = std::get_if<Power>(&kind_)) {
    if (p->exponent > 0.0 && !(t_start + p->offset > 0.0)) {
      fail(ErrorKind::kInvalidArgument, "power schedule is singular at t = " + std::to_string(t_start) +
                                            " (offset " + std::to_string(p->offset) + ")");
    }
  }
  const double first = (*this)(t_start);
  if (!(first > 0.0) || !std::isfinite(first)) {
    fail(ErrorKind::kInvalidArgument, "schedule is not positive at t = " + std::to_string(t_start));
  }
}

Schedule schedule_from_json(const nlohmann::json& j) {
  try {
    if (j.is_number()) return Schedule::constant(j.get<double>());
    if (!j.is_object()) fail(ErrorKind::kConfig, "schedule must be a number or an object");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return Schedule::constant(j.at("value").get<double>());
    if (kind == "power") {
      return Schedule::power(j.value("scale", 1.0), j.at("exponent").get<double>(), j.value("offset", 0.0));
    }
    if (kind == "table") {
      return Schedule::table(j.at("breakpoints").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
    }
    fail(ErrorKind::kConfig, "schedule kind must be constant, power or table (got '" + kind + "')");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed schedule: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    fail(ErrorKind::kConfig, e.what());
  }
}

nlohmann::json to_json(const Schedule& schedule) {
  return std::visit(
      [](const auto& k) -> nlohmann::json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Schedule::Constant>) {
          return {{"kind", "constant"}, {"value", k.value}};
        } else if constexpr (std::is_same_v<T, Schedule::Power>) {
          return {{"kind", "power"}, {"scale", k.scale}, {"exponent", k.exponent}, {"offset", k.offset}};
        } else {
          return {{"kind", "table"}, {"breakpoints", k.breakpoints}, {"values", k.values}};
        }
      },
      schedule.kind());
}

}  // namespace popdyn
