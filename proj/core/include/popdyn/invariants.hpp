#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace popdyn {

/// Outcome of one property check: passes when value <= threshold.
struct InvariantResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Names understood by run_invariant_suite.
std::vector<std::string> invariant_names();

/// Runs every check listed in the fixture:
///   {"version": 1, "invariants": {"<name>": {<parameters>}, ...}}
/// Unknown names and unsupported versions are config errors.
std::vector<InvariantResult> run_invariant_suite(const nlohmann::json& fixture);

}  // namespace popdyn
