#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "popdyn/error.hpp"
#include "popdyn/game.hpp"
#include "popdyn/harness.hpp"
#include "popdyn/invariants.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kAssertionFailure = 1;
constexpr int kConfigError = 2;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) popdyn::fail(popdyn::ErrorKind::kConfig, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    popdyn::fail(popdyn::ErrorKind::kConfig, "'" + path + "' is not valid JSON: " + e.what());
  }
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  for (std::string cell; std::getline(ss, cell, ',');) {
    if (cell.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cell.size()) popdyn::fail(popdyn::ErrorKind::kConfig, "--values: '" + cell + "' is not a number");
    values.push_back(v);
  }
  return values;
}

void print_summary(const popdyn::RunSummary& s) {
  std::printf("%s %s  hash=%s  rows=%zu stride=%zu  gap=%.6g  %s\n", s.game.c_str(), s.dynamic.c_str(),
              s.config_hash.c_str(), s.rows, s.stride, s.terminal_gap, s.passed ? "PASS" : "FAIL");
  if (s.aborted) std::printf("  aborted: %s\n", s.aborted->c_str());
  for (const auto& a : s.assertions) {
    std::printf("  [%s] %s  (lhs %.6g, rhs %.6g)\n", a.passed ? "pass" : "FAIL", a.expression.c_str(), a.lhs, a.rhs);
  }
  std::printf("  -> %s\n", s.output_dir.c_str());
}

int cmd_run(const std::string& path) {
  const popdyn::RunSummary s = popdyn::run_experiment(popdyn::load_config(path));
  print_summary(s);
  return s.passed ? kOk : kAssertionFailure;
}

int cmd_sweep(const std::string& path, const std::string& axis, const std::string& values) {
  const auto summaries = popdyn::run_sweep(read_json(path), axis, parse_values(values));
  bool passed = true;
  for (const auto& s : summaries) {
    print_summary(s);
    passed = passed && s.passed;
  }
  if (summaries.empty()) std::printf("empty sweep\n");
  return passed ? kOk : kAssertionFailure;
}

int cmd_check(const std::string& fixture) {
  const auto results = popdyn::run_invariant_suite(read_json(fixture));
  bool passed = true;
  std::printf("%-36s %14s %14s %8s  %s\n", "invariant", "value", "threshold", "seconds", "result");
  for (const auto& r : results) {
    std::printf("%-36s %14.6g %14.6g %8.3f  %s\n", r.name.c_str(), r.value, r.threshold, r.seconds,
                r.passed ? "pass" : "FAIL");
    passed = passed && r.passed;
  }
  std::printf("%zu invariants, %s\n", results.size(), passed ? "all pass" : "FAILURES");
  return passed ? kOk : kAssertionFailure;
}

int cmd_list_games() {
  for (const auto& name : popdyn::builtin_names()) {
    const auto spec = popdyn::to_json(popdyn::builtin_game(name));
    std::printf("%-14s %s\n", name.c_str(), spec.dump().c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Population dynamics and learning in games"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("config", config_path, "Config file")->required();

  std::string axis;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "Run a config once per value of a numeric field");
  sweep->add_option("config", config_path, "Base config file")->required();
  sweep->add_option("--axis", axis, "Dotted path of the swept field, e.g. eta_schedule.exponent")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();

  std::string fixture = POPDYN_DEFAULT_FIXTURE;
  auto* check = app.add_subcommand("check", "Run the invariant suite");
  check->add_option("--fixture", fixture, "Invariant fixture (JSON)");

  auto* list = app.add_subcommand("list-games", "List built-in games");
  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kConfigError;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*sweep) return cmd_sweep(config_path, axis, values);
    if (*check) return cmd_check(fixture);
    if (*list) return cmd_list_games();
    if (*version) {
      std::printf("popdyn %s\n", POPDYN_VERSION);
      return kOk;
    }
  } catch (const popdyn::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == popdyn::ErrorKind::kConfig ? kConfigError : kAssertionFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kAssertionFailure;
  }
  std::cerr << app.help();
  return kConfigError;
}
