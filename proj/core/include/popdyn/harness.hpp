#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "popdyn/continuous.hpp"
#include "popdyn/discrete.hpp"
#include "popdyn/game.hpp"
#include "popdyn/schedule.hpp"

namespace popdyn {

inline constexpr const char* kSummarySchemaVersion = "1.0";
/// Cap on written trajectory rows; longer runs are subsampled.
inline constexpr std::size_t kMaxCsvRows = 10000;

enum class Dynamic { kFp, kRfp, kVrfp, kDa, kBrd, kRbrd, kVbrd, kDad };

std::string to_string(Dynamic dynamic);
Dynamic dynamic_from_string(const std::string& name);
bool is_continuous(Dynamic dynamic);

/// A pass/fail check on the run summary, e.g.
///   {"metric": "final.gap", "op": "<=", "value": 5e-3}
///   {"metric": "final.potential", "op": ">=", "value": "initial.potential"}
///   {"metric": "distance.mean", "target": "uniform", "op": "<=", "value": 1e-2}
/// Metrics are "<initial|final|min|max>.<column>" or "distance.<state|mean>"
/// (sup-norm distance of the terminal point to `target`). A string `value`
/// naming a key of the config's `tolerances` resolves to that number.
struct Assertion {
  std::string name;
  std::string metric;
  std::string op;
  std::variant<double, std::string> value;
  std::optional<nlohmann::json> target;
  double tolerance = 0.0;
};

struct ExperimentConfig {
  GameSpec game;
  Dynamic dynamic = Dynamic::kFp;
  std::optional<std::string> regularizer;
  std::optional<double> eps;
  std::optional<Schedule> eps_schedule;
  std::optional<Schedule> eta_schedule;
  std::optional<std::size_t> n_steps;  // discrete
  std::optional<double> horizon;       // continuous
  double dt = 1e-3;
  /// Explicit weights, or "uniform" / "vertex:<i>" / "random" (seeded).
  std::optional<nlohmann::json> initial_state;
  std::optional<Vector> initial_score;
  /// (name, state spec) pairs; empty -> vertices.
  std::vector<std::pair<std::string, nlohmann::json>> reference_points;
  std::uint64_t seed = 0;
  std::optional<std::string> output;
  std::map<std::string, double> tolerances;
  std::vector<Assertion> assertions;
};

/// Parses and validates a config. Errors are ErrorKind::kConfig and name the
/// offending field.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a (64 bit, hex) of the canonical config JSON without the output path.
std::string config_hash(const ExperimentConfig& config);

/// Rows of the trajectory CSV. Column order:
///   t|n, x_0.., xbar_0.., gap, reg_gap, potential, fenchel_<ref>.., regret_<ref>.., energy, r_n
struct TrajectoryTable {
  std::string index_name = "t";
  std::vector<double> index;
  std::vector<Vector> states;
  std::vector<Vector> means;
  std::vector<std::string> reference_names;
  std::map<std::string, std::vector<double>> columns;
  std::size_t stride = 1;
  std::size_t steps = 0;

  std::vector<std::string> channel_names() const;
  std::size_t size() const noexcept { return index.size(); }
};

TrajectoryTable table_from(const TrajectoryRecord& record);
TrajectoryTable table_from(const RunRecord& record, std::size_t max_rows = kMaxCsvRows);

std::string format_csv(const TrajectoryTable& table);
TrajectoryTable parse_csv(const std::string& text);
void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryTable& table);
TrajectoryTable read_trajectory_csv(const std::filesystem::path& path);

struct ChannelStats {
  double initial;
  double final;
  double min;
  double max;
};

struct AssertionResult {
  std::string name;
  std::string expression;
  double lhs;
  double rhs;
  bool passed;
};

struct RunSummary {
  std::string schema_version = kSummarySchemaVersion;
  std::string config_hash;
  std::string game;
  std::string dynamic;
  std::size_t steps = 0;
  std::size_t stride = 1;
  std::size_t rows = 0;
  std::vector<double> terminal_state;
  std::vector<double> terminal_mean;
  double terminal_gap = 0.0;
  double terminal_reg_gap = 0.0;
  /// Over written CSV rows, NaN entries skipped; absent when a column is empty.
  std::map<std::string, ChannelStats> channels;
  double wall_time_seconds = 0.0;
  std::vector<AssertionResult> assertions;
  bool passed = true;
  /// Set when the run stopped on a numerical failure.
  std::optional<std::string> aborted;
  std::string output_dir;
};

nlohmann::json to_json(const RunSummary& summary);
/// Rejects schema versions with an unknown major number.
RunSummary summary_from_json(const nlohmann::json& j);
RunSummary read_summary(const std::filesystem::path& path);

/// Summary statistics of a table, without assertions or timing.
RunSummary summarize(const TrajectoryTable& table);

/// Simulates without writing anything.
TrajectoryTable simulate(const ExperimentConfig& config);

/// Output directory of a config: relative paths resolve against POPDYN_OUT
/// (when set) or the working directory; without `output`, runs/<game>_<dynamic>_<hash>.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

/// Simulates, writes trajectory.csv and summary.json, evaluates assertions.
RunSummary run_experiment(const ExperimentConfig& config);

/// Runs one experiment per value of the numeric leaf at `axis` (dotted path,
/// e.g. "eta_schedule.exponent"), concurrently, each in its own
/// subdirectory of the base output; writes sweep.json there.
std::vector<RunSummary> run_sweep(const nlohmann::json& base_config, const std::string& axis,
                                  const std::vector<double>& values);

}  // namespace popdyn
