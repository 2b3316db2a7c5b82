#include "popdyn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "popdyn/equilibrium.hpp"
#include "popdyn/error.hpp"

namespace popdyn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void config_error(const std::string& field, const std::string& message) {
  fail(ErrorKind::kConfig, "field '" + field + "': " + message);
}

/// Runs `fn`, turning json and library errors into config errors on `field`.
template <typename Fn>
auto in_field(const std::string& field, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    config_error(field, e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig && std::string(e.what()).find("field '") != std::string::npos) throw;
    config_error(field, e.what());
  }
}

std::string format_double(double value) {
  if (std::isnan(value)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

SimplexState resolve_state(const json& spec, std::size_t n, Rng& rng) {
  if (spec.is_string()) {
    const std::string s = spec.get<std::string>();
    if (s == "uniform") return SimplexState::uniform(n);
    if (s == "random") return sample_simplex(n, rng);
    if (s.rfind("vertex:", 0) == 0) {
      const int index = std::stoi(s.substr(7));
      if (index < 0 || static_cast<std::size_t>(index) >= n) fail(ErrorKind::kInvalidArgument, "vertex index out of range");
      return SimplexState::vertex(n, static_cast<std::size_t>(index));
    }
    fail(ErrorKind::kInvalidArgument, "state must be weights, 'uniform', 'random' or 'vertex:<i>' (got '" + s + "')");
  }
  const auto w = spec.get<std::vector<double>>();
  if (w.size() != n) {
    fail(ErrorKind::kDimensionMismatch,
         "state has " + std::to_string(w.size()) + " components, game has " + std::to_string(n));
  }
  return SimplexState(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())));
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

bool uses_regularizer(Dynamic d) { return d != Dynamic::kFp && d != Dynamic::kBrd; }
bool uses_eps(Dynamic d) { return d == Dynamic::kRfp || d == Dynamic::kRbrd; }
bool uses_eps_schedule(Dynamic d) { return d == Dynamic::kVrfp || d == Dynamic::kVbrd; }
bool uses_eta(Dynamic d) { return d == Dynamic::kDa || d == Dynamic::kDad; }

const std::set<std::string> kConfigKeys = {
    "name",        "description",   "game",          "dynamic",          "regularizer", "eps",
    "eps_schedule", "eta_schedule", "horizon",       "N",                "T",           "dt",
    "initial_state", "initial_score", "reference_points", "seed",        "output",      "tolerances",
    "assertions"};

Assertion assertion_from_json(const json& j, std::size_t index) {
  const std::string field = "assertions[" + std::to_string(index) + "]";
  return in_field(field, [&] {
    Assertion a;
    a.metric = j.at("metric").get<std::string>();
    a.op = j.value("op", std::string("<="));
    static const std::set<std::string> ops = {"<=", "<", ">=", ">", "=="};
    if (!ops.count(a.op)) config_error(field, "unknown comparison '" + a.op + "'");
    const json& value = j.at("value");
    if (value.is_number()) {
      a.value = value.get<double>();
    } else {
      a.value = value.get<std::string>();
    }
    if (j.contains("target")) a.target = j.at("target");
    if (a.metric.rfind("distance.", 0) == 0 && !a.target) config_error(field, "distance metrics need a target");
    a.tolerance = j.value("tolerance", 0.0);
    a.name = j.value("name", a.metric + " " + a.op + " " +
                                 (value.is_number() ? format_double(value.get<double>()) : value.get<std::string>()));
    return a;
  });
}

json assertion_to_json(const Assertion& a) {
  json j = {{"name", a.name}, {"metric", a.metric}, {"op", a.op}, {"tolerance", a.tolerance}};
  std::visit([&](const auto& v) { j["value"] = v; }, a.value);
  if (a.target) j["target"] = *a.target;
  return j;
}

}  // namespace

std::string to_string(Dynamic dynamic) {
  switch (dynamic) {
    case Dynamic::kFp: return "fp";
    case Dynamic::kRfp: return "rfp";
    case Dynamic::kVrfp: return "vrfp";
    case Dynamic::kDa: return "da";
    case Dynamic::kBrd: return "brd";
    case Dynamic::kRbrd: return "rbrd";
    case Dynamic::kVbrd: return "vbrd";
    case Dynamic::kDad: return "dad";
  }
  return "unknown";
}

Dynamic dynamic_from_string(const std::string& name) {
  for (Dynamic d : {Dynamic::kFp, Dynamic::kRfp, Dynamic::kVrfp, Dynamic::kDa, Dynamic::kBrd, Dynamic::kRbrd,
                    Dynamic::kVbrd, Dynamic::kDad}) {
    if (to_string(d) == name) return d;
  }
  config_error("dynamic", "must be one of fp, rfp, vrfp, da, brd, rbrd, vbrd, dad (got '" + name + "')");
}

bool is_continuous(Dynamic dynamic) {
  return dynamic == Dynamic::kBrd || dynamic == Dynamic::kRbrd || dynamic == Dynamic::kVbrd ||
         dynamic == Dynamic::kDad;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::kConfig, "config must be a JSON object");
  for (const auto& item : j.items()) {
    if (!kConfigKeys.count(item.key())) config_error(item.key(), "unknown field");
  }
  ExperimentConfig c;
  if (!j.contains("game")) config_error("game", "required");
  if (!j.contains("dynamic")) config_error("dynamic", "required");
  c.game = in_field("game", [&] { return game_spec_from_json(j.at("game")); });
  const PayoffField field = in_field("game", [&] { return make_field(c.game); });
  const std::size_t n = field.n_strategies();
  c.dynamic = dynamic_from_string(in_field("dynamic", [&] { return j.at("dynamic").get<std::string>(); }));
  const std::string dyn = to_string(c.dynamic);

  if (j.contains("regularizer")) {
    if (!uses_regularizer(c.dynamic)) config_error("regularizer", dyn + " does not take a regularizer");
    c.regularizer = in_field("regularizer", [&] {
      const auto name = j.at("regularizer").get<std::string>();
      make_regularizer(name, n);
      return name;
    });
  } else if (uses_regularizer(c.dynamic)) {
    config_error("regularizer", "required by " + dyn);
  }

  if (j.contains("eps")) {
    if (!uses_eps(c.dynamic)) config_error("eps", dyn + " does not take a constant eps");
    c.eps = in_field("eps", [&] { return j.at("eps").get<double>(); });
    if (!(*c.eps > 0.0) || !std::isfinite(*c.eps)) config_error("eps", "must be positive");
  } else if (uses_eps(c.dynamic)) {
    config_error("eps", "required by " + dyn);
  }

  if (j.contains("eps_schedule")) {
    if (!uses_eps_schedule(c.dynamic)) config_error("eps_schedule", dyn + " does not take an eps schedule");
    c.eps_schedule = in_field("eps_schedule", [&] { return schedule_from_json(j.at("eps_schedule")); });
    if (!c.eps_schedule->is_vanishing()) config_error("eps_schedule", "must be decreasing to zero");
    in_field("eps_schedule", [&] {
      c.eps_schedule->validate_positive_from(c.dynamic == Dynamic::kVrfp ? 1.0 : 0.0);
      return 0;
    });
  } else if (uses_eps_schedule(c.dynamic)) {
    config_error("eps_schedule", "required by " + dyn);
  }

  if (j.contains("eta_schedule")) {
    if (!uses_eta(c.dynamic)) config_error("eta_schedule", dyn + " does not take a learning rate");
    c.eta_schedule = in_field("eta_schedule", [&] { return schedule_from_json(j.at("eta_schedule")); });
    if (!c.eta_schedule->is_nonincreasing()) config_error("eta_schedule", "must be non-increasing");
    in_field("eta_schedule", [&] {
      c.eta_schedule->validate_positive_from(c.dynamic == Dynamic::kDa ? 1.0 : 0.0);
      return 0;
    });
  } else if (uses_eta(c.dynamic)) {
    config_error("eta_schedule", "required by " + dyn);
  }

  const json horizon = j.contains("horizon") ? j.at("horizon") : json::object();
  if (!horizon.is_object()) config_error("horizon", "must be an object with N or T/dt");
  auto lookup = [&](const char* key) -> const json* {
    if (horizon.contains(key)) return &horizon.at(key);
    if (j.contains(key)) return &j.at(key);
    return nullptr;
  };
  if (is_continuous(c.dynamic)) {
    if (lookup("N")) config_error("N", dyn + " is continuous; use T and dt");
    const json* t = lookup("T");
    if (!t) config_error("T", "required by " + dyn);
    c.horizon = in_field("T", [&] { return t->get<double>(); });
    if (const json* dt = lookup("dt")) c.dt = in_field("dt", [&] { return dt->get<double>(); });
    if (!(c.dt > 0.0 && c.dt <= 1.0)) config_error("dt", "must lie in (0, 1]");
    if (!(*c.horizon >= c.dt) || !std::isfinite(*c.horizon)) config_error("T", "must be finite and at least dt");
  } else {
    if (lookup("T") || lookup("dt")) config_error("T", dyn + " is discrete; use N");
    const json* steps = lookup("N");
    if (!steps) config_error("N", "required by " + dyn);
    const double value = in_field("N", [&] { return steps->get<double>(); });
    if (!(value >= 1.0) || value != std::floor(value) || value > 1e9) config_error("N", "must be an integer in [1, 1e9]");
    c.n_steps = static_cast<std::size_t>(value);
  }

  Rng rng(0);
  if (j.contains("initial_state")) {
    c.initial_state = j.at("initial_state");
    in_field("initial_state", [&] { return resolve_state(*c.initial_state, n, rng); });
  }
  if (j.contains("initial_score")) {
    if (!uses_eta(c.dynamic)) config_error("initial_score", dyn + " has no score variable");
    const auto s = in_field("initial_score", [&] { return j.at("initial_score").get<std::vector<double>>(); });
    if (s.size() != n) config_error("initial_score", "needs " + std::to_string(n) + " components");
    c.initial_score = to_vector(s);
    if (!c.initial_score->allFinite()) config_error("initial_score", "must be finite");
  }
  if (j.contains("reference_points")) {
    const json& refs = j.at("reference_points");
    if (!refs.is_array()) config_error("reference_points", "must be an array of {name, state}");
    std::set<std::string> names;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const std::string f = "reference_points[" + std::to_string(i) + "]";
      auto entry = in_field(f, [&] {
        auto name = refs[i].at("name").get<std::string>();
        resolve_state(refs[i].at("state"), n, rng);
        return std::make_pair(name, refs[i].at("state"));
      });
      if (entry.first.empty() || entry.first.find_first_of(", \"\n") != std::string::npos) {
        config_error(f, "name must be non-empty without commas, quotes or spaces");
      }
      if (!names.insert(entry.first).second) config_error(f, "duplicate name '" + entry.first + "'");
      c.reference_points.push_back(std::move(entry));
    }
  }
  if (j.contains("seed")) c.seed = in_field("seed", [&] { return j.at("seed").get<std::uint64_t>(); });
  if (j.contains("output")) c.output = in_field("output", [&] { return j.at("output").get<std::string>(); });
  if (j.contains("tolerances")) {
    c.tolerances = in_field("tolerances", [&] { return j.at("tolerances").get<std::map<std::string, double>>(); });
  }
  if (j.contains("assertions")) {
    const json& list = j.at("assertions");
    if (!list.is_array()) config_error("assertions", "must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      c.assertions.push_back(assertion_from_json(list[i], i));
      if (const auto* key = std::get_if<std::string>(&c.assertions.back().value)) {
        const bool metric = key->find('.') != std::string::npos;
        if (!metric && !c.tolerances.count(*key)) {
          config_error("assertions[" + std::to_string(i) + "]", "value '" + *key + "' is neither a metric nor a tolerance");
        }
      }
    }
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["game"] = to_json(c.game);
  j["dynamic"] = to_string(c.dynamic);
  if (c.regularizer) j["regularizer"] = *c.regularizer;
  if (c.eps) j["eps"] = *c.eps;
  if (c.eps_schedule) j["eps_schedule"] = to_json(*c.eps_schedule);
  if (c.eta_schedule) j["eta_schedule"] = to_json(*c.eta_schedule);
  if (c.n_steps) {
    j["horizon"] = {{"N", *c.n_steps}};
  } else {
    j["horizon"] = {{"T", *c.horizon}, {"dt", c.dt}};
  }
  if (c.initial_state) j["initial_state"] = *c.initial_state;
  if (c.initial_score) j["initial_score"] = to_std(*c.initial_score);
  if (!c.reference_points.empty()) {
    j["reference_points"] = json::array();
    for (const auto& [name, state] : c.reference_points) j["reference_points"].push_back({{"name", name}, {"state", state}});
  }
  j["seed"] = c.seed;
  if (c.output) j["output"] = *c.output;
  if (!c.tolerances.empty()) j["tolerances"] = c.tolerances;
  if (!c.assertions.empty()) {
    j["assertions"] = json::array();
    for (const auto& a : c.assertions) j["assertions"].push_back(assertion_to_json(a));
  }
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

// --- trajectory tables ------------------------------------------------------

std::vector<std::string> TrajectoryTable::channel_names() const {
  std::vector<std::string> names = {"gap", "reg_gap", "potential"};
  for (const auto& r : reference_names) names.push_back("fenchel_" + r);
  for (const auto& r : reference_names) names.push_back("regret_" + r);
  names.push_back("energy");
  names.push_back("r_n");
  return names;
}

namespace {

template <typename Record>
void copy_channels(TrajectoryTable& table, const Record& record, const std::vector<std::size_t>& rows) {
  for (const auto& ref : record.references) table.reference_names.push_back(ref.name);
  for (const auto& name : table.channel_names()) {
    auto& column = table.columns[name];
    column.reserve(rows.size());
    const auto it = record.channels.find(name);
    for (std::size_t row : rows) column.push_back(it == record.channels.end() ? kMissing : it->second[row]);
  }
}

}  // namespace

TrajectoryTable table_from(const TrajectoryRecord& record) {
  TrajectoryTable table;
  table.index_name = "t";
  table.stride = record.stride;
  table.steps = record.steps;
  std::vector<std::size_t> rows(record.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k] = k;
    table.index.push_back(record.times[k]);
    table.states.push_back(record.states[k].weights());
    table.means.push_back(record.means[k].weights());
  }
  copy_channels(table, record, rows);
  return table;
}

TrajectoryTable table_from(const RunRecord& record, std::size_t max_rows) {
  if (max_rows < 2) fail(ErrorKind::kInvalidArgument, "max_rows must be at least 2");
  TrajectoryTable table;
  table.index_name = "n";
  table.steps = record.size();
  table.stride = std::max<std::size_t>(1, (record.size() + max_rows - 1) / max_rows);
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < record.size(); ++k) {
    if (k % table.stride != 0 && k + 1 != record.size()) continue;
    rows.push_back(k);
    table.index.push_back(static_cast<double>(k + 1));
    table.states.push_back(record.states[k].weights());
    table.means.push_back(record.means[k].weights());
  }
  copy_channels(table, record, rows);
  return table;
}

std::string format_csv(const TrajectoryTable& table) {
  const std::size_t k = table.states.empty() ? 0 : static_cast<std::size_t>(table.states.front().size());
  const auto names = table.channel_names();
  std::string out = table.index_name;
  for (std::size_t i = 0; i < k; ++i) out += ",x_" + std::to_string(i);
  for (std::size_t i = 0; i < k; ++i) out += ",xbar_" + std::to_string(i);
  for (const auto& name : names) out += "," + name;
  out += '\n';
  std::vector<const std::vector<double>*> columns;
  for (const auto& name : names) columns.push_back(&table.columns.at(name));
  for (std::size_t row = 0; row < table.size(); ++row) {
    out += format_double(table.index[row]);
    for (std::size_t i = 0; i < k; ++i) out += "," + format_double(table.states[row](static_cast<Eigen::Index>(i)));
    for (std::size_t i = 0; i < k; ++i) out += "," + format_double(table.means[row](static_cast<Eigen::Index>(i)));
    for (const auto* column : columns) out += "," + format_double((*column)[row]);
    out += '\n';
  }
  return out;
}

TrajectoryTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kInvalidArgument, "empty trajectory CSV");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  const auto header = split(line);
  TrajectoryTable table;
  if (header.empty() || (header[0] != "t" && header[0] != "n")) {
    fail(ErrorKind::kInvalidArgument, "trajectory CSV must start with a t or n column");
  }
  table.index_name = header[0];
  std::size_t k = 0;
  while (1 + k < header.size() && header[1 + k].rfind("x_", 0) == 0) ++k;
  for (std::size_t c = 1 + 2 * k; c < header.size(); ++c) {
    if (header[c].rfind("fenchel_", 0) == 0) table.reference_names.push_back(header[c].substr(8));
  }
  const auto names = table.channel_names();
  if (header.size() != 1 + 2 * k + names.size()) fail(ErrorKind::kInvalidArgument, "trajectory CSV header is malformed");
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (header[1 + 2 * k + c] != names[c]) {
      fail(ErrorKind::kInvalidArgument, "unexpected CSV column '" + header[1 + 2 * k + c] + "'");
    }
    table.columns[names[c]];
  }
  auto parse = [](const std::string& cell) { return cell.empty() ? kMissing : std::strtod(cell.c_str(), nullptr); };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) fail(ErrorKind::kInvalidArgument, "ragged trajectory CSV row");
    table.index.push_back(parse(cells[0]));
    Vector x(static_cast<Eigen::Index>(k));
    Vector m(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      x(static_cast<Eigen::Index>(i)) = parse(cells[1 + i]);
      m(static_cast<Eigen::Index>(i)) = parse(cells[1 + k + i]);
    }
    table.states.push_back(x);
    table.means.push_back(m);
    for (std::size_t c = 0; c < names.size(); ++c) table.columns[names[c]].push_back(parse(cells[1 + 2 * k + c]));
  }
  table.steps = table.size();
  return table;
}

void write_trajectory_csv(const fs::path& path, const TrajectoryTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kInvalidArgument, "cannot write '" + path.string() + "'");
  out << format_csv(table);
}

TrajectoryTable read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kInvalidArgument, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

// --- summaries ----------------------------------------------------------------

RunSummary summarize(const TrajectoryTable& table) {
  if (table.size() == 0) fail(ErrorKind::kInvalidArgument, "empty trajectory");
  RunSummary s;
  s.steps = table.steps;
  s.stride = table.stride;
  s.rows = table.size();
  s.terminal_state = to_std(table.states.back());
  s.terminal_mean = to_std(table.means.back());
  s.terminal_gap = table.columns.at("gap").back();
  s.terminal_reg_gap = table.columns.at("reg_gap").back();
  for (const auto& [name, column] : table.columns) {
    std::optional<ChannelStats> stats;
    for (double v : column) {
      if (std::isnan(v)) continue;
      if (!stats) {
        stats = ChannelStats{v, v, v, v};
      } else {
        stats->final = v;
        stats->min = std::min(stats->min, v);
        stats->max = std::max(stats->max, v);
      }
    }
    if (stats) s.channels[name] = *stats;
  }
  return s;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) { return j.is_null() ? kMissing : j.get<double>(); }

}  // namespace

json to_json(const RunSummary& s) {
  json j;
  j["schema_version"] = s.schema_version;
  j["config_hash"] = s.config_hash;
  j["game"] = s.game;
  j["dynamic"] = s.dynamic;
  j["steps"] = s.steps;
  j["stride"] = s.stride;
  j["rows"] = s.rows;
  j["terminal_state"] = s.terminal_state;
  j["terminal_mean"] = s.terminal_mean;
  j["terminal_gap"] = number_or_null(s.terminal_gap);
  j["terminal_reg_gap"] = number_or_null(s.terminal_reg_gap);
  j["channels"] = json::object();
  for (const auto& [name, c] : s.channels) {
    j["channels"][name] = {{"initial", number_or_null(c.initial)},
                           {"final", number_or_null(c.final)},
                           {"min", number_or_null(c.min)},
                           {"max", number_or_null(c.max)}};
  }
  j["wall_time_seconds"] = s.wall_time_seconds;
  j["assertions"] = json::array();
  for (const auto& a : s.assertions) {
    j["assertions"].push_back({{"name", a.name},
                               {"expression", a.expression},
                               {"lhs", number_or_null(a.lhs)},
                               {"rhs", number_or_null(a.rhs)},
                               {"passed", a.passed}});
  }
  j["passed"] = s.passed;
  j["aborted"] = s.aborted ? json(*s.aborted) : json(nullptr);
  j["output_dir"] = s.output_dir;
  return j;
}

RunSummary summary_from_json(const json& j) {
  try {
    RunSummary s;
    s.schema_version = j.at("schema_version").get<std::string>();
    const std::string major = s.schema_version.substr(0, s.schema_version.find('.'));
    const std::string supported(kSummarySchemaVersion);
    if (major != supported.substr(0, supported.find('.'))) {
      fail(ErrorKind::kConfig, "unsupported summary schema version '" + s.schema_version + "'");
    }
    s.config_hash = j.at("config_hash").get<std::string>();
    s.game = j.at("game").get<std::string>();
    s.dynamic = j.at("dynamic").get<std::string>();
    s.steps = j.at("steps").get<std::size_t>();
    s.stride = j.at("stride").get<std::size_t>();
    s.rows = j.at("rows").get<std::size_t>();
    s.terminal_state = j.at("terminal_state").get<std::vector<double>>();
    s.terminal_mean = j.at("terminal_mean").get<std::vector<double>>();
    s.terminal_gap = number_from(j.at("terminal_gap"));
    s.terminal_reg_gap = number_from(j.at("terminal_reg_gap"));
    for (const auto& item : j.at("channels").items()) {
      const json& c = item.value();
      s.channels[item.key()] =
          ChannelStats{number_from(c.at("initial")), number_from(c.at("final")), number_from(c.at("min")),
                       number_from(c.at("max"))};
    }
    s.wall_time_seconds = j.at("wall_time_seconds").get<double>();
    for (const auto& a : j.at("assertions")) {
      s.assertions.push_back({a.at("name").get<std::string>(), a.at("expression").get<std::string>(),
                              number_from(a.at("lhs")), number_from(a.at("rhs")), a.at("passed").get<bool>()});
    }
    s.passed = j.at("passed").get<bool>();
    if (!j.at("aborted").is_null()) s.aborted = j.at("aborted").get<std::string>();
    s.output_dir = j.value("output_dir", std::string());
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed summary: ") + e.what());
  }
}

RunSummary read_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot open summary '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("summary is not valid JSON: ") + e.what());
  }
  return summary_from_json(j);
}

// --- execution ----------------------------------------------------------------

TrajectoryTable simulate(const ExperimentConfig& c) {
  const PayoffField game = make_field(c.game);
  const std::size_t n = game.n_strategies();
  Rng rng(c.seed);
  const std::optional<SimplexState> initial =
      c.initial_state ? std::optional<SimplexState>(resolve_state(*c.initial_state, n, rng)) : std::nullopt;
  const SimplexState x0 = initial.value_or(SimplexState::uniform(n));
  std::vector<NamedState> refs;
  for (const auto& [name, spec] : c.reference_points) refs.push_back({name, resolve_state(spec, n, rng)});
  if (refs.empty()) {
    // Known equilibria of a built-in come first so they anchor the energy channel.
    if (const auto* builtin = std::get_if<BuiltinGameSpec>(&c.game.kind)) {
      const auto equilibria = builtin_equilibria(builtin->name);
      for (std::size_t i = 0; i < equilibria.size(); ++i) refs.push_back({"eq" + std::to_string(i), equilibria[i]});
    }
    const auto vertices = default_references(n);
    refs.insert(refs.end(), vertices.begin(), vertices.end());
  }
  const RegularizerPtr reg = c.regularizer ? make_regularizer(*c.regularizer, n) : nullptr;

  if (is_continuous(c.dynamic)) {
    IntegrationOptions options;
    options.horizon = *c.horizon;
    options.dt = c.dt;
    options.max_records = kMaxCsvRows;
    options.references = refs;
    switch (c.dynamic) {
      case Dynamic::kBrd: return table_from(integrate_brd(game, x0, options));
      case Dynamic::kRbrd: return table_from(integrate_rbrd(game, *reg, *c.eps, x0, options));
      case Dynamic::kVbrd: return table_from(integrate_vbrd(game, *reg, *c.eps_schedule, x0, options));
      default: {
        Vector y0 = Vector::Zero(static_cast<Eigen::Index>(n));
        if (c.initial_score) {
          y0 = *c.initial_score;
        } else if (initial) {
          try {
            y0 = reg->subgradient(*initial) / (*c.eta_schedule)(0.0);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::kDomain) throw;
          }
        }
        return table_from(integrate_dad(game, *reg, *c.eta_schedule, y0, options));
      }
    }
  }
  DiscreteOptions options;
  options.references = refs;
  switch (c.dynamic) {
    case Dynamic::kFp: return table_from(run_fp(game, x0, *c.n_steps, options));
    case Dynamic::kRfp: return table_from(run_rfp(game, *reg, *c.eps, x0, *c.n_steps, options));
    case Dynamic::kVrfp: return table_from(run_vrfp(game, *reg, *c.eps_schedule, x0, *c.n_steps, options));
    default: return table_from(run_da(game, *reg, *c.eta_schedule, c.initial_score, initial, *c.n_steps, options));
  }
}

fs::path resolve_output_dir(const ExperimentConfig& config) {
  fs::path dir = config.output ? fs::path(*config.output)
                               : fs::path("runs") / ((config.game.name.empty() ? "game" : config.game.name) + "_" + to_string(config.dynamic) + "_" +
                                                     config_hash(config).substr(0, 8));
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv("POPDYN_OUT");
  return (root != nullptr && *root != '\0' ? fs::path(root) : fs::current_path()) / dir;
}

namespace {

double metric_value(const std::string& metric, const RunSummary& s, const std::optional<json>& target) {
  const auto dot = metric.find('.');
  if (dot == std::string::npos) fail(ErrorKind::kConfig, "metric '" + metric + "' must be <stat>.<column>");
  const std::string stat = metric.substr(0, dot);
  const std::string column = metric.substr(dot + 1);
  if (stat == "distance") {
    const auto& point = column == "state" ? s.terminal_state : column == "mean" ? s.terminal_mean
                                                                               : std::vector<double>{};
    if (point.empty()) fail(ErrorKind::kConfig, "distance metric must be distance.state or distance.mean");
    Rng rng(0);
    const SimplexState t = resolve_state(*target, point.size(), rng);
    return (to_vector(point) - t.weights()).cwiseAbs().maxCoeff();
  }
  const auto it = s.channels.find(column);
  if (it == s.channels.end()) return kMissing;
  if (stat == "initial") return it->second.initial;
  if (stat == "final") return it->second.final;
  if (stat == "min") return it->second.min;
  if (stat == "max") return it->second.max;
  fail(ErrorKind::kConfig, "unknown statistic '" + stat + "' in metric '" + metric + "'");
}

AssertionResult evaluate(const Assertion& a, const RunSummary& s, const std::map<std::string, double>& tolerances) {
  AssertionResult r;
  r.name = a.name;
  r.lhs = metric_value(a.metric, s, a.target);
  std::string rhs_text;
  if (const double* v = std::get_if<double>(&a.value)) {
    r.rhs = *v;
    rhs_text = format_double(*v);
  } else {
    const auto& key = std::get<std::string>(a.value);
    const auto tol = tolerances.find(key);
    r.rhs = tol != tolerances.end() ? tol->second : metric_value(key, s, std::nullopt);
    rhs_text = key;
  }
  r.expression = a.metric + " " + a.op + " " + rhs_text;
  if (a.tolerance != 0.0) r.expression += " (tolerance " + format_double(a.tolerance) + ")";
  const double l = r.lhs;
  const double h = r.rhs;
  const double tol = a.tolerance;
  if (a.op == "<=") r.passed = l <= h + tol;
  else if (a.op == "<") r.passed = l < h + tol;
  else if (a.op == ">=") r.passed = l >= h - tol;
  else if (a.op == ">") r.passed = l > h - tol;
  else r.passed = std::abs(l - h) <= tol;
  return r;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kInvalidArgument, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = resolve_output_dir(config);
  fs::create_directories(dir);

  RunSummary summary;
  try {
    const TrajectoryTable table = simulate(config);
    summary = summarize(table);
    write_trajectory_csv(dir / "trajectory.csv", table);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumerical) throw;
    summary.aborted = e.what();
    summary.passed = false;
  }
  summary.config_hash = config_hash(config);
  summary.game = config.game.name;
  summary.dynamic = to_string(config.dynamic);
  summary.output_dir = dir.string();
  if (!summary.aborted) {
    for (const auto& a : config.assertions) {
      summary.assertions.push_back(evaluate(a, summary, config.tolerances));
      summary.passed = summary.passed && summary.assertions.back().passed;
    }
  }
  summary.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(dir / "config.json", to_json(config));
  write_json(dir / "summary.json", to_json(summary));
  return summary;
}

std::vector<RunSummary> run_sweep(const json& base_config, const std::string& axis, const std::vector<double>& values) {
  if (axis.empty()) fail(ErrorKind::kConfig, "bad axis path ''");
  std::string pointer;
  std::stringstream parts(axis);
  for (std::string part; std::getline(parts, part, '.');) {
    if (part.empty()) fail(ErrorKind::kConfig, "bad axis path '" + axis + "'");
    pointer += "/" + part;
  }
  const json::json_pointer ptr(pointer);
  if (!base_config.is_object() || !base_config.contains(ptr) || !base_config.at(ptr).is_number()) {
    fail(ErrorKind::kConfig, "bad axis path '" + axis + "': no numeric leaf there");
  }
  const fs::path root = resolve_output_dir(config_from_json(base_config));
  fs::create_directories(root);

  std::vector<ExperimentConfig> configs;
  for (double value : values) {
    json j = base_config;
    j[ptr] = value;
    char name[64];
    std::snprintf(name, sizeof name, "%s=%.6g", axis.c_str(), value);
    j["output"] = (root / name).string();
    configs.push_back(config_from_json(j));
  }

  std::vector<RunSummary> summaries(configs.size());
  const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t begin = 0; begin < configs.size(); begin += width) {
    std::vector<std::future<RunSummary>> batch;
    const std::size_t end = std::min(configs.size(), begin + width);
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, [&configs, i] { return run_experiment(configs[i]); }));
    }
    for (std::size_t i = begin; i < end; ++i) summaries[i] = batch[i - begin].get();
  }

  json sweep = {{"schema_version", kSummarySchemaVersion}, {"axis", axis}, {"values", values}, {"runs", json::array()}};
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const RunSummary& s = summaries[i];
    json finals = json::object();
    for (const auto& [name, c] : s.channels) finals[name] = number_or_null(c.final);
    sweep["runs"].push_back({{"value", values[i]},
                             {"output_dir", s.output_dir},
                             {"config_hash", s.config_hash},
                             {"terminal_gap", number_or_null(s.terminal_gap)},
                             {"terminal_mean", s.terminal_mean},
                             {"finals", finals},
                             {"passed", s.passed}});
  }
  write_json(root / "sweep.json", sweep);
  return summaries;
}

}  // namespace popdyn
