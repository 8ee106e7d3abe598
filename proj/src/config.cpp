#include "sbldoa/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "sbldoa/errors.hpp"

namespace sbldoa {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& raw) {
  std::string s = trim(raw);
  if (s == "+inf" || s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DomainError("config key '" + key + "': '" + s + "' is not a number");
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DomainError("config key '" + key + "': '" + s + "' is not an integer");
  return v;
}

bool to_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw DomainError("config key '" + key + "': '" + s + "' is not a boolean");
}

std::vector<double> to_doubles(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  for (const auto& item : split_list(raw)) out.push_back(to_double(key, item));
  return out;
}

const std::set<std::string> kKnownKeys = {
    "n_sensors", "spacing_wavelengths", "grid", "doas_deg", "magnitudes_db",
    "amplitude_model", "snap_to_grid", "snr_db", "snapshots", "n_trials", "base_seed",
    "methods", "output_dir", "threads", "record_timing", "exhaustive_grid",
    "exhaustive_budget", "k_sources", "sbl.sigma2_init", "sbl.gamma_init", "sbl.epsilon_min",
    "sbl.j_max", "sbl.gamma_floor", "sbl.noise_rule", "sbl.singular_policy",
    "sbl.diagonal_loading", "sbl.gamma_snapshot_iterations"};

}  // namespace

void ExperimentConfig::validate() const {
  geometry.validate();
  scenario.validate();
  if (n_trials < 1) throw DomainError("n_trials must be at least 1");
  if (methods.empty()) throw DomainError("no methods configured");
  if (snr_grid_db.empty()) throw DomainError("snr_db list is empty");
  if (snapshot_grid.empty()) throw DomainError("snapshots list is empty");
  for (int l : snapshot_grid)
    if (l < 1) throw DomainError("snapshot counts must be positive");
  if (threads < 1) throw DomainError("threads must be positive");
  for (const auto& m : methods) m.sbl.validate(geometry.n_sensors);
}

KeyValueText KeyValueText::parse(const std::string& text) {
  KeyValueText out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DomainError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw DomainError("config line " + std::to_string(lineno) + ": empty key");
    if (!out.entries_.emplace(key, trim(line.substr(eq + 1))).second)
      throw DomainError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return out;
}

std::optional<std::string> KeyValueText::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

AngularGrid parse_grid(const std::string& spec) {
  const std::string s = trim(spec);
  if (std::count(s.begin(), s.end(), ':') == 2) {
    const auto a = s.find(':');
    const auto b = s.find(':', a + 1);
    return AngularGrid::range(to_double("grid", s.substr(0, a)),
                              to_double("grid", s.substr(a + 1, b - a - 1)),
                              to_double("grid", s.substr(b + 1)));
  }
  return AngularGrid(to_doubles("grid", s));
}

MethodSpec parse_method_spec(const std::string& token, const SblConfig& defaults) {
  MethodSpec spec;
  spec.tag = token;
  spec.sbl = defaults;
  const auto colon = token.find(':');
  spec.method = parse_method(token.substr(0, colon));
  if (colon != std::string::npos) {
    if (spec.method != Method::sbl && spec.method != Method::sbl1 && spec.method != Method::msbl)
      throw DomainError("method '" + token + "': only SBL methods take a noise rule");
    spec.sbl.noise_rule = parse_noise_rule(token.substr(colon + 1));
  }
  switch (spec.method) {
    case Method::sbl: spec.sbl.update_rule = GammaRule::sbl; break;
    case Method::sbl1: spec.sbl.update_rule = GammaRule::sbl1; break;
    case Method::msbl: spec.sbl.update_rule = GammaRule::msbl; break;
    default: break;
  }
  return spec;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  const KeyValueText kv = KeyValueText::parse(text);
  for (const auto& [key, value] : kv.entries())
    if (!kKnownKeys.contains(key)) throw DomainError("unknown config key '" + key + "'");

  ExperimentConfig cfg;
  cfg.source_text = text;
  if (auto v = kv.get("n_sensors")) cfg.geometry.n_sensors = to_int<int>("n_sensors", *v);
  if (auto v = kv.get("spacing_wavelengths"))
    cfg.geometry.spacing_wavelengths = to_double("spacing_wavelengths", *v);
  if (auto v = kv.get("grid")) cfg.grid = parse_grid(*v);
  if (auto v = kv.get("doas_deg")) cfg.scenario.doas_deg = to_doubles("doas_deg", *v);
  if (auto v = kv.get("magnitudes_db"))
    cfg.scenario.magnitudes_db = to_doubles("magnitudes_db", *v);
  if (auto v = kv.get("amplitude_model"))
    cfg.scenario.amplitude_model = parse_amplitude_model(trim(*v));
  if (auto v = kv.get("snap_to_grid")) cfg.simulation.snap_to_grid = to_bool("snap_to_grid", *v);
  if (auto v = kv.get("snr_db")) cfg.snr_grid_db = to_doubles("snr_db", *v);
  if (auto v = kv.get("snapshots")) {
    cfg.snapshot_grid.clear();
    for (const auto& item : split_list(*v)) cfg.snapshot_grid.push_back(to_int<int>("snapshots", item));
  }
  if (auto v = kv.get("n_trials")) cfg.n_trials = to_int<int>("n_trials", *v);
  if (auto v = kv.get("base_seed")) cfg.base_seed = to_int<std::uint64_t>("base_seed", *v);
  if (auto v = kv.get("output_dir")) cfg.output_dir = *v;
  if (auto v = kv.get("threads")) cfg.threads = to_int<int>("threads", *v);
  if (auto v = kv.get("record_timing")) cfg.record_timing = to_bool("record_timing", *v);
  if (auto v = kv.get("exhaustive_grid")) cfg.exhaustive_grid = parse_grid(*v);
  if (auto v = kv.get("exhaustive_budget"))
    cfg.exhaustive_budget = to_int<std::uint64_t>("exhaustive_budget", *v);

  SblConfig sbl;
  sbl.k_sources = static_cast<int>(cfg.scenario.n_sources());
  if (auto v = kv.get("k_sources")) {
    const int k = to_int<int>("k_sources", *v);
    if (k != sbl.k_sources)
      throw DomainError("k_sources must equal the number of scenario sources");
  }
  if (auto v = kv.get("sbl.sigma2_init")) sbl.sigma2_init = to_double("sbl.sigma2_init", *v);
  if (auto v = kv.get("sbl.gamma_init")) sbl.gamma_init = to_double("sbl.gamma_init", *v);
  if (auto v = kv.get("sbl.epsilon_min")) sbl.epsilon_min = to_double("sbl.epsilon_min", *v);
  if (auto v = kv.get("sbl.j_max")) sbl.j_max = to_int<int>("sbl.j_max", *v);
  if (auto v = kv.get("sbl.gamma_floor")) sbl.gamma_floor = to_double("sbl.gamma_floor", *v);
  if (auto v = kv.get("sbl.noise_rule")) sbl.noise_rule = parse_noise_rule(trim(*v));
  if (auto v = kv.get("sbl.singular_policy")) {
    const std::string p = trim(*v);
    if (p == "diagonal_loading")
      sbl.singular_policy = SingularCovariancePolicy::diagonal_loading;
    else if (p == "strict")
      sbl.singular_policy = SingularCovariancePolicy::strict;
    else
      throw DomainError("sbl.singular_policy must be diagonal_loading or strict");
  }
  if (auto v = kv.get("sbl.diagonal_loading"))
    sbl.diagonal_loading = to_double("sbl.diagonal_loading", *v);
  if (auto v = kv.get("sbl.gamma_snapshot_iterations"))
    for (const auto& item : split_list(*v))
      sbl.gamma_snapshot_iterations.push_back(to_int<int>("sbl.gamma_snapshot_iterations", item));

  std::vector<std::string> tokens{"sbl"};
  if (auto v = kv.get("methods")) tokens = split_list(*v);
  for (const auto& token : tokens) cfg.methods.push_back(parse_method_spec(token, sbl));

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

ExperimentConfig reference_scenario() {
  ExperimentConfig cfg;
  cfg.geometry = ArrayGeometry{20, 0.5};
  cfg.grid = AngularGrid::range(-90.0, 0.5, 90.0);
  cfg.scenario.doas_deg = {-3.0, 2.0, 75.0};
  cfg.scenario.magnitudes_db = {12.0, 22.0, 20.0};
  cfg.scenario.amplitude_model = AmplitudeModel::random_phase_per_snapshot;
  cfg.snr_grid_db = {0.0};
  cfg.snapshot_grid = {50};
  cfg.n_trials = 100;
  SblConfig sbl;
  sbl.k_sources = 3;
  cfg.methods = {parse_method_spec("sbl", sbl)};
  return cfg;
}

}  // namespace sbldoa
