#pragma once

// Flat key = value experiment configuration.
//
//   # comment
//   n_sensors = 20
//   grid = -90:0.5:90          # start:step:stop, or a comma list
//   doas_deg = -3, 2, 75
//   methods = cbf, music, sbl, msbl:em
//
// docs/config.md lists every key.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbldoa/array_model.hpp"
#include "sbldoa/baselines.hpp"
#include "sbldoa/sbl.hpp"

namespace sbldoa {

struct MethodSpec {
  std::string tag;  // as written in the config, e.g. "msbl:em"
  Method method = Method::sbl;
  SblConfig sbl;    // used by sbl, sbl1 and msbl
};

struct ExperimentConfig {
  ArrayGeometry geometry;
  AngularGrid grid = AngularGrid::range(-90.0, 0.5, 90.0);
  SourceScenario scenario;
  SimulationOptions simulation;
  std::vector<double> snr_grid_db{0.0};
  std::vector<int> snapshot_grid{50};
  int n_trials = 100;
  std::vector<MethodSpec> methods;
  std::uint64_t base_seed = 1;
  std::string output_dir = "out";
  int threads = 1;
  bool record_timing = true;
  std::optional<AngularGrid> exhaustive_grid;  // defaults to grid
  std::uint64_t exhaustive_budget = 20'000'000;
  std::string source_text;  // the exact text this config was parsed from

  int k_sources() const { return static_cast<int>(scenario.n_sources()); }
  void validate() const;
};

// Ordered key -> raw value map with line numbers for error messages.
class KeyValueText {
 public:
  static KeyValueText parse(const std::string& text);

  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

std::vector<std::string> split_list(const std::string& value);
AngularGrid parse_grid(const std::string& spec);
MethodSpec parse_method_spec(const std::string& token, const SblConfig& defaults);

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

// The setup of the simulation study: N=20 half-wavelength ULA, 0.5 deg grid,
// sources at -3, 2, 75 deg with magnitudes 12, 22, 20 dB, L=50.
ExperimentConfig reference_scenario();

}  // namespace sbldoa
