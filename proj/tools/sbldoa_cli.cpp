// sbldoa: simulate array data, run one DOA estimator, or run the Monte Carlo
// benchmark / convergence study from a key-value config.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sbldoa/bench.hpp"
#include "sbldoa/config.hpp"
#include "sbldoa/errors.hpp"
#include "sbldoa/io.hpp"
#include "sbldoa/rng.hpp"

namespace fs = std::filesystem;
using namespace sbldoa;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

ExperimentConfig load(const CommonFlags& f) {
  ExperimentConfig cfg = load_experiment_config(f.config);
  if (f.seed) cfg.base_seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (f.out) cfg.output_dir = *f.out;
  return cfg;
}

void report_failures(const std::vector<TrialRecord>& records) {
  std::size_t failed = 0;
  for (const auto& r : records)
    if (r.failed()) {
      if (failed < 5)
        std::cerr << "trial " << r.trial << " " << r.method << " failed: " << r.error << "\n";
      ++failed;
    }
  if (failed > 0) std::cerr << failed << " estimator runs failed\n";
}

int cmd_simulate(const CommonFlags& f, std::optional<double> snr, std::optional<int> snapshots,
                 std::uint64_t trial) {
  const ExperimentConfig cfg = load(f);
  const double snr_db = snr.value_or(cfg.snr_grid_db.front());
  const int L = snapshots.value_or(cfg.snapshot_grid.front());
  const SimulatedData data = simulate_snapshots(cfg.scenario, cfg.geometry, cfg.grid, snr_db, L,
                                                stream_seed(cfg.base_seed, {0, 0, trial}),
                                                cfg.simulation);
  fs::create_directories(cfg.output_dir);
  const fs::path path = fs::path(cfg.output_dir) / "snapshots.txt";
  write_snapshot_file(path, SnapshotFile{cfg.geometry, cfg.grid, data.snapshots});
  std::cout << path.string() << "\nsigma2_true " << data.sigma2_true << "\n";
  return 0;
}

int cmd_estimate(const CommonFlags& f, const std::string& input, const std::string& method_name,
                 std::optional<int> k, std::optional<std::string> spectrum_out) {
  const SnapshotFile file = read_snapshot_file(input);
  SblConfig sbl;
  if (!f.config.empty()) {
    const ExperimentConfig cfg = load_experiment_config(f.config);
    sbl = cfg.methods.front().sbl;
  }
  if (k) sbl.k_sources = *k;
  const MethodSpec spec = parse_method_spec(method_name, sbl);
  spec.sbl.validate(file.geometry.n_sensors);
  const int K = spec.sbl.k_sources;

  const CMatrix A = build_transfer_matrix(file.geometry, file.grid).entries;
  const CMatrix S_y = sample_covariance(file.snapshots);
  nlohmann::ordered_json j;
  j["method"] = spec.tag;
  switch (spec.method) {
    case Method::sbl:
    case Method::sbl1:
    case Method::msbl:
      j["result"] = to_json(run_sbl(spec.sbl, A, file.snapshots), file.grid);
      break;
    case Method::cbf: {
      const AngularSpectrum s = cbf_spectrum(S_y, A);
      j["result"] = to_json(pick_peaks(s, file.grid, K, Method::cbf));
      if (spectrum_out) std::ofstream(*spectrum_out) << spectrum_csv(s, file.grid);
      break;
    }
    case Method::music: {
      const MusicSpectrum s = music_spectrum(S_y, A, K);
      j["result"] = to_json(pick_peaks(s.spectrum, file.grid, K, Method::music));
      j["result"]["subspace_tie"] = s.subspace_tie;
      if (spectrum_out) std::ofstream(*spectrum_out) << spectrum_csv(s.spectrum, file.grid);
      break;
    }
    case Method::exhaustive:
      j["result"] = to_json(exhaustive_ml(S_y, A, file.grid, K,
                                          ExhaustiveOptions{20'000'000, f.threads.value_or(1)}));
      break;
  }
  const std::string text = j.dump(2) + "\n";
  if (f.out) {
    fs::create_directories(*f.out);
    std::ofstream(fs::path(*f.out) / "estimate.json") << text;
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_benchmark(const CommonFlags& f, bool traces) {
  const ExperimentConfig cfg = load(f);
  const auto records = run_monte_carlo(cfg, RunOptions{cfg.threads, traces});
  report_failures(records);
  const auto summaries = summarize(records);
  emit(records, summaries, histogram(records, cfg.grid), cfg.source_text, cfg.output_dir);
  std::cout << rmse_summary_csv(summaries);
  return 0;
}

int cmd_convergence(const CommonFlags& f) {
  const ExperimentConfig cfg = load(f);
  const auto records = convergence_study(cfg, cfg.threads);
  report_failures(records);
  emit(records, summarize(records), histogram(records, cfg.grid), cfg.source_text,
       cfg.output_dir);
  std::cout << rmse_summary_csv(summarize(records));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse Bayesian learning DOA estimation and benchmarks"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", flags.config, "key = value experiment config");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "base seed (overrides the config)");
    sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", flags.out, "output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "write one snapshot matrix to OUT/snapshots.txt");
  add_common(simulate, true);
  std::optional<double> snr;
  std::optional<int> snapshots;
  std::uint64_t trial = 0;
  simulate->add_option("--snr", snr, "array SNR in dB (default: first snr_db entry)");
  simulate->add_option("--snapshots", snapshots, "L (default: first snapshots entry)");
  simulate->add_option("--trial", trial, "trial index of the random stream");

  auto* estimate = app.add_subcommand("estimate", "run one method on a snapshot file");
  add_common(estimate, false);
  std::string input;
  std::string method = "sbl";
  std::optional<int> k;
  std::optional<std::string> spectrum_out;
  estimate->add_option("--input", input, "snapshot file")->required()->check(CLI::ExistingFile);
  estimate->add_option("--method", method, "cbf, music, exhaustive, sbl, sbl1, msbl[:noise_rule]");
  estimate->add_option("-k,--sources", k, "number of sources K");
  estimate->add_option("--spectrum", spectrum_out, "write the CBF/MUSIC spectrum as CSV");

  auto* benchmark = app.add_subcommand("benchmark", "Monte Carlo RMSE / histogram / timing run");
  add_common(benchmark, true);
  bool traces = false;
  benchmark->add_flag("--traces", traces, "also write SBL convergence traces");

  auto* convergence = app.add_subcommand("convergence", "SBL convergence traces");
  add_common(convergence, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(flags, snr, snapshots, trial);
    if (*estimate) return cmd_estimate(flags, input, method, k, spectrum_out);
    if (*benchmark) return cmd_benchmark(flags, traces);
    if (*convergence) return cmd_convergence(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
