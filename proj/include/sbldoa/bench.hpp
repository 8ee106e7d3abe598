#pragma once

// Monte Carlo harness: every configured method sees the same realization per
// (SNR, L, trial); the realization is drawn from a stream addressed by those
// three indices and the base seed.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbldoa/config.hpp"

namespace sbldoa {

struct SblTraces {
  std::vector<double> epsilon;
  std::vector<double> sigma2;
  std::vector<double> evidence;
  std::map<int, RVector> gamma_snapshots;
};

struct TrialRecord {
  int trial = 0;
  std::size_t method_index = 0;
  std::string method;
  std::size_t snr_index = 0;
  double snr_db = 0.0;
  std::size_t snapshots_index = 0;
  int n_snapshots = 0;
  std::vector<double> doa_true_deg;
  std::vector<double> doa_est_deg;   // NaN when the estimator failed
  double rmse_deg = 0.0;
  int iterations = 0;
  bool converged = true;
  double sigma2_hat = 0.0;           // NaN when the method has no noise estimate
  double sigma2_true = 0.0;
  double wall_time_s = 0.0;
  std::string error;                 // empty on success
  std::optional<SblTraces> traces;

  bool failed() const { return !error.empty(); }
};

struct RmseSummary {
  std::string method;
  double snr_db = 0.0;
  int n_snapshots = 0;
  int n_trials = 0;
  int n_failed = 0;
  double mean_rmse_deg = 0.0;
  double mean_iterations = 0.0;
  double mean_wall_time_s = 0.0;
};

struct HistogramCell {
  std::string method;
  double snr_db = 0.0;
  int n_snapshots = 0;
  double angle_deg = 0.0;
  int count = 0;
};

struct TimingSummary {
  std::string method;
  int n_snapshots = 0;
  int n_runs = 0;
  double mean_wall_time_s = 0.0;
  double mean_iterations = 0.0;
};

// Smallest RMS error over all pairings of estimates with true angles.
double rmse(const std::vector<double>& estimated, const std::vector<double>& truth);

struct RunOptions {
  int threads = 1;
  bool keep_traces = false;
};

std::vector<TrialRecord> run_monte_carlo(const ExperimentConfig& config,
                                         const RunOptions& options = {});

// Means over the successful trials of each (method, SNR, L) cell, accumulated
// in trial order.
std::vector<RmseSummary> summarize(const std::vector<TrialRecord>& records);

// Counts of estimated DOAs per grid cell (nearest grid point), per
// (method, SNR, L). Only nonzero cells are listed.
std::vector<HistogramCell> histogram(const std::vector<TrialRecord>& records,
                                     const AngularGrid& grid);

// SBL-family methods only, with traces and any requested gamma snapshots.
std::vector<TrialRecord> convergence_study(const ExperimentConfig& config, int threads = 1);

std::vector<TimingSummary> timing_study(const ExperimentConfig& config, int threads = 1);
std::vector<TimingSummary> summarize_timing(const std::vector<TrialRecord>& records);

// Writes trials.csv, rmse_summary.csv, histogram.csv, convergence.jsonl and
// config_echo into output_dir (created if missing).
void emit(const std::vector<TrialRecord>& records, const std::vector<RmseSummary>& summaries,
          const std::vector<HistogramCell>& cells, const std::string& config_text,
          const std::filesystem::path& output_dir);

std::string trials_csv(const std::vector<TrialRecord>& records);
std::string rmse_summary_csv(const std::vector<RmseSummary>& summaries);
std::string histogram_csv(const std::vector<HistogramCell>& cells);
std::string convergence_jsonl(const std::vector<TrialRecord>& records);

// Parses trials.csv back into records (traces and error text are not stored).
std::vector<TrialRecord> parse_trials_csv(const std::string& text);

}  // namespace sbldoa
