#include "sbldoa/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sbldoa/errors.hpp"
#include "sbldoa/rng.hpp"

namespace sbldoa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_sbl_family(Method m) {
  return m == Method::sbl || m == Method::sbl1 || m == Method::msbl;
}

struct Dictionaries {
  const CMatrix& A;
  const AngularGrid& grid;
  const CMatrix* A_exhaustive = nullptr;
  const AngularGrid* grid_exhaustive = nullptr;
  std::uint64_t exhaustive_budget = 0;
};

struct Outcome {
  std::vector<double> angles;
  int iterations = 0;
  bool converged = true;
  double sigma2_hat = kNaN;
  std::optional<SblTraces> traces;
};

Outcome run_method(const MethodSpec& spec, const Dictionaries& dict, const CMatrix& Y, int k,
                   bool keep_traces) {
  Outcome out;
  if (is_sbl_family(spec.method)) {
    SblResult r = run_sbl(spec.sbl, dict.A, Y);
    for (std::size_t idx : r.active_set) out.angles.push_back(dict.grid[idx]);
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.sigma2_hat = r.sigma2;
    if (keep_traces)
      out.traces = SblTraces{std::move(r.epsilon_trace), std::move(r.sigma2_trace),
                             std::move(r.evidence_trace), std::move(r.gamma_snapshots)};
    return out;
  }

  const CMatrix S_y = sample_covariance(Y);
  switch (spec.method) {
    case Method::cbf:
      out.angles = pick_peaks(cbf_spectrum(S_y, dict.A), dict.grid, k, Method::cbf).angles_deg;
      break;
    case Method::music: {
      const MusicSpectrum ms = music_spectrum(S_y, dict.A, k);
      out.angles = pick_peaks(ms.spectrum, dict.grid, k, Method::music).angles_deg;
      out.sigma2_hat = ms.noise_eigenvalue_mean;
      break;
    }
    case Method::exhaustive: {
      const DoaEstimate est = exhaustive_ml(S_y, *dict.A_exhaustive, *dict.grid_exhaustive, k,
                                            ExhaustiveOptions{dict.exhaustive_budget, 1});
      out.angles = est.angles_deg;
      out.sigma2_hat =
          noise_update_projection(S_y, active_columns(*dict.A_exhaustive, est.indices));
      break;
    }
    default: break;
  }
  return out;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

template <typename Key, typename Value>
Value& slot(std::vector<std::pair<Key, Value>>& groups, const Key& key) {
  for (auto& [k, v] : groups)
    if (k == key) return v;
  groups.emplace_back(key, Value{});
  return groups.back().second;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

double rmse(const std::vector<double>& estimated, const std::vector<double>& truth) {
  if (estimated.size() != truth.size())
    throw DomainError("rmse needs as many estimates as true angles");
  if (truth.empty()) throw DomainError("rmse of an empty set");
  // For a convex cost on the line the sorted pairing is an optimal assignment.
  std::vector<double> a(estimated), b(truth);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

std::vector<TrialRecord> run_monte_carlo(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const CMatrix A = build_transfer_matrix(config.geometry, config.grid).entries;
  const bool any_exhaustive =
      std::any_of(config.methods.begin(), config.methods.end(),
                  [](const MethodSpec& m) { return m.method == Method::exhaustive; });
  const AngularGrid& grid_ex = config.exhaustive_grid ? *config.exhaustive_grid : config.grid;
  CMatrix A_ex;
  if (any_exhaustive) A_ex = build_transfer_matrix(config.geometry, grid_ex).entries;
  const Dictionaries dict{A, config.grid, any_exhaustive ? &A_ex : nullptr, &grid_ex,
                          config.exhaustive_budget};

  const int k = config.k_sources();
  const std::size_t n_snr = config.snr_grid_db.size();
  const std::size_t n_len = config.snapshot_grid.size();
  const auto n_trials = static_cast<std::size_t>(config.n_trials);
  const std::size_t n_tasks = n_snr * n_len * n_trials;

  std::vector<std::vector<TrialRecord>> slots(n_tasks);
  auto run_task = [&](std::size_t task) {
    const std::size_t trial = task % n_trials;
    const std::size_t len_i = (task / n_trials) % n_len;
    const std::size_t snr_i = task / (n_trials * n_len);
    const double snr = config.snr_grid_db[snr_i];
    const int L = config.snapshot_grid[len_i];
    const std::uint64_t seed = stream_seed(config.base_seed, {snr_i, len_i, trial});
    const SimulatedData data = simulate_snapshots(config.scenario, config.geometry, config.grid,
                                                  snr, L, seed, config.simulation);

    auto& out = slots[task];
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const MethodSpec& spec = config.methods[mi];
      TrialRecord rec;
      rec.trial = static_cast<int>(trial);
      rec.method_index = mi;
      rec.method = spec.tag;
      rec.snr_index = snr_i;
      rec.snr_db = snr;
      rec.snapshots_index = len_i;
      rec.n_snapshots = L;
      rec.doa_true_deg = config.scenario.doas_deg;
      rec.sigma2_true = data.sigma2_true;

      const auto t0 = std::chrono::steady_clock::now();
      try {
        Outcome o = run_method(spec, dict, data.snapshots, k, options.keep_traces);
        const auto t1 = std::chrono::steady_clock::now();
        rec.wall_time_s =
            config.record_timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
        rec.doa_est_deg = std::move(o.angles);
        rec.rmse_deg = rmse(rec.doa_est_deg, rec.doa_true_deg);
        rec.iterations = o.iterations;
        rec.converged = o.converged;
        rec.sigma2_hat = o.sigma2_hat;
        rec.traces = std::move(o.traces);
      } catch (const Error& e) {
        rec.error = e.what();
        rec.doa_est_deg.assign(static_cast<std::size_t>(k), kNaN);
        rec.rmse_deg = kNaN;
        rec.iterations = 0;
        rec.converged = false;
        rec.sigma2_hat = kNaN;
        rec.wall_time_s = 0.0;
      }
      out.push_back(std::move(rec));
    }
  };

  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (int i = 0; i < threads; ++i)
        pool.emplace_back([&] {
          for (std::size_t t; (t = next.fetch_add(1)) < n_tasks;) {
            try {
              run_task(t);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
              next = n_tasks;
            }
          }
        });
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<TrialRecord> records;
  records.reserve(n_tasks * config.methods.size());
  for (auto& s : slots)
    for (auto& r : s) records.push_back(std::move(r));
  return records;
}

std::vector<RmseSummary> summarize(const std::vector<TrialRecord>& records) {
  using Key = std::tuple<std::string, double, int>;
  std::vector<std::pair<Key, RmseSummary>> groups;
  for (const auto& r : records) {
    RmseSummary& s = slot(groups, Key{r.method, r.snr_db, r.n_snapshots});
    s.method = r.method;
    s.snr_db = r.snr_db;
    s.n_snapshots = r.n_snapshots;
    ++s.n_trials;
    if (r.failed()) {
      ++s.n_failed;
      continue;
    }
    s.mean_rmse_deg += r.rmse_deg;
    s.mean_iterations += r.iterations;
    s.mean_wall_time_s += r.wall_time_s;
  }
  std::vector<RmseSummary> out;
  for (auto& [key, s] : groups) {
    const int ok = s.n_trials - s.n_failed;
    if (ok > 0) {
      s.mean_rmse_deg /= ok;
      s.mean_iterations /= ok;
      s.mean_wall_time_s /= ok;
    } else {
      s.mean_rmse_deg = s.mean_iterations = s.mean_wall_time_s = kNaN;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<HistogramCell> histogram(const std::vector<TrialRecord>& records,
                                     const AngularGrid& grid) {
  using Key = std::tuple<std::string, double, int>;
  std::vector<std::pair<Key, std::vector<int>>> groups;
  for (const auto& r : records) {
    auto& counts = slot(groups, Key{r.method, r.snr_db, r.n_snapshots});
    if (counts.empty()) counts.assign(grid.size(), 0);
    if (r.failed()) continue;
    for (double angle : r.doa_est_deg) ++counts[grid.nearest(angle)];
  }
  std::vector<HistogramCell> out;
  for (const auto& [key, counts] : groups)
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (counts[i] > 0)
        out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), grid[i], counts[i]});
  return out;
}

std::vector<TrialRecord> convergence_study(const ExperimentConfig& config, int threads) {
  ExperimentConfig sbl_only = config;
  std::erase_if(sbl_only.methods, [](const MethodSpec& m) { return !is_sbl_family(m.method); });
  if (sbl_only.methods.empty())
    throw DomainError("convergence study needs at least one of sbl, sbl1, msbl");
  return run_monte_carlo(sbl_only, RunOptions{threads, true});
}

std::vector<TimingSummary> summarize_timing(const std::vector<TrialRecord>& records) {
  using Key = std::tuple<std::string, int>;
  std::vector<std::pair<Key, TimingSummary>> groups;
  for (const auto& r : records) {
    TimingSummary& s = slot(groups, Key{r.method, r.n_snapshots});
    s.method = r.method;
    s.n_snapshots = r.n_snapshots;
    if (r.failed()) continue;
    ++s.n_runs;
    s.mean_wall_time_s += r.wall_time_s;
    s.mean_iterations += r.iterations;
  }
  std::vector<TimingSummary> out;
  for (auto& [key, s] : groups) {
    if (s.n_runs > 0) {
      s.mean_wall_time_s /= s.n_runs;
      s.mean_iterations /= s.n_runs;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<TimingSummary> timing_study(const ExperimentConfig& config, int threads) {
  ExperimentConfig timed = config;
  timed.record_timing = true;
  return summarize_timing(run_monte_carlo(timed, RunOptions{threads, false}));
}

std::string trials_csv(const std::vector<TrialRecord>& records) {
  std::size_t k = records.empty() ? 0 : records.front().doa_true_deg.size();
  std::string out = "trial,method,snr_db,L,K";
  for (std::size_t i = 1; i <= k; ++i) out += fmt::format(",doa_true_{}", i);
  for (std::size_t i = 1; i <= k; ++i) out += fmt::format(",doa_est_{}", i);
  out += ",rmse_deg,iterations,converged,sigma2_hat,sigma2_true,wall_time_s\n";
  for (const auto& r : records) {
    if (r.doa_true_deg.size() != k || r.doa_est_deg.size() != k)
      throw DomainError("all trial records must carry the same number of sources");
    out += fmt::format("{},{},{},{},{}", r.trial, r.method, num(r.snr_db), r.n_snapshots, k);
    for (double v : r.doa_true_deg) out += "," + num(v);
    for (double v : r.doa_est_deg) out += "," + num(v);
    out += fmt::format(",{},{},{},{},{},{}\n", num(r.rmse_deg), r.iterations,
                       r.converged ? 1 : 0, num(r.sigma2_hat), num(r.sigma2_true),
                       num(r.wall_time_s));
  }
  return out;
}

std::string rmse_summary_csv(const std::vector<RmseSummary>& summaries) {
  std::string out =
      "method,snr_db,L,n_trials,n_failed,mean_rmse_deg,mean_iterations,mean_wall_time_s\n";
  for (const auto& s : summaries)
    out += fmt::format("{},{},{},{},{},{},{},{}\n", s.method, num(s.snr_db), s.n_snapshots,
                       s.n_trials, s.n_failed, num(s.mean_rmse_deg), num(s.mean_iterations),
                       num(s.mean_wall_time_s));
  return out;
}

std::string histogram_csv(const std::vector<HistogramCell>& cells) {
  std::string out = "method,snr_db,L,angle_deg,count\n";
  for (const auto& c : cells)
    out += fmt::format("{},{},{},{},{}\n", c.method, num(c.snr_db), c.n_snapshots,
                       num(c.angle_deg), c.count);
  return out;
}

std::string convergence_jsonl(const std::vector<TrialRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    if (!r.traces) continue;
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["snr_db"] = r.snr_db;
    j["L"] = r.n_snapshots;
    j["trial"] = r.trial;
    j["sigma2_true"] = r.sigma2_true;
    j["epsilon"] = r.traces->epsilon;
    std::vector<double> ratio;
    for (double s : r.traces->sigma2)
      ratio.push_back(r.sigma2_true > 0.0 ? s / r.sigma2_true : kNaN);
    j["sigma2_ratio"] = ratio;
    j["evidence"] = r.traces->evidence;
    nlohmann::ordered_json snaps = nlohmann::ordered_json::object();
    for (const auto& [iter, g] : r.traces->gamma_snapshots)
      snaps[std::to_string(iter)] = std::vector<double>(g.data(), g.data() + g.size());
    j["gamma_snapshots"] = snaps;
    out += j.dump() + "\n";
  }
  return out;
}

void emit(const std::vector<TrialRecord>& records, const std::vector<RmseSummary>& summaries,
          const std::vector<HistogramCell>& cells, const std::string& config_text,
          const std::filesystem::path& output_dir) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw Error("cannot create '" + output_dir.string() + "': " + ec.message());
  write_file(output_dir / "trials.csv", trials_csv(records));
  write_file(output_dir / "rmse_summary.csv", rmse_summary_csv(summaries));
  write_file(output_dir / "histogram.csv", histogram_csv(cells));
  write_file(output_dir / "convergence.jsonl", convergence_jsonl(records));
  write_file(output_dir / "config_echo", config_text);
}

std::vector<TrialRecord> parse_trials_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DomainError("trials.csv is empty");
  const std::vector<std::string> header = split_list(line);
  const auto k = static_cast<std::size_t>(
      std::count_if(header.begin(), header.end(),
                    [](const std::string& h) { return h.rfind("doa_true_", 0) == 0; }));
  const std::size_t n_cols = 5 + 2 * k + 6;
  if (header.size() != n_cols) throw DomainError("unexpected trials.csv header");

  auto to_d = [](const std::string& s) {
    return s == "nan" ? kNaN : std::stod(s);
  };
  std::vector<TrialRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string item;
    std::istringstream ls(line);
    while (std::getline(ls, item, ',')) f.push_back(item);
    if (f.size() != n_cols) throw DomainError("malformed trials.csv row: " + line);
    TrialRecord r;
    r.trial = std::stoi(f[0]);
    r.method = f[1];
    r.snr_db = to_d(f[2]);
    r.n_snapshots = std::stoi(f[3]);
    for (std::size_t i = 0; i < k; ++i) r.doa_true_deg.push_back(to_d(f[5 + i]));
    for (std::size_t i = 0; i < k; ++i) r.doa_est_deg.push_back(to_d(f[5 + k + i]));
    const std::size_t base = 5 + 2 * k;
    r.rmse_deg = to_d(f[base]);
    r.iterations = std::stoi(f[base + 1]);
    r.converged = f[base + 2] == "1";
    r.sigma2_hat = to_d(f[base + 3]);
    r.sigma2_true = to_d(f[base + 4]);
    r.wall_time_s = to_d(f[base + 5]);
    if (std::isnan(r.rmse_deg)) r.error = "failed";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sbldoa
