#include "sbldoa/array_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "sbldoa/errors.hpp"
#include "sbldoa/rng.hpp"

namespace sbldoa {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void require_angle(double theta_deg) {
  if (!(theta_deg >= -90.0 && theta_deg <= 90.0))
    throw DomainError("angle " + std::to_string(theta_deg) +
                      " deg outside [-90, 90]");
}

}  // namespace

void ArrayGeometry::validate() const {
  if (n_sensors < 2) throw DomainError("array needs at least 2 sensors");
  if (!(spacing_wavelengths > 0.0) || !std::isfinite(spacing_wavelengths))
    throw DomainError("element spacing must be positive");
}

AngularGrid::AngularGrid(std::vector<double> angles_deg) : angles_(std::move(angles_deg)) {
  if (angles_.size() < 2) throw DomainError("angular grid needs at least 2 points");
  for (std::size_t i = 0; i < angles_.size(); ++i) {
    require_angle(angles_[i]);
    if (i > 0 && !(angles_[i] > angles_[i - 1]))
      throw DomainError("angular grid must be strictly increasing");
  }
}

AngularGrid AngularGrid::range(double start_deg, double step_deg, double stop_deg) {
  if (!(step_deg > 0.0) || !(stop_deg > start_deg))
    throw DomainError("grid range needs step > 0 and stop > start");
  const auto count =
      static_cast<std::size_t>(std::llround((stop_deg - start_deg) / step_deg)) + 1;
  std::vector<double> angles(count);
  for (std::size_t i = 0; i < count; ++i)
    angles[i] = start_deg + static_cast<double>(i) * step_deg;
  angles.back() = std::min(angles.back(), 90.0);
  return AngularGrid(std::move(angles));
}

std::optional<std::size_t> AngularGrid::find(double angle_deg, double tol_deg) const {
  const std::size_t i = nearest(angle_deg);
  if (std::abs(angles_[i] - angle_deg) <= tol_deg) return i;
  return std::nullopt;
}

std::size_t AngularGrid::nearest(double angle_deg) const {
  auto it = std::lower_bound(angles_.begin(), angles_.end(), angle_deg);
  if (it == angles_.end()) return angles_.size() - 1;
  std::size_t hi = static_cast<std::size_t>(it - angles_.begin());
  if (hi == 0) return 0;
  // ties go to the lower index
  return (angle_deg - angles_[hi - 1] <= angles_[hi] - angle_deg) ? hi - 1 : hi;
}

AmplitudeModel parse_amplitude_model(std::string_view name) {
  if (name == "constant_phase") return AmplitudeModel::constant_phase;
  if (name == "random_phase_per_snapshot" || name == "random_phase")
    return AmplitudeModel::random_phase_per_snapshot;
  throw DomainError("unknown amplitude model '" + std::string(name) + "'");
}

std::string_view to_string(AmplitudeModel model) {
  return model == AmplitudeModel::constant_phase ? "constant_phase"
                                                 : "random_phase_per_snapshot";
}

void SourceScenario::validate() const {
  if (doas_deg.empty()) throw DomainError("scenario needs at least one source");
  if (doas_deg.size() != magnitudes_db.size())
    throw DomainError("scenario DOA and magnitude lists differ in length");
  for (double doa : doas_deg) require_angle(doa);
  for (double mag : magnitudes_db)
    if (!std::isfinite(mag)) throw DomainError("source magnitude must be finite");
}

CVector steering_vector(const ArrayGeometry& geometry, double theta_deg) {
  geometry.validate();
  require_angle(theta_deg);
  const double phase_step =
      -2.0 * std::numbers::pi * geometry.spacing_wavelengths * std::sin(theta_deg * kDegToRad);
  CVector a(geometry.n_sensors);
  for (int n = 0; n < geometry.n_sensors; ++n) a(n) = std::polar(1.0, n * phase_step);
  return a;
}

SteeringMatrix build_transfer_matrix(const ArrayGeometry& geometry, const AngularGrid& grid) {
  geometry.validate();
  SteeringMatrix A{CMatrix(geometry.n_sensors, static_cast<Eigen::Index>(grid.size()))};
  for (std::size_t m = 0; m < grid.size(); ++m)
    A.entries.col(static_cast<Eigen::Index>(m)) = steering_vector(geometry, grid[m]);
  return A;
}

SimulatedData simulate_snapshots(const SourceScenario& scenario, const ArrayGeometry& geometry,
                                 const AngularGrid& grid, double snr_db, int n_snapshots,
                                 std::uint64_t seed, const SimulationOptions& options) {
  scenario.validate();
  geometry.validate();
  if (n_snapshots < 1) throw DomainError("need at least one snapshot");
  if (std::isnan(snr_db) || snr_db == -INFINITY) throw DomainError("SNR must be a number or +inf");

  SimulatedData out;
  const auto M = static_cast<Eigen::Index>(grid.size());
  const Eigen::Index N = geometry.n_sensors;
  const Eigen::Index L = n_snapshots;

  for (double doa : scenario.doas_deg) {
    std::size_t idx;
    if (auto hit = grid.find(doa)) {
      idx = *hit;
    } else if (options.snap_to_grid) {
      idx = grid.nearest(doa);
    } else {
      throw DomainError("source DOA " + std::to_string(doa) +
                        " deg is not on the grid (enable snap_to_grid)");
    }
    out.source_indices.push_back(idx);
    out.snap_offsets_deg.push_back(grid[idx] - doa);
  }

  StreamEngine rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  out.sources = CMatrix::Zero(M, L);
  for (std::size_t k = 0; k < scenario.n_sources(); ++k) {
    const double modulus = std::pow(10.0, scenario.magnitudes_db[k] / 20.0);
    const auto row = static_cast<Eigen::Index>(out.source_indices[k]);
    for (Eigen::Index l = 0; l < L; ++l) {
      const double ph =
          scenario.amplitude_model == AmplitudeModel::constant_phase ? 0.0 : phase(rng);
      out.sources(row, l) += std::polar(modulus, ph);
    }
  }

  // Only the active columns contribute to A X.
  CMatrix signal = CMatrix::Zero(N, L);
  for (std::size_t k = 0; k < scenario.n_sources(); ++k) {
    const auto m = static_cast<Eigen::Index>(out.source_indices[k]);
    if (k > 0 && std::find(out.source_indices.begin(), out.source_indices.begin() + k,
                           out.source_indices[k]) != out.source_indices.begin() + k)
      continue;
    const CVector a = steering_vector(geometry, grid[out.source_indices[k]]);
    signal += a * out.sources.row(m);
  }

  out.snapshots = signal;
  if (std::isinf(snr_db)) {
    out.sigma2_true = 0.0;
    return out;
  }

  out.sigma2_true = std::pow(10.0, -snr_db / 10.0) * signal.squaredNorm() /
                    static_cast<double>(L * N);
  std::normal_distribution<double> gauss(0.0, std::sqrt(out.sigma2_true / 2.0));
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index n = 0; n < N; ++n) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      out.snapshots(n, l) += cdouble(re, im);
    }
  return out;
}

CMatrix sample_covariance(const CMatrix& snapshots) {
  if (snapshots.cols() < 1) throw DomainError("sample covariance needs at least one snapshot");
  const CMatrix s = snapshots * snapshots.adjoint() / static_cast<double>(snapshots.cols());
  return hermitian_part(s);
}

}  // namespace sbldoa
