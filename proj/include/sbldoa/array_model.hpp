#pragma once

// Uniform linear array model: geometry, DOA grid, steering dictionary,
// synthetic multi-snapshot data with calibrated array SNR, sample covariance.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "sbldoa/linalg.hpp"

namespace sbldoa {

struct ArrayGeometry {
  int n_sensors = 20;
  double spacing_wavelengths = 0.5;  // d / lambda

  // Throws DomainError unless n_sensors >= 2 and spacing > 0.
  void validate() const;
};

// Strictly increasing list of candidate DOAs in degrees, all within [-90, 90].
class AngularGrid {
 public:
  explicit AngularGrid(std::vector<double> angles_deg);

  // start, start+step, ..., stop. The count is rounded so that
  // range(-90, 0.5, 90) has exactly 361 points with exact endpoints.
  static AngularGrid range(double start_deg, double step_deg, double stop_deg);

  std::size_t size() const { return angles_.size(); }
  double operator[](std::size_t i) const { return angles_[i]; }
  const std::vector<double>& angles() const { return angles_; }

  // Index of the grid point within tol_deg of angle_deg, if any.
  std::optional<std::size_t> find(double angle_deg, double tol_deg = 1e-9) const;
  // Index of the closest grid point.
  std::size_t nearest(double angle_deg) const;

 private:
  std::vector<double> angles_;
};

// Complex N x M dictionary whose column m is the steering vector of grid
// angle m.
struct SteeringMatrix {
  CMatrix entries;

  Eigen::Index n_sensors() const { return entries.rows(); }
  Eigen::Index n_angles() const { return entries.cols(); }
  auto column(Eigen::Index m) const { return entries.col(m); }
};

enum class AmplitudeModel { constant_phase, random_phase_per_snapshot };

AmplitudeModel parse_amplitude_model(std::string_view name);
std::string_view to_string(AmplitudeModel model);

struct SourceScenario {
  std::vector<double> doas_deg;
  std::vector<double> magnitudes_db;  // 20 log10 |x|
  AmplitudeModel amplitude_model = AmplitudeModel::random_phase_per_snapshot;

  std::size_t n_sources() const { return doas_deg.size(); }
  void validate() const;
};

struct SimulationOptions {
  // Move off-grid sources to the nearest grid point instead of rejecting them.
  bool snap_to_grid = false;
};

struct SimulatedData {
  CMatrix snapshots;               // Y, N x L
  CMatrix sources;                 // X_true, M x L
  double sigma2_true = 0.0;        // noise variance actually used
  std::vector<std::size_t> source_indices;  // grid index of each source
  std::vector<double> snap_offsets_deg;     // grid angle - requested angle
};

// Element n (0-based) is exp(-j n 2 pi (d/lambda) sin(theta)).
CVector steering_vector(const ArrayGeometry& geometry, double theta_deg);

SteeringMatrix build_transfer_matrix(const ArrayGeometry& geometry,
                                     const AngularGrid& grid);

// Y = A X + noise. The noise variance is chosen so that
// 10 log10(||A X||_F^2 / (L N sigma2)) == snr_db for this realization.
// snr_db = +inf disables the noise. The same seed always yields the same data.
SimulatedData simulate_snapshots(const SourceScenario& scenario,
                                 const ArrayGeometry& geometry,
                                 const AngularGrid& grid, double snr_db,
                                 int n_snapshots, std::uint64_t seed,
                                 const SimulationOptions& options = {});

// S_y = Y Y^H / L, Hermitian-symmetrized.
CMatrix sample_covariance(const CMatrix& snapshots);

}  // namespace sbldoa
