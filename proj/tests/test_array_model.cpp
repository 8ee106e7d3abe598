#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sbldoa/array_model.hpp"
#include "sbldoa/errors.hpp"
#include "sbldoa/rng.hpp"

using namespace sbldoa;

namespace {

SourceScenario reference_sources() {
  return SourceScenario{{-3.0, 2.0, 75.0}, {12.0, 22.0, 20.0},
                        AmplitudeModel::random_phase_per_snapshot};
}

const ArrayGeometry kUla20{20, 0.5};

}  // namespace

TEST_CASE("steering vector at broadside is all ones") {
  const CVector a = steering_vector(ArrayGeometry{4, 0.5}, 0.0);
  for (Eigen::Index n = 0; n < 4; ++n) CHECK(std::abs(a(n) - cdouble(1.0, 0.0)) < 1e-15);
}

TEST_CASE("steering vector at endfire alternates sign") {
  const CVector a = steering_vector(ArrayGeometry{2, 0.5}, 90.0);
  CHECK(std::abs(a(0) - cdouble(1.0, 0.0)) < 1e-15);
  CHECK(std::abs(a(1) - cdouble(-1.0, 0.0)) < 1e-12);
}

TEST_CASE("steering vector at 30 degrees steps the phase by -pi/2") {
  const CVector a = steering_vector(kUla20, 30.0);
  // sin 30 = 1/2, so element n is exp(-j n pi / 2): 1, -j, -1, j, ...
  const cdouble cycle[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  for (Eigen::Index n = 0; n < 20; ++n) CHECK(std::abs(a(n) - cycle[n % 4]) < 1e-12);
  CHECK(std::abs(a.squaredNorm() - 20.0) < 1e-12);
}

TEST_CASE("steering vector rejects angles outside [-90, 90]") {
  CHECK_THROWS_AS(steering_vector(kUla20, 90.5), DomainError);
  CHECK_THROWS_AS(steering_vector(kUla20, -91.0), DomainError);
  CHECK_THROWS_AS(steering_vector(kUla20, std::nan("")), DomainError);
}

TEST_CASE("geometry validation") {
  CHECK_THROWS_AS(ArrayGeometry({1, 0.5}).validate(), DomainError);
  CHECK_THROWS_AS(ArrayGeometry({4, 0.0}).validate(), DomainError);
  CHECK_NOTHROW(ArrayGeometry({2, 0.25}).validate());
}

TEST_CASE("grid construction") {
  const AngularGrid g = AngularGrid::range(-90.0, 0.5, 90.0);
  CHECK(g.size() == 361);
  CHECK(g[0] == -90.0);
  CHECK(g[180] == 0.0);
  CHECK(g[360] == 90.0);
  CHECK(g.find(-3.0) == std::optional<std::size_t>(174));
  CHECK(g.find(2.0) == std::optional<std::size_t>(184));
  CHECK(g.find(75.0) == std::optional<std::size_t>(330));
  CHECK_FALSE(g.find(2.25).has_value());
  CHECK(g.nearest(2.25) == 184);  // tie goes low
  CHECK(g.nearest(2.3) == 185);
  CHECK(g.nearest(-100.0) == 0);

  CHECK_THROWS_AS(AngularGrid({0.0}), DomainError);
  CHECK_THROWS_AS(AngularGrid({0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(AngularGrid({1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(AngularGrid({0.0, 91.0}), DomainError);
}

TEST_CASE("transfer matrix") {
  SUBCASE("two sensors, single broadside column") {
    const SteeringMatrix A = build_transfer_matrix(ArrayGeometry{2, 0.5}, AngularGrid({0.0, 10.0}));
    CHECK(A.n_sensors() == 2);
    CHECK(std::abs(A.entries(0, 0) - 1.0) < 1e-15);
    CHECK(std::abs(A.entries(1, 0) - 1.0) < 1e-15);
  }
  SUBCASE("reference dictionary invariants") {
    const AngularGrid grid = AngularGrid::range(-90.0, 0.5, 90.0);
    const SteeringMatrix A = build_transfer_matrix(kUla20, grid);
    REQUIRE(A.n_sensors() == 20);
    REQUIRE(A.n_angles() == 361);
    double worst_modulus = 0.0, worst_norm = 0.0, worst_conj = 0.0;
    for (Eigen::Index m = 0; m < 361; ++m) {
      for (Eigen::Index n = 0; n < 20; ++n)
        worst_modulus = std::max(worst_modulus, std::abs(std::abs(A.entries(n, m)) - 1.0));
      worst_norm = std::max(worst_norm, std::abs(A.column(m).squaredNorm() - 20.0));
      // grid is symmetric: column 360 - m is the angle -theta_m
      worst_conj = std::max(worst_conj,
                            (A.column(360 - m) - A.column(m).conjugate()).cwiseAbs().maxCoeff());
      CHECK((A.column(m) - steering_vector(kUla20, grid[static_cast<std::size_t>(m)])).norm() == 0.0);
    }
    CHECK(worst_modulus < 1e-12);
    CHECK(worst_norm < 1e-10 * 20);
    CHECK(worst_conj < 1e-12);
  }
}

TEST_CASE("noiseless simulation reproduces A X exactly") {
  const AngularGrid grid = AngularGrid::range(-90.0, 0.5, 90.0);
  const SimulatedData d =
      simulate_snapshots(reference_sources(), kUla20, grid, INFINITY, 7, 11);
  const CMatrix A = build_transfer_matrix(kUla20, grid).entries;
  CHECK(d.sigma2_true == 0.0);
  CHECK((d.snapshots - A * d.sources).norm() < 1e-10);
  // nonzero rows exactly at the sources
  for (Eigen::Index m = 0; m < d.sources.rows(); ++m) {
    const bool active = m == 174 || m == 184 || m == 330;
    CHECK((d.sources.row(m).norm() > 0.0) == active);
  }
  // fixed modulus per source
  for (Eigen::Index l = 0; l < 7; ++l) {
    CHECK(std::abs(std::abs(d.sources(174, l)) - std::pow(10.0, 12.0 / 20.0)) < 1e-12);
    CHECK(std::abs(std::abs(d.sources(184, l)) - std::pow(10.0, 22.0 / 20.0)) < 1e-12);
  }
}

TEST_CASE("constant phase model has zero-phase amplitudes") {
  SourceScenario s{{10.0}, {6.0}, AmplitudeModel::constant_phase};
  const AngularGrid grid = AngularGrid::range(-90.0, 1.0, 90.0);
  const SimulatedData d = simulate_snapshots(s, kUla20, grid, INFINITY, 5, 3);
  const auto row = static_cast<Eigen::Index>(*grid.find(10.0));
  for (Eigen::Index l = 0; l < 5; ++l) {
    CHECK(d.sources(row, l).imag() == 0.0);
    CHECK(std::abs(d.sources(row, l).real() - std::pow(10.0, 6.0 / 20.0)) < 1e-12);
  }
}

TEST_CASE("unit source at 0 dB SNR gives unit noise variance") {
  // ||a_m||^2 = N, so ||A X||_F^2 / L = N and sigma2 = 1.
  SourceScenario s{{20.0}, {0.0}, AmplitudeModel::random_phase_per_snapshot};
  const AngularGrid grid = AngularGrid::range(-90.0, 0.5, 90.0);
  for (int L : {1, 3, 50}) {
    const SimulatedData d = simulate_snapshots(s, kUla20, grid, 0.0, L, 99);
    CHECK(std::abs(d.sigma2_true - 1.0) < 1e-12);
  }
}

TEST_CASE("realized SNR equals the requested SNR") {
  const AngularGrid grid = AngularGrid::range(-90.0, 0.5, 90.0);
  const CMatrix A = build_transfer_matrix(kUla20, grid).entries;
  for (double snr : {-10.0, 0.0, 5.0, 17.5}) {
    const SimulatedData d = simulate_snapshots(reference_sources(), kUla20, grid, snr, 50, 5);
    const double signal = (A * d.sources).squaredNorm();
    const double realized = 10.0 * std::log10(signal / (50.0 * 20.0 * d.sigma2_true));
    CHECK(std::abs(realized - snr) < 1e-10);
  }
}

TEST_CASE("noise is circular Gaussian with the calibrated variance") {
  const AngularGrid grid = AngularGrid::range(-90.0, 0.5, 90.0);
  const CMatrix A = build_transfer_matrix(kUla20, grid).entries;
  const int L = 5000;  // 20 x 5000 = 1e5 complex scalars
  const SimulatedData d = simulate_snapshots(reference_sources(), kUla20, grid, 3.0, L, 2024);
  const CMatrix noise = d.snapshots - A * d.sources;
  const double n = static_cast<double>(noise.size());
  const cdouble mean = noise.sum() / n;
  double var_re = 0.0, var_im = 0.0;
  for (Eigen::Index i = 0; i < noise.size(); ++i) {
    var_re += std::pow(noise(i).real() - mean.real(), 2);
    var_im += std::pow(noise(i).imag() - mean.imag(), 2);
  }
  var_re /= n - 1;
  var_im /= n - 1;
  const double half = d.sigma2_true / 2.0;
  CHECK(std::abs(var_re - half) < 0.03 * half);
  CHECK(std::abs(var_im - half) < 0.03 * half);
}

TEST_CASE("simulation is reproducible from the seed") {
  const AngularGrid grid = AngularGrid::range(-90.0, 0.5, 90.0);
  const auto a = simulate_snapshots(reference_sources(), kUla20, grid, 0.0, 10, 42);
  const auto b = simulate_snapshots(reference_sources(), kUla20, grid, 0.0, 10, 42);
  const auto c = simulate_snapshots(reference_sources(), kUla20, grid, 0.0, 10, 43);
  CHECK((a.snapshots - b.snapshots).norm() == 0.0);
  CHECK((a.snapshots - c.snapshots).norm() > 0.0);
}

TEST_CASE("off-grid sources") {
  const AngularGrid grid = AngularGrid::range(-90.0, 1.0, 90.0);
  SourceScenario s{{10.3}, {0.0}, AmplitudeModel::random_phase_per_snapshot};
  CHECK_THROWS_AS(simulate_snapshots(s, kUla20, grid, 0.0, 4, 1), DomainError);
  const auto d = simulate_snapshots(s, kUla20, grid, 0.0, 4, 1, SimulationOptions{true});
  REQUIRE(d.source_indices.size() == 1);
  CHECK(grid[d.source_indices[0]] == 10.0);
  CHECK(std::abs(d.snap_offsets_deg[0] - (-0.3)) < 1e-12);
}

TEST_CASE("scenario validation") {
  const AngularGrid grid = AngularGrid::range(-90.0, 1.0, 90.0);
  CHECK_THROWS_AS(simulate_snapshots(SourceScenario{{}, {}}, kUla20, grid, 0.0, 4, 1), DomainError);
  CHECK_THROWS_AS(simulate_snapshots(SourceScenario{{1.0}, {1.0, 2.0}}, kUla20, grid, 0.0, 4, 1),
                  DomainError);
  CHECK_THROWS_AS(simulate_snapshots(SourceScenario{{1.0}, {1.0}}, kUla20, grid, 0.0, 0, 1),
                  DomainError);
}

TEST_CASE("sample covariance") {
  SUBCASE("single snapshot is the outer product") {
    CMatrix y(3, 1);
    y << cdouble(1, 2), cdouble(-1, 0.5), cdouble(0, -3);
    CHECK((sample_covariance(y) - y * y.adjoint()).norm() < 1e-14);
  }
  SUBCASE("brute-force accumulation over snapshots") {
    StreamEngine rng(5);
    std::normal_distribution<double> g;
    CMatrix Y(4, 100);
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) = cdouble(g(rng), g(rng));
    const CMatrix S = sample_covariance(Y);
    CMatrix brute = CMatrix::Zero(4, 4);
    for (int l = 0; l < 100; ++l)
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) brute(r, c) += Y(r, l) * std::conj(Y(c, l));
    brute /= 100.0;
    CHECK((S - brute).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(S.trace().real() - Y.squaredNorm() / 100.0) < 1e-12);
    CHECK((S - S.adjoint()).norm() == 0.0);
    const Eigen::SelfAdjointEigenSolver<CMatrix> eig(S);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12 * S.trace().real());
  }
}

TEST_CASE("stream seeds are distinct per index tuple") {
  CHECK(stream_seed(1, {0, 0, 0}) != stream_seed(1, {0, 0, 1}));
  CHECK(stream_seed(1, {0, 1, 0}) != stream_seed(1, {1, 0, 0}));
  CHECK(stream_seed(1, {2, 3, 4}) == stream_seed(1, {2, 3, 4}));
  CHECK(stream_seed(1, {2, 3, 4}) != stream_seed(2, {2, 3, 4}));
}
