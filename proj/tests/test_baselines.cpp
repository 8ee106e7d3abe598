#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sbldoa/baselines.hpp"
#include "sbldoa/errors.hpp"
#include "sbldoa/rng.hpp"

using namespace sbldoa;

namespace {

CMatrix random_covariance(StreamEngine& rng, Eigen::Index n, Eigen::Index l) {
  std::normal_distribution<double> g;
  CMatrix y(n, l);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = cdouble(g(rng), g(rng));
  return sample_covariance(y);
}

// Every K-subset in lexicographic order, scored with projection_fit.
std::vector<std::size_t> brute_force(const CMatrix& S, const CMatrix& A, std::size_t k) {
  const auto m = static_cast<std::size_t>(A.cols());
  std::vector<std::size_t> subset(k), best;
  for (std::size_t i = 0; i < k; ++i) subset[i] = i;
  double best_value = -1.0;
  while (true) {
    CMatrix cols(A.rows(), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i)
      cols.col(static_cast<Eigen::Index>(i)) = A.col(static_cast<Eigen::Index>(subset[i]));
    const double v = projection_fit(S, cols);
    if (v > best_value) {
      best_value = v;
      best = subset;
    }
    std::size_t i = k;
    while (i-- > 0 && subset[i] == m - k + i) {}
    if (i == static_cast<std::size_t>(-1)) break;
    ++subset[i];
    for (std::size_t t = i + 1; t < k; ++t) subset[t] = subset[t - 1] + 1;
  }
  return best;
}

const ArrayGeometry kUla8{8, 0.5};

}  // namespace

TEST_CASE("CBF of a single plane wave peaks at unity") {
  const AngularGrid grid = AngularGrid::range(-90.0, 1.0, 90.0);
  const CMatrix A = build_transfer_matrix(kUla8, grid).entries;
  const CVector a = steering_vector(kUla8, 25.0);
  const AngularSpectrum s = cbf_spectrum(a * a.adjoint(), A);
  const auto peak = static_cast<std::size_t>(
      std::max_element(s.values.begin(), s.values.end()) - s.values.begin());
  CHECK(grid[peak] == 25.0);
  CHECK(s.values[peak] == doctest::Approx(1.0).epsilon(1e-12));
  // white input reads 1/N everywhere
  const AngularSpectrum w = cbf_spectrum(CMatrix::Identity(8, 8), A);
  for (double v : w.values) CHECK(v == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
}

TEST_CASE("CBF against the explicit quadratic form") {
  StreamEngine rng(1);
  const AngularGrid grid = AngularGrid::range(-90.0, 3.0, 90.0);
  const CMatrix A = build_transfer_matrix(kUla8, grid).entries;
  const CMatrix S = random_covariance(rng, 8, 20);
  const AngularSpectrum s = cbf_spectrum(S, A);
  for (Eigen::Index m = 0; m < A.cols(); ++m)
    CHECK(s.values[static_cast<std::size_t>(m)] ==
          doctest::Approx((A.col(m).adjoint() * S * A.col(m))(0, 0).real() / 64.0).epsilon(1e-12));
}

TEST_CASE("MUSIC spectrum for one source in white noise") {
  // The noise subspace projector is I - a a^H / N, so
  //   P_m = N / (N - |a_m^H a|^2 / N).
  const AngularGrid grid = AngularGrid::range(-90.0, 0.5, 90.0);
  const CMatrix A = build_transfer_matrix(kUla8, grid).entries;
  const CVector a = steering_vector(kUla8, -12.5);
  const CMatrix S = 4.0 * a * a.adjoint() + 0.5 * CMatrix::Identity(8, 8);
  const MusicSpectrum ms = music_spectrum(S, A, 1);
  CHECK_FALSE(ms.subspace_tie);
  CHECK(ms.noise_eigenvalue_mean == doctest::Approx(0.5).epsilon(1e-12));
  const std::size_t src = *grid.find(-12.5);
  CHECK(ms.spectrum.values[src] > 1e10);
  CHECK(ms.spectrum.values[src] <= kMusicCap);
  for (Eigen::Index m = 0; m < A.cols(); ++m) {
    if (static_cast<std::size_t>(m) == src) continue;
    const double c = std::norm(A.col(m).dot(a));
    const double expected = 8.0 / (8.0 - c / 8.0);
    if (expected < 1e6)
      CHECK(ms.spectrum.values[static_cast<std::size_t>(m)] == doctest::Approx(expected).epsilon(1e-8));
  }
  const DoaEstimate est = pick_peaks(ms.spectrum, grid, 1, Method::music);
  CHECK(est.angles_deg == std::vector<double>{-12.5});
}

TEST_CASE("MUSIC flags an ambiguous subspace split") {
  const AngularGrid grid = AngularGrid::range(-90.0, 5.0, 90.0);
  const CMatrix A = build_transfer_matrix(kUla8, grid).entries;
  const MusicSpectrum a = music_spectrum(CMatrix::Identity(8, 8), A, 2);
  const MusicSpectrum b = music_spectrum(CMatrix::Identity(8, 8), A, 2);
  CHECK(a.subspace_tie);
  CHECK(a.noise_eigenvalue_mean == doctest::Approx(1.0));
  CHECK(a.spectrum.values == b.spectrum.values);
  CHECK_THROWS_AS(music_spectrum(CMatrix::Identity(8, 8), A, 8), DomainError);
  CHECK_THROWS_AS(music_spectrum(CMatrix::Identity(7, 7), A, 2), DomainError);
}

TEST_CASE("MUSIC resolves two close sources at high SNR") {
  const AngularGrid grid = AngularGrid::range(-90.0, 0.5, 90.0);
  const ArrayGeometry geom{20, 0.5};
  const SourceScenario s{{-3.0, 2.0}, {12.0, 22.0}};
  const SimulatedData d = simulate_snapshots(s, geom, grid, 30.0, 100, 3);
  const CMatrix A = build_transfer_matrix(geom, grid).entries;
  const MusicSpectrum ms = music_spectrum(sample_covariance(d.snapshots), A, 2);
  CHECK(pick_peaks(ms.spectrum, grid, 2, Method::music).angles_deg == std::vector<double>{-3.0, 2.0});
}

TEST_CASE("exhaustive search matches a brute-force projection fit") {
  StreamEngine rng(2);
  const ArrayGeometry geom{6, 0.5};
  const AngularGrid grid = AngularGrid::range(-80.0, 10.0, 80.0);  // 17 columns
  const CMatrix A = build_transfer_matrix(geom, grid).entries;
  for (int t = 0; t < 8; ++t) {
    const CMatrix S = random_covariance(rng, 6, 4);
    for (int k : {1, 2, 3}) {
      CAPTURE(k);
      const DoaEstimate est = exhaustive_ml(S, A, grid, k);
      CHECK(est.indices == brute_force(S, A, static_cast<std::size_t>(k)));
      CHECK(est.method == Method::exhaustive);
      const DoaEstimate par = exhaustive_ml(S, A, grid, k, ExhaustiveOptions{1'000'000, 3});
      CHECK(par.indices == est.indices);
      CHECK(par.source_powers == est.source_powers);
    }
  }
}

TEST_CASE("exhaustive search with K = 1 is the CBF maximizer") {
  StreamEngine rng(3);
  const AngularGrid grid = AngularGrid::range(-90.0, 2.0, 90.0);
  const CMatrix A = build_transfer_matrix(kUla8, grid).entries;
  const CMatrix S = random_covariance(rng, 8, 30);
  const AngularSpectrum cbf = cbf_spectrum(S, A);
  const auto best = static_cast<std::size_t>(
      std::max_element(cbf.values.begin(), cbf.values.end()) - cbf.values.begin());
  CHECK(exhaustive_ml(S, A, grid, 1).indices == std::vector<std::size_t>{best});
}

TEST_CASE("exhaustive search on orthogonal beams picks the strongest beams") {
  // sin(theta) = 2 i / N gives A^H A = N I, so the fit is the sum of the
  // selected beam powers a^H S a / N.
  std::vector<double> angles;
  for (int i = -3; i <= 4; ++i) angles.push_back(std::asin(2.0 * i / 8.0) * 180.0 / std::numbers::pi);
  const AngularGrid grid(angles);
  const CMatrix A = build_transfer_matrix(kUla8, grid).entries;
  CHECK((A.adjoint() * A - 8.0 * CMatrix::Identity(8, 8)).norm() < 1e-10);
  StreamEngine rng(4);
  for (int t = 0; t < 5; ++t) {
    const CMatrix S = random_covariance(rng, 8, 12);
    const AngularSpectrum cbf = cbf_spectrum(S, A);
    std::vector<std::size_t> order(8);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cbf.values[a] > cbf.values[b]; });
    std::vector<std::size_t> top(order.begin(), order.begin() + 3);
    std::sort(top.begin(), top.end());
    const DoaEstimate est = exhaustive_ml(S, A, grid, 3);
    CHECK(est.indices == top);
    // projection fit = N * sum of CBF values over the subset
    double fit = 0.0;
    for (auto i : top) fit += 8.0 * cbf.values[i];
    CMatrix cols(8, 3);
    for (int i = 0; i < 3; ++i) cols.col(i) = A.col(static_cast<Eigen::Index>(top[static_cast<std::size_t>(i)]));
    CHECK(projection_fit(S, cols) == doctest::Approx(fit).epsilon(1e-10));
  }
}

TEST_CASE("exhaustive search recovers noiseless sources and their powers") {
  const AngularGrid grid = AngularGrid::range(-90.0, 2.0, 90.0);
  const CMatrix A = build_transfer_matrix(kUla8, grid).entries;
  const CVector a1 = steering_vector(kUla8, -20.0), a2 = steering_vector(kUla8, 36.0);
  const CMatrix S = 3.0 * a1 * a1.adjoint() + 0.5 * a2 * a2.adjoint();
  const DoaEstimate est = exhaustive_ml(S, A, grid, 2);
  CHECK(est.angles_deg == std::vector<double>{-20.0, 36.0});
  CHECK(est.source_powers[0] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(est.source_powers[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("exhaustive search skips coincident endfire columns") {
  // -90 and 90 have identical steering vectors
  const AngularGrid grid({-90.0, 0.0, 90.0});
  const CMatrix A = build_transfer_matrix(kUla8, grid).entries;
  const CVector a = steering_vector(kUla8, 90.0);
  const CMatrix S = a * a.adjoint() + 0.1 * CMatrix::Identity(8, 8);
  const DoaEstimate est = exhaustive_ml(S, A, grid, 2);
  CHECK(est.indices != std::vector<std::size_t>{0, 2});
  CHECK((est.indices[0] == 0 || est.indices[1] == 2));
  CHECK_THROWS_AS(projection_fit(S, A(Eigen::all, std::vector<Eigen::Index>{0, 2})), NumericalError);
}

TEST_CASE("exhaustive search budget") {
  const AngularGrid grid = AngularGrid::range(-90.0, 1.0, 90.0);
  const CMatrix A = build_transfer_matrix(kUla8, grid).entries;
  CHECK_THROWS_AS(exhaustive_ml(CMatrix::Identity(8, 8), A, grid, 3, ExhaustiveOptions{1000, 1}),
                  DomainError);
  CHECK_THROWS_AS(exhaustive_ml(CMatrix::Identity(8, 8), A, grid, 8), DomainError);
}

TEST_CASE("binomial coefficients") {
  CHECK(binomial(181, 3) == 971'970);
  CHECK(binomial(361, 3) == 7'775'940);
  CHECK(binomial(5, 0) == 1);
  CHECK(binomial(3, 5) == 0);
  CHECK(binomial(62, 31) == 465'428'353'255'261'088ULL);
  CHECK(binomial(200, 100) == UINT64_MAX);
}

TEST_CASE("peak picking") {
  const AngularGrid grid({-30.0, -20.0, -10.0, 0.0, 10.0, 20.0});
  const AngularSpectrum s{{1.0, 3.0, 2.0, 2.0, 5.0, 4.0}};
  const DoaEstimate est = pick_peaks(s, grid, 2, Method::cbf);
  CHECK(est.indices == std::vector<std::size_t>{1, 4});
  CHECK(est.angles_deg == std::vector<double>{-20.0, 10.0});
  CHECK(est.source_powers == std::vector<double>{3.0, 5.0});
  CHECK_THROWS_AS(pick_peaks(AngularSpectrum{{1.0}}, grid, 1, Method::cbf), DomainError);
  CHECK_THROWS_AS(pick_peaks(AngularSpectrum{std::vector<double>(6, 1.0)}, grid, 1, Method::cbf),
                  DegenerateInputError);
}

TEST_CASE("method names") {
  for (Method m : {Method::cbf, Method::music, Method::exhaustive, Method::sbl, Method::sbl1, Method::msbl})
    CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("lasso"), DomainError);
}
