#pragma once

// Classical DOA estimators on the same dictionary: Bartlett beamformer,
// MUSIC and an exhaustive deterministic maximum-likelihood subset search.

#include <cstdint>
#include <string_view>
#include <vector>

#include "sbldoa/array_model.hpp"
#include "sbldoa/linalg.hpp"

namespace sbldoa {

enum class Method { cbf, music, exhaustive, sbl, sbl1, msbl };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);

struct AngularSpectrum {
  std::vector<double> values;  // one per grid point, >= 0
};

struct MusicSpectrum {
  AngularSpectrum spectrum;
  // Eigenvalues N-K and N-K+1 coincided; the subspace split was decided by
  // the deterministic eigenvector ordering.
  bool subspace_tie = false;
  double noise_eigenvalue_mean = 0.0;
};

struct DoaEstimate {
  std::vector<std::size_t> indices;   // grid indices, ascending
  std::vector<double> angles_deg;     // ascending
  std::vector<double> source_powers;  // method-specific scale
  Method method = Method::cbf;
};

// P_m = a_m^H S_y a_m / N^2; a unit-power source reads 1 at its peak.
AngularSpectrum cbf_spectrum(const CMatrix& S_y, const CMatrix& A);

// P_m = a_m^H a_m / ||E_n^H a_m||^2 with E_n the N-K weakest eigenvectors.
// Values are capped at kMusicCap.
MusicSpectrum music_spectrum(const CMatrix& S_y, const CMatrix& A, int k);

inline constexpr double kMusicCap = 1e12;

struct ExhaustiveOptions {
  std::uint64_t max_subsets = 20'000'000;
  int threads = 1;
};

// Maximizes tr(P_M S_y), P_M = A_M A_M^+, over every K-subset of grid columns.
// Rank-deficient subsets are skipped. Ties go to the lexicographically
// smallest subset.
DoaEstimate exhaustive_ml(const CMatrix& S_y, const CMatrix& A, const AngularGrid& grid, int k,
                          const ExhaustiveOptions& options = {});

// Objective of exhaustive_ml for one subset.
double projection_fit(const CMatrix& S_y, const CMatrix& A_active);

DoaEstimate pick_peaks(const AngularSpectrum& spectrum, const AngularGrid& grid, int k,
                       Method method);

// Number of k-subsets of n items; saturates at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

}  // namespace sbldoa
