#pragma once

// Multi-snapshot sparse Bayesian learning.
//
// Model: Y = A X + noise, columns of X ~ CN(0, diag(gamma)), noise ~ CN(0, sigma2 I).
// Everything here is expressed through the model covariance
//   Sigma_y = sigma2 I + A diag(gamma) A^H
// which is N x N; nothing of size M x M is formed unless asked for.

#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>

#include "sbldoa/array_model.hpp"
#include "sbldoa/linalg.hpp"

namespace sbldoa {

enum class GammaRule { sbl, sbl1, msbl };
enum class NoiseRule { projection, em, fixed };

GammaRule parse_gamma_rule(std::string_view name);
NoiseRule parse_noise_rule(std::string_view name);
std::string_view to_string(GammaRule rule);
std::string_view to_string(NoiseRule rule);

// What to do when S_y is too ill-conditioned to invert for the SBL rule.
enum class SingularCovariancePolicy { diagonal_loading, strict };

struct SblConfig {
  GammaRule update_rule = GammaRule::sbl;
  NoiseRule noise_rule = NoiseRule::projection;
  int k_sources = 3;
  double sigma2_init = 0.1;
  double gamma_init = 1.0;
  double epsilon_min = 1e-3;
  int j_max = 500;
  double gamma_floor = 0.0;
  SingularCovariancePolicy singular_policy = SingularCovariancePolicy::diagonal_loading;
  double diagonal_loading = 1e-3;  // relative to tr(S_y)/N
  // 1-based iterations at which the full gamma vector is kept in the result.
  std::vector<int> gamma_snapshot_iterations;

  void validate(Eigen::Index n_sensors) const;
};

struct SblResult {
  std::vector<std::size_t> active_set;  // 0-based grid indices, ascending
  RVector gamma;
  double sigma2 = 0.0;
  int iterations = 0;
  bool converged = false;
  bool covariance_loaded = false;       // SBL rule fell back to diagonal loading
  std::vector<double> epsilon_trace;    // one entry per iteration
  std::vector<double> sigma2_trace;     // noise estimate after each iteration
  // Per-snapshot log-evidence of the (gamma, sigma2) entering each iteration.
  std::vector<double> evidence_trace;
  std::map<int, RVector> gamma_snapshots;
  CMatrix posterior_rows;               // mu_X at the final (gamma, sigma2)
};

// Cholesky factorization of Sigma_y together with the products every update
// rule needs: Sigma_y^{-1} A and the quadratic forms a_m^H Sigma_y^{-1} a_m.
class ModelSolve {
 public:
  ModelSolve(const RVector& gamma, double sigma2, const CMatrix& A);

  const Eigen::LLT<CMatrix>& factor() const { return llt_; }
  const CMatrix& inv_a() const { return inv_a_; }
  const RVector& quad() const { return quad_; }
  double log_det() const;

 private:
  Eigen::LLT<CMatrix> llt_;
  CMatrix inv_a_;
  RVector quad_;
};

CMatrix model_covariance(const RVector& gamma, double sigma2, const CMatrix& A);

// mu_X = diag(gamma) A^H Sigma_y^{-1} Y. Rows with gamma_m == 0 are exactly zero.
CMatrix posterior_rows(const RVector& gamma, double sigma2, const CMatrix& A, const CMatrix& Y);

// Sigma_x = Gamma - Gamma A^H Sigma_y^{-1} A Gamma (M x M).
CMatrix posterior_covariance(const RVector& gamma, double sigma2, const CMatrix& A);

// diag(Sigma_x) without forming the M x M matrix.
RVector posterior_variances(const RVector& gamma, double sigma2, const CMatrix& A);

CMatrix inverse_model_covariance(const RVector& gamma, double sigma2, const CMatrix& A);

// -tr(Sigma_y^{-1} S_y) - log det Sigma_y
double log_evidence(const RVector& gamma, double sigma2, const CMatrix& A, const CMatrix& S_y);

// Derivative of the per-snapshot log-evidence with respect to each gamma_m:
//   (1/L) ||a_m^H Sigma_y^{-1} Y||^2 - a_m^H Sigma_y^{-1} a_m,
// which equals ||mu_m||^2 / (gamma_m^2 L) - a_m^H Sigma_y^{-1} a_m where
// gamma_m > 0 and is its limit at gamma_m = 0.
RVector evidence_gradient_gamma(const RVector& gamma, double sigma2, const CMatrix& A,
                                const CMatrix& Y);

// S_y^{-1}, possibly after diagonal loading.
struct SampleCovarianceInverse {
  CMatrix inverse;
  bool loaded = false;
  double rcond = 0.0;  // reciprocal condition estimate of S_y before loading
};

SampleCovarianceInverse invert_sample_covariance(
    const CMatrix& S_y,
    SingularCovariancePolicy policy = SingularCovariancePolicy::diagonal_loading,
    double loading = 1e-3);

RVector gamma_update_sbl1(const RVector& gamma, double sigma2, const CMatrix& A,
                          const CMatrix& Y, double gamma_floor = 0.0);
RVector gamma_update_sbl(const RVector& gamma, double sigma2, const CMatrix& A,
                         const CMatrix& Y, const SampleCovarianceInverse& S_y_inv,
                         double gamma_floor = 0.0);
RVector gamma_update_msbl(const RVector& gamma, double sigma2, const CMatrix& A,
                          const CMatrix& Y, double gamma_floor = 0.0);

// Indices of the K largest peaks of gamma (see find_peaks).
std::vector<std::size_t> select_active_set(const RVector& gamma, std::size_t k);

CMatrix active_columns(const CMatrix& A, const std::vector<std::size_t>& active_set);

// tr((I - A_M A_M^+) S_y) / (N - K), floored at 1e-10 tr(S_y)/N.
double noise_update_projection(const CMatrix& S_y, const CMatrix& A_active);

// ((1/L)||Y - A mu_X||_F^2 + sigma2_old (M - sum_i Sigma_x,ii / gamma_i)) / N
// with gamma_i == 0 terms contributing a ratio of 1. Only diag(Sigma_x) is read.
double noise_update_em(const CMatrix& Y, const CMatrix& A, const CMatrix& mu_X,
                       const RVector& sigma_x_diag, const RVector& gamma, double sigma2_old);
double noise_update_em(const CMatrix& Y, const CMatrix& A, const CMatrix& mu_X,
                       const CMatrix& sigma_x, const RVector& gamma, double sigma2_old);

// ||gamma_new - gamma_old||_1 / ||gamma_old||_1
double convergence_epsilon(const RVector& gamma_new, const RVector& gamma_old);

SblResult run_sbl(const SblConfig& config, const CMatrix& A, const CMatrix& Y);

}  // namespace sbldoa
