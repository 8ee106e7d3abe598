#include "sbldoa/sbl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "sbldoa/errors.hpp"
#include "sbldoa/peaks.hpp"

namespace sbldoa {

GammaRule parse_gamma_rule(std::string_view name) {
  if (name == "sbl") return GammaRule::sbl;
  if (name == "sbl1") return GammaRule::sbl1;
  if (name == "msbl" || name == "m-sbl") return GammaRule::msbl;
  throw DomainError("unknown gamma update rule '" + std::string(name) + "'");
}

NoiseRule parse_noise_rule(std::string_view name) {
  if (name == "projection") return NoiseRule::projection;
  if (name == "em") return NoiseRule::em;
  if (name == "fixed") return NoiseRule::fixed;
  throw DomainError("unknown noise rule '" + std::string(name) + "'");
}

std::string_view to_string(GammaRule rule) {
  switch (rule) {
    case GammaRule::sbl: return "sbl";
    case GammaRule::sbl1: return "sbl1";
    case GammaRule::msbl: return "msbl";
  }
  return "?";
}

std::string_view to_string(NoiseRule rule) {
  switch (rule) {
    case NoiseRule::projection: return "projection";
    case NoiseRule::em: return "em";
    case NoiseRule::fixed: return "fixed";
  }
  return "?";
}

void SblConfig::validate(Eigen::Index n_sensors) const {
  if (k_sources < 1) throw DomainError("k_sources must be positive");
  if (k_sources >= n_sensors)
    throw DomainError("k_sources must be smaller than the number of sensors");
  if (!(sigma2_init > 0.0)) throw DomainError("sigma2_init must be positive");
  if (!(gamma_init > 0.0)) throw DomainError("gamma_init must be positive");
  if (!(epsilon_min > 0.0)) throw DomainError("epsilon_min must be positive");
  if (j_max < 1) throw DomainError("j_max must be positive");
  if (!(gamma_floor >= 0.0)) throw DomainError("gamma_floor must be nonnegative");
  if (!(diagonal_loading > 0.0)) throw DomainError("diagonal_loading must be positive");
}

namespace {

void require_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw DomainError("noise variance must be positive and finite");
}

void require_gamma(const RVector& gamma, const CMatrix& A) {
  if (gamma.size() != A.cols())
    throw DomainError("gamma length does not match the number of dictionary columns");
  for (Eigen::Index m = 0; m < gamma.size(); ++m)
    if (!(gamma(m) >= 0.0) || !std::isfinite(gamma(m)))
      throw DomainError("gamma entries must be finite and nonnegative");
}

// Re(diag(U^H V)) for equally shaped U, V.
RVector column_dots(const CMatrix& U, const CMatrix& V) {
  return U.conjugate().cwiseProduct(V).colwise().sum().real().transpose();
}

double noise_floor(const CMatrix& S_y) {
  const double floor = 1e-10 * S_y.trace().real() / static_cast<double>(S_y.rows());
  return std::max(floor, std::numeric_limits<double>::min());
}

// ||mu_m||^2 / L from the data matrix.
RVector row_power_from_data(const RVector& gamma, const ModelSolve& solve, const CMatrix& Y) {
  const CMatrix w = solve.inv_a().adjoint() * Y;
  RVector p = w.rowwise().squaredNorm() / static_cast<double>(Y.cols());
  return p.cwiseProduct(gamma.cwiseAbs2());
}

// ||mu_m||^2 / L = gamma_m^2 b_m^H S_y b_m with b_m = Sigma_y^{-1} a_m; cost
// does not depend on L.
RVector row_power_from_covariance(const RVector& gamma, const ModelSolve& solve,
                                  const CMatrix& S_y) {
  const CMatrix sb = S_y * solve.inv_a();
  return column_dots(solve.inv_a(), sb).cwiseProduct(gamma.cwiseAbs2());
}

RVector apply_floor(RVector gamma, double gamma_floor) {
  if (gamma_floor > 0.0) gamma = gamma.cwiseMax(gamma_floor);
  return gamma;
}

// sqrt(p_m) / sqrt(d_m)
RVector fixed_point_update(const RVector& row_power, const RVector& denom) {
  RVector out(row_power.size());
  for (Eigen::Index m = 0; m < out.size(); ++m)
    out(m) = std::sqrt(std::max(row_power(m), 0.0)) / std::sqrt(denom(m));
  return out;
}

// p_m + gamma_m - gamma_m^2 q_m
RVector em_update(const RVector& row_power, const RVector& gamma, const RVector& quad) {
  RVector var = gamma - gamma.cwiseAbs2().cwiseProduct(quad);
  return row_power + var.cwiseMax(0.0);
}

}  // namespace

ModelSolve::ModelSolve(const RVector& gamma, double sigma2, const CMatrix& A)
    : llt_(model_covariance(gamma, sigma2, A)) {
  if (llt_.info() != Eigen::Success)
    throw NumericalError("Cholesky factorization of the model covariance failed");
  inv_a_ = llt_.solve(A);
  quad_ = column_dots(A, inv_a_);
}

double ModelSolve::log_det() const {
  const auto& l = llt_.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i).real());
  return 2.0 * s;
}

CMatrix model_covariance(const RVector& gamma, double sigma2, const CMatrix& A) {
  require_sigma2(sigma2);
  require_gamma(gamma, A);
  const Eigen::Index n = A.rows();
  // gamma_m == 0 columns contribute exact zeros
  CMatrix sigma = A * gamma.asDiagonal() * A.adjoint();
  sigma.diagonal().array() += sigma2;
  return hermitian_part(sigma);
}

CMatrix posterior_rows(const RVector& gamma, double sigma2, const CMatrix& A, const CMatrix& Y) {
  if (Y.rows() != A.rows()) throw DomainError("data and dictionary row counts differ");
  const ModelSolve solve(gamma, sigma2, A);
  CMatrix mu = solve.inv_a().adjoint() * Y;
  for (Eigen::Index m = 0; m < mu.rows(); ++m) {
    if (gamma(m) > 0.0)
      mu.row(m) *= gamma(m);
    else
      mu.row(m).setZero();
  }
  return mu;
}

CMatrix posterior_covariance(const RVector& gamma, double sigma2, const CMatrix& A) {
  const ModelSolve solve(gamma, sigma2, A);
  const CMatrix g = A.adjoint() * solve.inv_a();
  CMatrix sigma_x = -(gamma.asDiagonal() * g * gamma.asDiagonal());
  sigma_x.diagonal() += gamma.cast<cdouble>();
  return hermitian_part(sigma_x);
}

RVector posterior_variances(const RVector& gamma, double sigma2, const CMatrix& A) {
  const ModelSolve solve(gamma, sigma2, A);
  return (gamma - gamma.cwiseAbs2().cwiseProduct(solve.quad())).cwiseMax(0.0);
}

CMatrix inverse_model_covariance(const RVector& gamma, double sigma2, const CMatrix& A) {
  const ModelSolve solve(gamma, sigma2, A);
  const CMatrix eye = CMatrix::Identity(A.rows(), A.rows());
  return hermitian_part(solve.factor().solve(eye));
}

double log_evidence(const RVector& gamma, double sigma2, const CMatrix& A, const CMatrix& S_y) {
  if (S_y.rows() != A.rows() || S_y.cols() != A.rows())
    throw DomainError("sample covariance must be N x N");
  const ModelSolve solve(gamma, sigma2, A);
  return -solve.factor().solve(S_y).trace().real() - solve.log_det();
}

RVector evidence_gradient_gamma(const RVector& gamma, double sigma2, const CMatrix& A,
                                const CMatrix& Y) {
  if (Y.rows() != A.rows()) throw DomainError("data and dictionary row counts differ");
  const ModelSolve solve(gamma, sigma2, A);
  const CMatrix w = solve.inv_a().adjoint() * Y;
  return w.rowwise().squaredNorm() / static_cast<double>(Y.cols()) - solve.quad();
}

SampleCovarianceInverse invert_sample_covariance(const CMatrix& S_y,
                                                 SingularCovariancePolicy policy,
                                                 double loading) {
  const Eigen::SelfAdjointEigenSolver<CMatrix> eig(S_y, Eigen::EigenvaluesOnly);
  const RVector& lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  if (!(lmax > 0.0)) throw NumericalError("sample covariance is zero");

  SampleCovarianceInverse out;
  out.rcond = std::max(lambda.minCoeff(), 0.0) / lmax;
  CMatrix target = S_y;
  // Anything below this is rank deficient up to rounding.
  constexpr double kSingularRcond = 1e-12;
  if (out.rcond < kSingularRcond) {
    if (policy == SingularCovariancePolicy::strict)
      throw NumericalError("sample covariance is singular (rcond " +
                           std::to_string(out.rcond) + "); the SBL rule needs S_y invertible");
    const Eigen::Index n = S_y.rows();
    target.diagonal().array() += loading * S_y.trace().real() / static_cast<double>(n);
    out.loaded = true;
  }
  const Eigen::LLT<CMatrix> llt(target);
  if (llt.info() != Eigen::Success)
    throw NumericalError("Cholesky factorization of the sample covariance failed");
  out.inverse = hermitian_part(llt.solve(CMatrix::Identity(S_y.rows(), S_y.cols())));
  return out;
}

RVector gamma_update_sbl1(const RVector& gamma, double sigma2, const CMatrix& A, const CMatrix& Y,
                          double gamma_floor) {
  const ModelSolve solve(gamma, sigma2, A);
  return apply_floor(fixed_point_update(row_power_from_data(gamma, solve, Y), solve.quad()),
                     gamma_floor);
}

RVector gamma_update_sbl(const RVector& gamma, double sigma2, const CMatrix& A, const CMatrix& Y,
                         const SampleCovarianceInverse& S_y_inv, double gamma_floor) {
  const ModelSolve solve(gamma, sigma2, A);
  const RVector denom = column_dots(A, S_y_inv.inverse * A);
  return apply_floor(fixed_point_update(row_power_from_data(gamma, solve, Y), denom),
                     gamma_floor);
}

RVector gamma_update_msbl(const RVector& gamma, double sigma2, const CMatrix& A, const CMatrix& Y,
                          double gamma_floor) {
  const ModelSolve solve(gamma, sigma2, A);
  return apply_floor(em_update(row_power_from_data(gamma, solve, Y), gamma, solve.quad()),
                     gamma_floor);
}

std::vector<std::size_t> select_active_set(const RVector& gamma, std::size_t k) {
  return find_peaks(std::span<const double>(gamma.data(), static_cast<std::size_t>(gamma.size())),
                    k);
}

CMatrix active_columns(const CMatrix& A, const std::vector<std::size_t>& active_set) {
  CMatrix out(A.rows(), static_cast<Eigen::Index>(active_set.size()));
  for (std::size_t k = 0; k < active_set.size(); ++k) {
    if (active_set[k] >= static_cast<std::size_t>(A.cols()))
      throw DomainError("active set index outside the dictionary");
    out.col(static_cast<Eigen::Index>(k)) = A.col(static_cast<Eigen::Index>(active_set[k]));
  }
  return out;
}

double noise_update_projection(const CMatrix& S_y, const CMatrix& A_active) {
  const Eigen::Index n = S_y.rows();
  const Eigen::Index k = A_active.cols();
  if (A_active.rows() != n) throw DomainError("active columns must have N rows");
  if (k >= n) throw DomainError("projection noise estimate needs K < N");

  const Eigen::ColPivHouseholderQR<CMatrix> qr(A_active);
  if (qr.rank() < k) throw NumericalError("active steering matrix is rank deficient");
  // Orthonormal basis of range(A_M); P = Q1 Q1^H.
  const CMatrix q1 = qr.householderQ() * CMatrix::Identity(n, k);
  const double captured = (q1.adjoint() * S_y * q1).trace().real();
  const double residual = S_y.trace().real() - captured;
  return std::max(residual / static_cast<double>(n - k), noise_floor(S_y));
}

double noise_update_em(const CMatrix& Y, const CMatrix& A, const CMatrix& mu_X,
                       const RVector& sigma_x_diag, const RVector& gamma, double sigma2_old) {
  const double L = static_cast<double>(Y.cols());
  const double N = static_cast<double>(Y.rows());
  const double M = static_cast<double>(A.cols());
  const double fit = (Y - A * mu_X).squaredNorm() / L;
  double ratio_sum = 0.0;
  for (Eigen::Index i = 0; i < gamma.size(); ++i)
    ratio_sum += gamma(i) > 0.0 ? sigma_x_diag(i) / gamma(i) : 1.0;
  const double floor = std::max(1e-10 * Y.squaredNorm() / (L * N),
                                std::numeric_limits<double>::min());
  return std::max((fit + sigma2_old * (M - ratio_sum)) / N, floor);
}

double noise_update_em(const CMatrix& Y, const CMatrix& A, const CMatrix& mu_X,
                       const CMatrix& sigma_x, const RVector& gamma, double sigma2_old) {
  return noise_update_em(Y, A, mu_X, RVector(sigma_x.diagonal().real()), gamma, sigma2_old);
}

double convergence_epsilon(const RVector& gamma_new, const RVector& gamma_old) {
  const double denom = gamma_old.lpNorm<1>();
  if (!(denom > 0.0)) throw DegenerateInputError("previous gamma is all zero");
  return (gamma_new - gamma_old).lpNorm<1>() / denom;
}

SblResult run_sbl(const SblConfig& config, const CMatrix& A, const CMatrix& Y) {
  config.validate(A.rows());
  if (Y.rows() != A.rows()) throw DomainError("data and dictionary row counts differ");
  if (Y.cols() < 1) throw DomainError("need at least one snapshot");

  const Eigen::Index M = A.cols();
  const double N = static_cast<double>(A.rows());
  const auto K = static_cast<std::size_t>(config.k_sources);
  const CMatrix S_y = sample_covariance(Y);

  SblResult result;
  RVector sbl_denom;
  if (config.update_rule == GammaRule::sbl) {
    const auto inv = invert_sample_covariance(S_y, config.singular_policy, config.diagonal_loading);
    result.covariance_loaded = inv.loaded;
    sbl_denom = column_dots(A, inv.inverse * A);
  }

  RVector gamma = RVector::Constant(M, config.gamma_init);
  double sigma2 = config.sigma2_init;

  int j = 0;
  double epsilon = std::numeric_limits<double>::infinity();
  while (epsilon > config.epsilon_min && j < config.j_max) {
    ++j;
    try {
      const ModelSolve solve(gamma, sigma2, A);
      const CMatrix inv_s = solve.factor().solve(S_y);  // Sigma_y^{-1} S_y
      result.evidence_trace.push_back(-inv_s.trace().real() - solve.log_det());

      const RVector row_power = row_power_from_covariance(gamma, solve, S_y);
      RVector gamma_new;
      switch (config.update_rule) {
        case GammaRule::sbl: gamma_new = fixed_point_update(row_power, sbl_denom); break;
        case GammaRule::sbl1: gamma_new = fixed_point_update(row_power, solve.quad()); break;
        case GammaRule::msbl: gamma_new = em_update(row_power, gamma, solve.quad()); break;
      }
      gamma_new = apply_floor(std::move(gamma_new), config.gamma_floor);

      result.active_set = select_active_set(gamma_new, K);

      double sigma2_new = sigma2;
      if (config.noise_rule == NoiseRule::projection) {
        sigma2_new = noise_update_projection(S_y, active_columns(A, result.active_set));
      } else if (config.noise_rule == NoiseRule::em) {
        // Y - A mu_X = sigma2 Sigma_y^{-1} Y, so the fit term is
        // sigma2^2 tr(Sigma_y^{-1} S_y Sigma_y^{-1}).
        const CMatrix inv_s_inv = solve.factor().solve(CMatrix(inv_s.adjoint()));
        const double fit = sigma2 * sigma2 * inv_s_inv.trace().real();
        // M - sum_i Sigma_x,ii / gamma_i = sum_{gamma_i > 0} gamma_i q_i
        double explained = 0.0;
        for (Eigen::Index i = 0; i < M; ++i)
          if (gamma(i) > 0.0) explained += gamma(i) * solve.quad()(i);
        sigma2_new = std::max((fit + sigma2 * explained) / N, noise_floor(S_y));
      }

      epsilon = convergence_epsilon(gamma_new, gamma);
      gamma = std::move(gamma_new);
      sigma2 = sigma2_new;
    } catch (const NumericalError& e) {
      throw NumericalError(e.what(), j);
    } catch (const DegenerateInputError& e) {
      throw DegenerateInputError(std::string(e.what()) + " (iteration " + std::to_string(j) + ")");
    }

    result.epsilon_trace.push_back(epsilon);
    result.sigma2_trace.push_back(sigma2);
    if (std::find(config.gamma_snapshot_iterations.begin(), config.gamma_snapshot_iterations.end(),
                  j) != config.gamma_snapshot_iterations.end())
      result.gamma_snapshots.emplace(j, gamma);
  }

  result.iterations = j;
  result.converged = epsilon <= config.epsilon_min;
  result.gamma = gamma;
  result.sigma2 = sigma2;
  try {
    result.posterior_rows = posterior_rows(gamma, sigma2, A, Y);
  } catch (const NumericalError& e) {
    throw NumericalError(e.what(), j);
  }
  return result;
}

}  // namespace sbldoa
