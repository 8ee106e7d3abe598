#pragma once

#include <complex>

#include <Eigen/Dense>

namespace sbldoa {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

// (M + M^H) / 2
inline CMatrix hermitian_part(const CMatrix& m) {
  return (m + m.adjoint()) * 0.5;
}

}  // namespace sbldoa
