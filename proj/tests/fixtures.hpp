#pragma once

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sls/sls.hpp"

namespace fixture {

using sls::Matrix;
using sls::PlantModel;

/// State penalty plus unit input penalty, B1 = I.
inline PlantModel sf_plant(const Matrix& A, const Matrix& B2) {
  const int n = static_cast<int>(A.rows()), nu = static_cast<int>(B2.cols());
  const Matrix C1 = (Matrix(n + nu, n) << Matrix::Identity(n, n), Matrix::Zero(nu, n)).finished();
  const Matrix D12 = (Matrix(n + nu, nu) << Matrix::Zero(n, nu), Matrix::Identity(nu, nu)).finished();
  return PlantModel::state_feedback(A, Matrix::Identity(n, n), B2, C1, Matrix::Zero(n + nu, n), D12);
}

/// Tridiagonal chain with every nonzero equal to alpha.
inline Matrix chain_A(int n, double alpha = 1.0) {
  Matrix A = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = alpha;
    if (i + 1 < n) A(i, i + 1) = A(i + 1, i) = alpha;
  }
  return A;
}

/// Output-feedback plant with process noise on every state and sensor noise on every output.
inline PlantModel random_of_plant(std::mt19937_64& rng, int n, int nu, int ny) {
  const Matrix A = oracle::gaussian(rng, n, n) / std::sqrt(static_cast<double>(n));
  const Matrix B2 = oracle::gaussian(rng, n, nu);
  const Matrix C2 = oracle::gaussian(rng, ny, n);
  const Matrix B1 = (Matrix(n, n + ny) << Matrix::Identity(n, n), Matrix::Zero(n, ny)).finished();
  const Matrix D21 = (Matrix(ny, n + ny) << Matrix::Zero(ny, n), Matrix::Identity(ny, ny)).finished();
  const Matrix C1 = (Matrix(n + nu, n) << Matrix::Identity(n, n), Matrix::Zero(nu, n)).finished();
  const Matrix D12 = (Matrix(n + nu, nu) << Matrix::Zero(n, nu), Matrix::Identity(nu, nu)).finished();
  return PlantModel(A, B1, B2, C1, Matrix::Zero(n + nu, n + ny), D12, C2, D21, Matrix::Zero(ny, nu));
}

/// Chain with one actuator per node and no input penalty.
inline PlantModel fully_actuated_chain(int n) {
  sls::ChainParams c;
  c.n = n;
  c.gamma = 0.0;
  for (int i = 1; i <= n; ++i) c.actuator_sites.push_back(i);
  return sls::build_chain(c);
}

}  // namespace fixture
