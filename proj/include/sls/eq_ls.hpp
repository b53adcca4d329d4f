#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <optional>

#include "sls/errors.hpp"
#include "sls/plant.hpp"

namespace sls {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Outcome of  minimize ||G x - h||^2  subject to  E x = f.
struct EqLsResult {
  Vector x;
  double equality_residual = 0.0;  ///< max |E x - f|
  bool feasible = true;            ///< equality_residual <= tolerance
  bool degenerate = false;         ///< solution not unique or factorization needed help
};

/// Dense equality-constrained least squares via a null-space method.
///
/// A column-pivoted QR of E^T splits the variable space into the row space of
/// E (where the constraints pin the solution) and its null space Z (where the
/// objective is minimized with a complete orthogonal decomposition). The
/// returned x is the minimum-norm minimizer; infeasibility is reported when
/// the rank-revealing particular solution leaves |E x - f| above `tol`.
inline EqLsResult solve_eq_ls(const Matrix& G, const Vector& h, const Matrix& E,
                              const Vector& f, double tol = 1e-8) {
  const Eigen::Index p = std::max(G.cols(), E.cols());
  detail::require_domain(G.rows() == h.size(), "solve_eq_ls: G and h disagree");
  detail::require_domain(E.rows() == f.size(), "solve_eq_ls: E and f disagree");
  detail::require_domain(G.cols() == p || G.rows() == 0, "solve_eq_ls: G has wrong column count");
  detail::require_domain(E.cols() == p || E.rows() == 0, "solve_eq_ls: E has wrong column count");

  EqLsResult out;
  const Matrix Gp = G.rows() == 0 ? Matrix::Zero(0, p) : G;

  if (E.rows() == 0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Gp);
    out.x = Gp.rows() ? Vector(cod.solve(h)) : Vector::Zero(p);
    out.degenerate = cod.rank() < p;
    return out;
  }

  const Matrix Et = E.transpose();
  Eigen::ColPivHouseholderQR<Matrix> qr(Et);
  qr.setThreshold(1e-12);
  const Eigen::Index r = qr.rank();
  const Matrix Q = qr.householderQ();
  const Matrix Rfull = qr.matrixQR().template triangularView<Eigen::Upper>();

  // E^T P = Q R  =>  E Q1 = P R1^T with R1 = R(0:r, :). Keep the r pivoted
  // equations that are independent; the rest must be implied.
  Vector xp = Vector::Zero(p);
  if (r > 0) {
    const Vector g = qr.colsPermutation().transpose() * f;
    const Matrix R11 = Rfull.topLeftCorner(r, r);
    const Vector y = R11.transpose().template triangularView<Eigen::Lower>().solve(g.head(r));
    xp = Q.leftCols(r) * y;
  }
  out.equality_residual = (E * xp - f).cwiseAbs().maxCoeff();
  out.feasible = out.equality_residual <= tol;

  const Eigen::Index k = p - r;
  Vector x = xp;
  if (k > 0 && Gp.rows() > 0) {
    const Matrix Z = Q.rightCols(k);
    const Matrix GZ = Gp * Z;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(GZ);
    const Vector w = cod.solve(h - Gp * xp);
    x += Z * w;
    out.degenerate = cod.rank() < k;
  } else if (k > 0) {
    out.degenerate = true;  // no objective: minimum-norm point of the affine set
  }
  out.x = std::move(x);
  if (out.feasible) out.equality_residual = (E * out.x - f).cwiseAbs().maxCoeff();
  return out;
}

/// Sparse equality-constrained least squares for large structured problems.
///
/// Factors the quasi-definite regularized KKT matrix
///   [G^T G + delta I   E^T     ]
///   [E                 -delta I]
/// once with a sparse LDL^T and removes the regularization by iterative
/// refinement against the exact KKT system (a proximal point iteration, which
/// also handles consistent rank-deficient E). One factorization serves any
/// number of right-hand sides (h, f) for the same (G, E).
class SparseEqLs {
 public:
  struct Options {
    double regularization = 1e-8;
    int max_refinements = 200;
    double refinement_tol = 1e-13;
  };

  SparseEqLs(const SparseMatrix& G, const SparseMatrix& E) : SparseEqLs(G, E, Options{}) {}

  SparseEqLs(const SparseMatrix& G, const SparseMatrix& E, Options opts)
      : G_(G), E_(E), opts_(opts) {
    detail::require_domain(G.cols() == E.cols(), "SparseEqLs: G and E column counts differ");
    p_ = G.cols();
    m_ = E.rows();
    GtG_ = SparseMatrix(G.transpose() * G);
    const double d = opts_.regularization;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(GtG_.nonZeros() + 2 * E.nonZeros() + p_ + m_));
    for (int k = 0; k < GtG_.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(GtG_, k); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int k = 0; k < E.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(E, k); it; ++it) {
        trip.emplace_back(static_cast<int>(p_ + it.row()), static_cast<int>(it.col()), it.value());
        trip.emplace_back(static_cast<int>(it.col()), static_cast<int>(p_ + it.row()), it.value());
      }
    for (Eigen::Index i = 0; i < p_; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), d);
    for (Eigen::Index i = 0; i < m_; ++i)
      trip.emplace_back(static_cast<int>(p_ + i), static_cast<int>(p_ + i), -d);
    SparseMatrix K(p_ + m_, p_ + m_);
    K.setFromTriplets(trip.begin(), trip.end());
    ldlt_.compute(K);
    ok_ = ldlt_.info() == Eigen::Success;
  }

  bool factorized() const { return ok_; }

  EqLsResult solve(const Vector& h, const Vector& f, double tol = 1e-8) const {
    detail::require_domain(h.size() == G_.rows() && f.size() == m_, "SparseEqLs: rhs size");
    EqLsResult out;
    if (!ok_) {
      out.x = Vector::Zero(p_);
      out.equality_residual = m_ ? f.cwiseAbs().maxCoeff() : 0.0;
      out.feasible = out.equality_residual <= tol;
      out.degenerate = true;
      return out;
    }
    Vector b(p_ + m_);
    b.head(p_) = G_.transpose() * h;
    b.tail(m_) = f;
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    Vector z = Vector::Zero(p_ + m_);
    bool converged = false;
    for (int it = 0; it < opts_.max_refinements; ++it) {
      const Vector r = b - apply_kkt(z);
      if (r.cwiseAbs().maxCoeff() <= opts_.refinement_tol * scale) {
        converged = true;
        break;
      }
      z += ldlt_.solve(r);
    }
    out.x = z.head(p_);
    out.equality_residual = m_ ? (E_ * out.x - f).cwiseAbs().maxCoeff() : 0.0;
    out.feasible = out.equality_residual <= tol;
    out.degenerate = !converged;
    return out;
  }

 private:
  Vector apply_kkt(const Vector& z) const {
    Vector out(p_ + m_);
    out.head(p_) = GtG_ * z.head(p_) + E_.transpose() * z.tail(m_);
    out.tail(m_) = E_ * z.head(p_);
    return out;
  }

  SparseMatrix G_, E_, GtG_;
  Options opts_;
  Eigen::Index p_ = 0, m_ = 0;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool ok_ = false;
};

}  // namespace sls
