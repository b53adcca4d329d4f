#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sls/errors.hpp"
#include "sls/plant.hpp"

namespace sls {

/// Finite impulse response transfer matrix G(z) = sum_{t=0}^{T} z^{-t} G[t].
///
/// Coefficients beyond the horizon are zero; coeff(t) may be queried for any
/// t >= 0.
class FirMatrix {
 public:
  FirMatrix() = default;

  FirMatrix(int rows, int cols, int horizon)
      : rows_(rows), cols_(cols), coeffs_(static_cast<std::size_t>(horizon + 1), Matrix::Zero(rows, cols)) {
    detail::require_domain(rows >= 0 && cols >= 0, "FirMatrix: negative shape");
    detail::require_domain(horizon >= 0, "FirMatrix: negative horizon");
  }

  explicit FirMatrix(std::vector<Matrix> coeffs) : coeffs_(std::move(coeffs)) {
    detail::require_domain(!coeffs_.empty(), "FirMatrix: needs at least one coefficient");
    rows_ = static_cast<int>(coeffs_.front().rows());
    cols_ = static_cast<int>(coeffs_.front().cols());
    for (const auto& c : coeffs_)
      detail::require_domain(c.rows() == rows_ && c.cols() == cols_,
                             "FirMatrix: coefficient shapes differ");
  }

  /// Constant (static) transfer matrix.
  static FirMatrix constant(const Matrix& m) { return FirMatrix(std::vector<Matrix>{m}); }

  /// z^{-k} I.
  static FirMatrix delay(int n, int k) {
    FirMatrix out(n, n, k);
    out[k].setIdentity();
    return out;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int horizon() const { return static_cast<int>(coeffs_.size()) - 1; }

  Matrix& operator[](int t) { return coeffs_.at(static_cast<std::size_t>(t)); }
  const Matrix& operator[](int t) const { return coeffs_.at(static_cast<std::size_t>(t)); }

  /// G[t], or zero beyond the horizon.
  Matrix coeff(int t) const {
    if (t < 0 || t > horizon()) return Matrix::Zero(rows_, cols_);
    return coeffs_[static_cast<std::size_t>(t)];
  }

  const std::vector<Matrix>& coefficients() const { return coeffs_; }

  bool is_strictly_proper() const { return coeffs_.front().isZero(0.0); }

  /// Entrywise max |G[t](i,j)| over all t.
  double max_abs() const {
    double m = 0.0;
    for (const auto& c : coeffs_)
      if (c.size() > 0) m = std::max(m, c.cwiseAbs().maxCoeff());
    return m;
  }

  /// sum_t ||G[t]||_F^2 (squared H2 norm of the FIR system).
  double h2_squared() const {
    double s = 0.0;
    for (const auto& c : coeffs_) s += c.squaredNorm();
    return s;
  }

  /// Same response with horizon extended (zero coefficients) or cut.
  FirMatrix with_horizon(int T) const {
    detail::require_domain(T >= 0, "FirMatrix: negative horizon");
    FirMatrix out(rows_, cols_, T);
    for (int t = 0; t <= std::min(T, horizon()); ++t) out[t] = coeffs_[static_cast<std::size_t>(t)];
    return out;
  }

  /// Drops trailing all-zero coefficients (keeps at least G[0]).
  FirMatrix trimmed() const {
    int T = horizon();
    while (T > 0 && coeffs_[static_cast<std::size_t>(T)].isZero(0.0)) --T;
    return with_horizon(T);
  }

  FirMatrix transpose() const {
    std::vector<Matrix> c;
    c.reserve(coeffs_.size());
    for (const auto& m : coeffs_) c.emplace_back(m.transpose());
    FirMatrix out(std::move(c));
    return out;
  }

  /// z^{-k} G.
  FirMatrix delayed(int k = 1) const {
    detail::require_domain(k >= 0, "FirMatrix: negative delay");
    FirMatrix out(rows_, cols_, horizon() + k);
    for (int t = 0; t <= horizon(); ++t) out[t + k] = coeffs_[static_cast<std::size_t>(t)];
    return out;
  }

  /// z G, defined when G[0] is zero up to `tol` (the dropped term).
  FirMatrix advanced(double tol = 0.0) const {
    const double lead = coeffs_.front().size() ? coeffs_.front().cwiseAbs().maxCoeff() : 0.0;
    if (lead > tol)
      throw DomainError("FirMatrix::advanced: leading coefficient is nonzero (z G improper)");
    if (horizon() == 0) return FirMatrix(rows_, cols_, 0);
    FirMatrix out(rows_, cols_, horizon() - 1);
    for (int t = 1; t <= horizon(); ++t) out[t - 1] = coeffs_[static_cast<std::size_t>(t)];
    return out;
  }

  FirMatrix& operator+=(const FirMatrix& o) {
    check_same_shape(o);
    if (o.horizon() > horizon()) *this = with_horizon(o.horizon());
    for (int t = 0; t <= o.horizon(); ++t) (*this)[t] += o[t];
    return *this;
  }
  FirMatrix& operator-=(const FirMatrix& o) { return *this += (-1.0) * o; }
  FirMatrix& operator*=(double s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }

  friend FirMatrix operator*(double s, FirMatrix g) { return g *= s; }
  friend FirMatrix operator*(FirMatrix g, double s) { return g *= s; }
  friend FirMatrix operator+(FirMatrix a, const FirMatrix& b) { return a += b; }
  friend FirMatrix operator-(FirMatrix a, const FirMatrix& b) { return a -= b; }
  friend FirMatrix operator-(FirMatrix a) { return a *= -1.0; }

  /// Convolution: (F G)[t] = sum_{tau=0}^{t} F[tau] G[t - tau]; horizon adds.
  friend FirMatrix operator*(const FirMatrix& f, const FirMatrix& g) {
    detail::require_domain(f.cols() == g.rows(), "FirMatrix product: inner dimensions differ");
    FirMatrix out(f.rows(), g.cols(), f.horizon() + g.horizon());
    for (int a = 0; a <= f.horizon(); ++a) {
      if (f[a].isZero(0.0)) continue;
      for (int b = 0; b <= g.horizon(); ++b) out[a + b].noalias() += f[a] * g[b];
    }
    return out;
  }

  friend FirMatrix operator*(const Matrix& m, const FirMatrix& g) {
    detail::require_domain(m.cols() == g.rows(), "Matrix * FirMatrix: inner dimensions differ");
    std::vector<Matrix> c;
    c.reserve(g.coeffs_.size());
    for (const auto& gc : g.coeffs_) c.emplace_back(m * gc);
    return FirMatrix(std::move(c));
  }

  friend FirMatrix operator*(const FirMatrix& g, const Matrix& m) {
    detail::require_domain(g.cols() == m.rows(), "FirMatrix * Matrix: inner dimensions differ");
    std::vector<Matrix> c;
    c.reserve(g.coeffs_.size());
    for (const auto& gc : g.coeffs_) c.emplace_back(gc * m);
    return FirMatrix(std::move(c));
  }

 private:
  void check_same_shape(const FirMatrix& o) const {
    detail::require_domain(rows_ == o.rows_ && cols_ == o.cols_, "FirMatrix: shape mismatch");
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<Matrix> coeffs_{Matrix()};
};

/// Keeps coefficients 0..T.
inline FirMatrix truncate(const FirMatrix& g, int T) { return g.with_horizon(std::min(T, g.horizon())); }

/// (zI - A) G for strictly proper G; coefficient t is G[t+1] - A G[t].
inline FirMatrix left_shift_apply(const Matrix& A, const FirMatrix& g, double tol = 0.0) {
  return g.advanced(tol) - A * g;
}

/// G (zI - A) for strictly proper G; coefficient t is G[t+1] - G[t] A.
inline FirMatrix right_shift_apply(const FirMatrix& g, const Matrix& A, double tol = 0.0) {
  return g.advanced(tol) - g * A;
}

}  // namespace sls
