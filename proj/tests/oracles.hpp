#pragma once
// Independent reference computations used only by the tests. None of these
// route through the library's solvers; they use Kronecker-product stacking,
// explicit KKT systems and brute-force enumeration instead.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "sls/fir.hpp"
#include "sls/plant.hpp"
#include "sls/response.hpp"
#include "sls/slc.hpp"

namespace oracle {

using sls::FirMatrix;
using sls::Matrix;
using sls::Vector;

// ---------------------------------------------------------------- random data

inline Matrix gaussian(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

/// Small integers in [-k, k]; ranks of such matrices are decided exactly.
inline Matrix small_integers(std::mt19937_64& rng, int r, int c, int k = 2) {
  std::uniform_int_distribution<int> u(-k, k);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline int rank(const Matrix& m, double tol = 1e-9) {
  if (m.size() == 0) return 0;
  Eigen::FullPivLU<Matrix> lu(m);
  lu.setThreshold(tol);
  return static_cast<int>(lu.rank());
}

// ------------------------------------------------------------ controllability

/// [B, AB, ..., A^{T-1} B]
inline Matrix controllability_matrix(const Matrix& A, const Matrix& B, int T) {
  Matrix C(A.rows(), B.cols() * T);
  Matrix blk = B;
  for (int k = 0; k < T; ++k) {
    C.middleCols(k * B.cols(), B.cols()) = blk;
    blk = A * blk;
  }
  return C;
}

/// Every initial state can be steered to zero in T steps:
/// range(A^T) lies inside range of the T-block controllability matrix.
inline bool steerable_in(const Matrix& A, const Matrix& B, int T) {
  const Matrix C = controllability_matrix(A, B, T);
  Matrix AT = Matrix::Identity(A.rows(), A.cols());
  for (int k = 0; k < T; ++k) AT = A * AT;
  Matrix both(A.rows(), C.cols() + A.cols());
  both << C, AT;
  return rank(both) == rank(C);
}

inline bool controllable(const Matrix& A, const Matrix& B) {
  return rank(controllability_matrix(A, B, static_cast<int>(A.rows()))) == A.rows();
}

inline bool observable(const Matrix& A, const Matrix& C) { return controllable(A.transpose(), C.transpose()); }

// ------------------------------------------------------------------- Riccati

/// Positive root of the scalar DARE with q = r = b = 1:
///   p = 1 + a^2 p - a^2 p^2 / (1 + p)   <=>   p^2 - a^2 p - 1 = 0.
inline double scalar_dare(double a) { return 0.5 * (a * a + std::sqrt(a * a * a * a + 4.0)); }

// -------------------------------------------------------------- stacked QPs

struct QpSolution {
  bool feasible = false;
  Vector z;
  double cost = 0.0;  // H2 norm, not squared
};

/// minimize ||G z - h||^2 s.t. E z = f by one solve of the full KKT system
/// with a complete orthogonal decomposition. Feasibility is decided by
/// comparing rank(E) with rank([E f]).
inline QpSolution solve_kkt(const Matrix& G, const Vector& h, const Matrix& E, const Vector& f) {
  const Eigen::Index p = G.cols(), m = E.rows();
  QpSolution out;
  Matrix Ef(E.rows(), E.cols() + 1);
  Ef << E, f;
  out.feasible = rank(E, 1e-10) == rank(Ef, 1e-10);
  Matrix K = Matrix::Zero(p + m, p + m);
  K.topLeftCorner(p, p) = G.transpose() * G;
  K.topRightCorner(p, m) = E.transpose();
  K.bottomLeftCorner(m, p) = E;
  Vector rhs(p + m);
  rhs << G.transpose() * h, f;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
  cod.setThreshold(1e-13);
  out.z = cod.solve(rhs).head(p);
  return out;
}

/// vec index helper: column-major vec of an r x c block at `offset`.
inline int vidx(int offset, int rows, int i, int j) { return offset + j * rows + i; }

/// Whole-problem state-feedback H2 synthesis, all columns at once.
/// Variables: vec R[1..T], vec M[1..T]; forbidden entries pinned to zero by
/// explicit equality rows.
inline QpSolution stacked_sf(const sls::PlantModel& P, const sls::SlcSet& slc, sls::SystemResponse* resp = nullptr) {
  const int n = P.n(), nu = P.nu(), T = slc.horizon();
  const int sr = n * n, sm = nu * n;
  const int p = T * (sr + sm);
  auto Roff = [&](int t) { return (t - 1) * sr; };
  auto Moff = [&](int t) { return T * sr + (t - 1) * sm; };
  const Matrix In = Matrix::Identity(n, n);
  const Matrix IA = kron(In, P.A()), IB = kron(In, P.B2());

  std::vector<Matrix> rows;
  std::vector<Vector> rhs;
  auto block = [&](int k) {
    rows.push_back(Matrix::Zero(k, p));
    rhs.push_back(Vector::Zero(k));
  };
  block(sr);  // vec R[1] = vec I
  rows.back().middleCols(Roff(1), sr) = Matrix::Identity(sr, sr);
  rhs.back() = Eigen::Map<const Vector>(In.data(), sr);
  for (int t = 1; t < T; ++t) {
    block(sr);
    rows.back().middleCols(Roff(t + 1), sr) = Matrix::Identity(sr, sr);
    rows.back().middleCols(Roff(t), sr) -= IA;
    rows.back().middleCols(Moff(t), sm) -= IB;
  }
  block(sr);
  rows.back().middleCols(Roff(T), sr) = IA;
  rows.back().middleCols(Moff(T), sm) = IB;
  for (int t = 1; t <= T; ++t) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i)
        if (!slc.R.allowed(t, i, j)) {
          block(1);
          rows.back()(0, vidx(Roff(t), n, i, j)) = 1.0;
        }
      for (int a = 0; a < nu; ++a)
        if (!slc.M.allowed(t, a, j)) {
          block(1);
          rows.back()(0, vidx(Moff(t), nu, a, j)) = 1.0;
        }
    }
  }
  Eigen::Index m = 0;
  for (const auto& r : rows) m += r.rows();
  Matrix E(m, p);
  Vector f(m);
  m = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    E.middleRows(m, rows[k].rows()) = rows[k];
    f.segment(m, rows[k].rows()) = rhs[k];
    m += rows[k].rows();
  }

  const int nz = P.nz(), nw = P.nw();
  Matrix G = Matrix::Zero(T * nz * nw, p);
  const Matrix GR = kron(P.B1().transpose(), P.C1()), GM = kron(P.B1().transpose(), P.D12());
  for (int t = 1; t <= T; ++t) {
    G.block((t - 1) * nz * nw, Roff(t), nz * nw, sr) = GR;
    G.block((t - 1) * nz * nw, Moff(t), nz * nw, sm) = GM;
  }
  QpSolution sol = solve_kkt(G, Vector::Zero(G.rows()), E, f);
  sol.cost = std::sqrt((G * sol.z).squaredNorm() + P.D11().squaredNorm());
  if (resp) {
    *resp = sls::SystemResponse{FirMatrix(n, n, T), FirMatrix(nu, n, T), std::nullopt, std::nullopt};
    for (int t = 1; t <= T; ++t) {
      resp->R[t] = Eigen::Map<const Matrix>(sol.z.data() + Roff(t), n, n);
      resp->M[t] = Eigen::Map<const Matrix>(sol.z.data() + Moff(t), nu, n);
    }
  }
  return sol;
}

/// Whole-problem output-feedback H2 synthesis with full FIR masks.
/// Variables: vec R[1..T], M[1..T], N[1..T], L[0..T].
inline QpSolution stacked_of(const sls::PlantModel& P, int T, sls::SystemResponse* resp = nullptr) {
  const int n = P.n(), nu = P.nu(), ny = P.ny();
  const int sR = n * n, sM = nu * n, sN = n * ny, sL = nu * ny;
  auto R = [&](int t) { return (t - 1) * sR; };
  auto M = [&](int t) { return T * sR + (t - 1) * sM; };
  auto N = [&](int t) { return T * (sR + sM) + (t - 1) * sN; };
  auto L = [&](int t) { return T * (sR + sM + sN) + t * sL; };
  const int p = T * (sR + sM + sN) + (T + 1) * sL;
  const Matrix& A = P.A();
  const Matrix& B2 = P.B2();
  const Matrix& C2 = P.C2();
  auto I = [](int k) -> Matrix { return Matrix::Identity(k, k); };

  std::vector<std::pair<Matrix, Vector>> eqs;
  auto add = [&](int k) -> std::pair<Matrix, Vector>& {
    eqs.emplace_back(Matrix::Zero(k, p), Vector::Zero(k));
    return eqs.back();
  };
  // Left: X[t+1] = A X[t] + B2 Y[t], X[1] = B2 Y[0] + rhs, A X[T] + B2 Y[T] = 0
  // Right: X[t+1] = X[t] A + Y[t] C2, same pattern.
  // (R,M): X[1]=I.  (N,L): N[1] = B2 L[0].  (R,N): R[1] = I.  (M,L): M[1] = L[0] C2.
  const Matrix In = I(n);
  const Vector vecI = Eigen::Map<const Vector>(In.data(), sR);
  {
    auto& e = add(sR);  // R[1] = I
    e.first.middleCols(R(1), sR) = I(sR);
    e.second = vecI;
  }
  for (int t = 1; t <= T; ++t) {
    auto& e = add(sR);  // R[t+1] - A R[t] - B2 M[t] = 0 (R[T+1] = 0)
    if (t < T) e.first.middleCols(R(t + 1), sR) = I(sR);
    e.first.middleCols(R(t), sR) -= kron(I(n), A);
    e.first.middleCols(M(t), sM) -= kron(I(n), B2);
  }
  {
    auto& e = add(sN);  // N[1] - B2 L[0] = 0
    e.first.middleCols(N(1), sN) = I(sN);
    e.first.middleCols(L(0), sL) = -kron(I(ny), B2);
  }
  for (int t = 1; t <= T; ++t) {
    auto& e = add(sN);  // N[t+1] - A N[t] - B2 L[t] = 0
    if (t < T) e.first.middleCols(N(t + 1), sN) = I(sN);
    e.first.middleCols(N(t), sN) -= kron(I(ny), A);
    e.first.middleCols(L(t), sL) -= kron(I(ny), B2);
  }
  for (int t = 1; t <= T; ++t) {
    auto& e = add(sR);  // R[t+1] - R[t] A - N[t] C2 = 0
    if (t < T) e.first.middleCols(R(t + 1), sR) = I(sR);
    e.first.middleCols(R(t), sR) -= kron(A.transpose(), I(n));
    e.first.middleCols(N(t), sN) -= kron(C2.transpose(), I(n));
  }
  {
    auto& e = add(sM);  // M[1] - L[0] C2 = 0
    e.first.middleCols(M(1), sM) = I(sM);
    e.first.middleCols(L(0), sL) = -kron(C2.transpose(), I(nu));
  }
  for (int t = 1; t <= T; ++t) {
    auto& e = add(sM);  // M[t+1] - M[t] A - L[t] C2 = 0
    if (t < T) e.first.middleCols(M(t + 1), sM) = I(sM);
    e.first.middleCols(M(t), sM) -= kron(A.transpose(), I(nu));
    e.first.middleCols(L(t), sL) -= kron(C2.transpose(), I(nu));
  }
  Eigen::Index m = 0;
  for (const auto& e : eqs) m += e.first.rows();
  Matrix E(m, p);
  Vector f(m);
  m = 0;
  for (const auto& e : eqs) {
    E.middleRows(m, e.first.rows()) = e.first;
    f.segment(m, e.first.rows()) = e.second;
    m += e.first.rows();
  }

  const int nz = P.nz(), nw = P.nw(), q = nz * nw;
  Matrix G = Matrix::Zero((T + 1) * q, p);
  Vector h = Vector::Zero((T + 1) * q);
  for (int t = 0; t <= T; ++t) {
    if (t >= 1) {
      G.block(t * q, R(t), q, sR) = kron(P.B1().transpose(), P.C1());
      G.block(t * q, M(t), q, sM) = kron(P.B1().transpose(), P.D12());
      G.block(t * q, N(t), q, sN) = kron(P.D21().transpose(), P.C1());
    }
    G.block(t * q, L(t), q, sL) = kron(P.D21().transpose(), P.D12());
  }
  h.head(q) = -Eigen::Map<const Vector>(P.D11().data(), q);
  QpSolution sol = solve_kkt(G, h, E, f);
  sol.cost = std::sqrt((G * sol.z - h).squaredNorm());
  if (resp) {
    *resp = sls::SystemResponse{FirMatrix(n, n, T), FirMatrix(nu, n, T), FirMatrix(n, ny, T), FirMatrix(nu, ny, T)};
    for (int t = 1; t <= T; ++t) {
      resp->R[t] = Eigen::Map<const Matrix>(sol.z.data() + R(t), n, n);
      resp->M[t] = Eigen::Map<const Matrix>(sol.z.data() + M(t), nu, n);
      (*resp->N)[t] = Eigen::Map<const Matrix>(sol.z.data() + N(t), n, ny);
    }
    for (int t = 0; t <= T; ++t) (*resp->L)[t] = Eigen::Map<const Matrix>(sol.z.data() + L(t), nu, ny);
  }
  return sol;
}

// ------------------------------------------------------- controller algebra

/// Impulse response K[0..H] of the beta-state controller run open loop:
/// z beta = z(I - zR) beta - zN y,  u = zM beta + L y, with y a unit impulse.
/// Full histories, no ring buffers.
inline std::vector<Matrix> controller_impulse(const sls::SystemResponse& r, int H) {
  const int n = r.R.rows(), nu = r.M.rows(), ny = r.N->cols();
  std::vector<Matrix> K(static_cast<std::size_t>(H + 1), Matrix::Zero(nu, ny));
  for (int k = 0; k < ny; ++k) {
    std::vector<Vector> beta(static_cast<std::size_t>(H + 2), Vector::Zero(n)), y(static_cast<std::size_t>(H + 1), Vector::Zero(ny));
    y[0](k) = 1.0;
    for (int t = 0; t <= H; ++t) {
      Vector u = Vector::Zero(nu), next = Vector::Zero(n);
      for (int s = 0; s <= t; ++s) {
        u += r.M.coeff(s + 1) * beta[static_cast<std::size_t>(t - s)] + r.L->coeff(s) * y[static_cast<std::size_t>(t - s)];
        next += -r.R.coeff(s + 2) * beta[static_cast<std::size_t>(t - s)] - r.N->coeff(s + 1) * y[static_cast<std::size_t>(t - s)];
      }
      K[static_cast<std::size_t>(t)].col(k) = u;
      beta[static_cast<std::size_t>(t + 1)] = next;
    }
  }
  return K;
}

/// Q = K (I - P22 K)^{-1} as a power series: Q = K + K P22 Q, with P22[t] = C2 A^{t-1} B2.
inline std::vector<Matrix> youla_series(const std::vector<Matrix>& K, const Matrix& A, const Matrix& B2,
                                        const Matrix& C2) {
  const int H = static_cast<int>(K.size()) - 1;
  std::vector<Matrix> P(static_cast<std::size_t>(H + 1), Matrix::Zero(C2.rows(), B2.cols()));
  Matrix Ak = Matrix::Identity(A.rows(), A.cols());
  for (int t = 1; t <= H; ++t) {
    P[static_cast<std::size_t>(t)] = C2 * Ak * B2;
    Ak = A * Ak;
  }
  std::vector<Matrix> KP(static_cast<std::size_t>(H + 1), Matrix::Zero(K[0].rows(), B2.cols()));
  for (int t = 0; t <= H; ++t)
    for (int s = 0; s <= t; ++s) KP[static_cast<std::size_t>(t)] += K[static_cast<std::size_t>(s)] * P[static_cast<std::size_t>(t - s)];
  std::vector<Matrix> Q(static_cast<std::size_t>(H + 1));
  for (int t = 0; t <= H; ++t) {
    Matrix q = K[static_cast<std::size_t>(t)];
    for (int s = 1; s <= t; ++s) q += KP[static_cast<std::size_t>(s)] * Q[static_cast<std::size_t>(t - s)];
    Q[static_cast<std::size_t>(t)] = q;
  }
  return Q;
}

// ---------------------------------------------------------------------- QI

/// Brute force: for all (i, j), if some path i <- k <- l <- j through K, P, K
/// exists then K(i, j) must be allowed.
inline bool qi_brute(const sls::BoolArray& K, const sls::BoolArray& P) {
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      bool reach = false;
      for (Eigen::Index a = 0; a < K.cols() && !reach; ++a)
        for (Eigen::Index b = 0; b < P.cols() && !reach; ++b) reach = K(i, a) && P(a, b) && K(b, j);
      if (reach && !K(i, j)) return false;
    }
  return true;
}

}  // namespace oracle
