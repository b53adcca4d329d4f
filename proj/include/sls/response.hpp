#pragma once

#include <algorithm>
#include <optional>
#include <string>

#include "sls/column_problem.hpp"
#include "sls/errors.hpp"
#include "sls/fir.hpp"
#include "sls/plant.hpp"

namespace sls {

/// Closed-loop maps from (delta_x, delta_y) to (x, u):
///   x = R dx + N dy,   u = M dx + L dy.
/// State-feedback responses carry only R and M.
struct SystemResponse {
  FirMatrix R;
  FirMatrix M;
  std::optional<FirMatrix> N;
  std::optional<FirMatrix> L;

  bool is_output_feedback() const { return N.has_value() && L.has_value(); }

  int horizon() const {
    int T = std::max(R.horizon(), M.horizon());
    if (N) T = std::max(T, N->horizon());
    if (L) T = std::max(T, L->horizon());
    return T;
  }

  /// All blocks padded to a common horizon.
  SystemResponse padded(int T) const {
    SystemResponse out{R.with_horizon(T), M.with_horizon(T), std::nullopt, std::nullopt};
    if (N) out.N = N->with_horizon(T);
    if (L) out.L = L->with_horizon(T);
    return out;
  }
};

namespace detail {

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Max defect of  (zI - A) X - B Y = I_or_0,  X, Y strictly proper, FIR horizon T:
///   X[1] - B Y[0] = I_or_0,  X[t+1] - A X[t] - B Y[t] = 0,  A X[T] + B Y[T] = 0.
/// Y may be proper (Y[0] enters the z^0 coefficient).
inline double left_defect(const Matrix& A, const Matrix& B, const FirMatrix& X,
                          const FirMatrix& Y, const Matrix& rhs0, int T) {
  double d = max_abs(X.coeff(0));
  d = std::max(d, max_abs(X.coeff(1) - B * Y.coeff(0) - rhs0));
  for (int t = 1; t <= T; ++t)
    d = std::max(d, max_abs(X.coeff(t + 1) - A * X.coeff(t) - B * Y.coeff(t)));
  return d;
}

/// Max defect of  X (zI - A) - Y C = I_or_0 (the transposed recursion).
inline double right_defect(const Matrix& A, const Matrix& C, const FirMatrix& X,
                           const FirMatrix& Y, const Matrix& rhs0, int T) {
  double d = max_abs(X.coeff(0));
  d = std::max(d, max_abs(X.coeff(1) - Y.coeff(0) * C - rhs0));
  for (int t = 1; t <= T; ++t)
    d = std::max(d, max_abs(X.coeff(t + 1) - X.coeff(t) * A - Y.coeff(t) * C));
  return d;
}

}  // namespace detail

/// Achievability residual of a state-feedback response: entrywise max defect of
///   [zI - A, -B2] [R; M] = I,  R, M strictly proper, FIR closure at the horizon.
inline double sf_residual(const PlantModel& plant, const SystemResponse& resp) {
  detail::require_domain(resp.R.rows() == plant.n() && resp.R.cols() == plant.n(),
                         "sf_residual: R must be n x n");
  detail::require_domain(resp.M.rows() == plant.nu() && resp.M.cols() == plant.n(),
                         "sf_residual: M must be nu x n");
  const int T = resp.horizon();
  const Matrix I = Matrix::Identity(plant.n(), plant.n());
  double d = detail::left_defect(plant.A(), plant.B2(), resp.R, resp.M, I, T);
  return std::max(d, detail::max_abs(resp.M.coeff(0)));
}

/// Estimation-side residual:  [R N] [zI - A; -C2] = I  with R, N strictly proper.
inline double se_residual(const Matrix& A, const Matrix& C2, const FirMatrix& R,
                          const FirMatrix& N) {
  detail::require_domain(R.rows() == A.rows() && R.cols() == A.rows(), "se_residual: R shape");
  detail::require_domain(N.rows() == A.rows() && N.cols() == C2.rows(), "se_residual: N shape");
  const int T = std::max(R.horizon(), N.horizon());
  const Matrix I = Matrix::Identity(A.rows(), A.rows());
  double d = detail::right_defect(A, C2, R, N, I, T);
  return std::max(d, detail::max_abs(N.coeff(0)));
}

/// Achievability residual of an output-feedback response (both affine
/// equations plus strict properness of R, M, N; L may be proper).
inline double of_residual(const PlantModel& plant, const SystemResponse& resp) {
  if (!resp.is_output_feedback())
    throw DomainError("of_residual: response has no N/L blocks");
  const auto& N = *resp.N;
  const auto& L = *resp.L;
  const int n = plant.n(), nu = plant.nu(), ny = plant.ny();
  detail::require_domain(resp.R.rows() == n && resp.R.cols() == n, "of_residual: R shape");
  detail::require_domain(resp.M.rows() == nu && resp.M.cols() == n, "of_residual: M shape");
  detail::require_domain(N.rows() == n && N.cols() == ny, "of_residual: N shape");
  detail::require_domain(L.rows() == nu && L.cols() == ny, "of_residual: L shape");

  const int T = resp.horizon();
  const Matrix I = Matrix::Identity(n, n);
  const auto& A = plant.A();
  double d = 0.0;
  d = std::max(d, detail::left_defect(A, plant.B2(), resp.R, resp.M, I, T));
  d = std::max(d, detail::left_defect(A, plant.B2(), N, L, Matrix::Zero(n, ny), T));
  d = std::max(d, detail::right_defect(A, plant.C2(), resp.R, N, I, T));
  d = std::max(d, detail::right_defect(A, plant.C2(), resp.M, L, Matrix::Zero(nu, n), T));
  d = std::max(d, detail::max_abs(resp.M.coeff(0)));
  d = std::max(d, detail::max_abs(N.coeff(0)));
  return d;
}

/// Feasibility outcome of the FIR achievability problem.
struct FeasibilityResult {
  bool feasible = false;
  double residual = 0.0;
  FirMatrix R;                ///< witness (n x n)
  FirMatrix second;           ///< M (nu x n) for controllability, N (n x ny) for observability
};

/// Feasibility of [zI - A, -B2][R; M] = I with R, M in F_T (strictly proper):
/// every state can be driven to the origin in T steps. Solved column by
/// column with the minimum-norm equality-constrained least-squares kernel.
inline FeasibilityResult is_T_step_controllable(const Matrix& A, const Matrix& B2, int T,
                                                double tol = 1e-8) {
  detail::require_domain(T >= 1, "is_T_step_controllable: T must be >= 1");
  detail::require_domain(A.rows() == A.cols() && B2.rows() == A.rows(),
                         "is_T_step_controllable: shape mismatch");
  const int n = static_cast<int>(A.rows());
  const int nu = static_cast<int>(B2.cols());
  const PlantModel plant = PlantModel::state_feedback(
      A, Matrix::Identity(n, n), B2, Matrix::Zero(0, n), Matrix::Zero(0, n), Matrix::Zero(0, nu));
  const SfColumnProblem problem(plant, ColumnPattern::full(n, nu, T), /*with_objective=*/false);
  const SfColumnSolver solver(problem, std::numeric_limits<std::size_t>::max());

  FeasibilityResult out;
  out.R = FirMatrix(n, n, T);
  out.second = FirMatrix(nu, n, T);
  out.feasible = true;
  for (int j = 0; j < n; ++j) {
    const EqLsResult col = solver.solve(j, tol);
    out.residual = std::max(out.residual, col.equality_residual);
    out.feasible = out.feasible && col.feasible;
    problem.scatter(col.x, j, out.R, out.second);
  }
  return out;
}

/// Dual test: [R N][zI - A; -C2] = I with R, N in F_T. Solved as
/// controllability of (A^T, C2^T) with the witness transposed back.
inline FeasibilityResult is_T_step_observable(const Matrix& A, const Matrix& C2, int T,
                                              double tol = 1e-8) {
  FeasibilityResult dual = is_T_step_controllable(A.transpose(), C2.transpose(), T, tol);
  dual.R = dual.R.transpose();
  dual.second = dual.second.transpose();
  return dual;
}

/// Combines a state-feedback pair {R1, M1} and an estimation pair {R2, N2}
/// into an output-feedback response:
///   R = R1 + R2 - R1 (zI-A) R2      M = M1 - M1 (zI-A) R2
///   N = N2 - R1 (zI-A) N2           L = -M1 (zI-A) N2
inline SystemResponse compose_output_feedback(const Matrix& A, const Matrix& B2,
                                              const Matrix& C2, const FirMatrix& R1,
                                              const FirMatrix& M1, const FirMatrix& R2,
                                              const FirMatrix& N2, double tol = 1e-8) {
  const int n = static_cast<int>(A.rows());
  const PlantModel sf = PlantModel::state_feedback(A, Matrix::Identity(n, n), B2,
                                                   Matrix::Zero(0, n), Matrix::Zero(0, n),
                                                   Matrix::Zero(0, B2.cols()));
  const double r1 = sf_residual(sf, SystemResponse{R1, M1, std::nullopt, std::nullopt});
  if (r1 > tol)
    throw PreconditionError("compose_output_feedback: state-feedback input residual " +
                            std::to_string(r1));
  const double r2 = se_residual(A, C2, R2, N2);
  if (r2 > tol)
    throw PreconditionError("compose_output_feedback: estimation input residual " +
                            std::to_string(r2));

  const FirMatrix shifted_R2 = left_shift_apply(A, R2);  // (zI - A) R2
  const FirMatrix shifted_N2 = left_shift_apply(A, N2);  // (zI - A) N2
  SystemResponse out;
  out.R = R1 + R2 - R1 * shifted_R2;
  out.M = M1 - M1 * shifted_R2;
  out.N = N2 - R1 * shifted_N2;
  out.L = -(M1 * shifted_N2);
  const int T = out.horizon();
  return out.padded(T);
}

}  // namespace sls
