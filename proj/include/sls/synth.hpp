#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <omp.h>

#include "sls/column_problem.hpp"
#include "sls/eq_ls.hpp"
#include "sls/errors.hpp"
#include "sls/fir.hpp"
#include "sls/plant.hpp"
#include "sls/response.hpp"
#include "sls/slc.hpp"

namespace sls {

enum class Mode { StateFeedback, OutputFeedback };

struct SynthesisProblem {
  PlantModel plant;
  SlcSet slc;
  Mode mode = Mode::StateFeedback;
};

struct SynthesisOptions {
  double feasibility_tol = 1e-8;
  int threads = 1;
  /// Column problems with at most this many variables use the dense kernel.
  std::size_t dense_limit = 400;
  /// Output-feedback size guard (decision variables).
  std::size_t of_variable_budget = 40000;
};

struct ColumnStatus {
  bool feasible = true;
  double residual = 0.0;  ///< equality residual (infeasibility certificate)
};

struct SynthesisResult {
  SystemResponse response;
  double cost = 0.0;  ///< H2 norm (not squared); +inf when infeasible
  std::vector<ColumnStatus> columns;
  double wall_time_ms = 0.0;
  bool degenerate = false;

  bool feasible() const {
    for (const auto& c : columns)
      if (!c.feasible) return false;
    return true;
  }
  int columns_infeasible() const {
    int k = 0;
    for (const auto& c : columns) k += c.feasible ? 0 : 1;
    return k;
  }
};

/// H2 norm of [C1 D12][R N; M L][B1; D21] + D11 for an FIR response:
///   sqrt( sum_{t>=1} ||C1 R[t] B1 + C1 N[t] D21 + D12 M[t] B1 + D12 L[t] D21||_F^2
///         + ||D12 L[0] D21 + D11||_F^2 ).
inline double h2_cost(const PlantModel& plant, const SystemResponse& resp) {
  const bool of = resp.is_output_feedback();
  const int T = resp.horizon();
  double total = 0.0;
  for (int t = 1; t <= T; ++t) {
    Matrix cl = plant.C1() * resp.R.coeff(t) * plant.B1() + plant.D12() * resp.M.coeff(t) * plant.B1();
    if (of)
      cl += plant.C1() * resp.N->coeff(t) * plant.D21() + plant.D12() * resp.L->coeff(t) * plant.D21();
    total += cl.squaredNorm();
  }
  Matrix feed = plant.D11();
  if (of) feed += plant.D12() * resp.L->coeff(0) * plant.D21();
  total += feed.squaredNorm();
  return std::sqrt(total);
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

/// Per-disturbance weights w_j with B1 B1^T = diag(w); the column split of the
/// state-feedback objective needs this to be diagonal.
inline Vector disturbance_weights(const PlantModel& plant) {
  const Matrix W = plant.B1() * plant.B1().transpose();
  const Matrix off = W - Matrix(W.diagonal().asDiagonal());
  if (off.size() && off.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, W.cwiseAbs().maxCoeff()))
    throw DomainError(
        "synthesize_sf_h2: B1 B1^T must be diagonal for the column decomposition");
  return W.diagonal();
}

}  // namespace detail

/// State-feedback H2 synthesis over the achievability subspace intersected
/// with the SLC masks. Each column j of {R, M} is an independent
/// equality-constrained least-squares problem; columns with identical masks
/// share one factorization. Columns run in parallel.
inline SynthesisResult synthesize_sf_h2(const SynthesisProblem& problem,
                                        const SynthesisOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  const PlantModel& plant = problem.plant;
  const SlcSet& slc = problem.slc;
  if (problem.mode != Mode::StateFeedback)
    throw DomainError("synthesize_sf_h2: problem is not in state-feedback mode");
  if (!plant.is_state_feedback())
    throw DomainError("synthesize_sf_h2: plant is not state feedback (C2 = I, D21 = 0, D22 = 0)");
  const int T = slc.horizon();
  detail::require_domain(T >= 1, "synthesize_sf_h2: horizon must be >= 1");
  detail::require_domain(slc.R.rows() == plant.n() && slc.R.cols() == plant.n() &&
                             slc.M.rows() == plant.nu() && slc.M.cols() == plant.n(),
                         "synthesize_sf_h2: mask shapes do not match the plant");
  const Vector weights = detail::disturbance_weights(plant);

  const int n = plant.n();
  // Group columns by pattern.
  std::vector<ColumnPattern> patterns;
  std::vector<int> group_of(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    ColumnPattern p = column_pattern(slc, j);
    auto it = std::find(patterns.begin(), patterns.end(), p);
    if (it == patterns.end()) {
      group_of[static_cast<std::size_t>(j)] = static_cast<int>(patterns.size());
      patterns.push_back(std::move(p));
    } else {
      group_of[static_cast<std::size_t>(j)] = static_cast<int>(it - patterns.begin());
    }
  }
  std::vector<std::vector<int>> members(patterns.size());
  for (int j = 0; j < n; ++j) members[static_cast<std::size_t>(group_of[static_cast<std::size_t>(j)])].push_back(j);

  SynthesisResult result;
  result.response = SystemResponse{FirMatrix(n, n, T), FirMatrix(plant.nu(), n, T), std::nullopt, std::nullopt};
  result.columns.assign(static_cast<std::size_t>(n), ColumnStatus{});
  std::vector<double> column_cost(static_cast<std::size_t>(n), 0.0);
  std::vector<char> column_degenerate(static_cast<std::size_t>(n), 0);

  const int groups = static_cast<int>(patterns.size());
  const int threads = std::max(1, opts.threads);
  std::vector<std::unique_ptr<SfColumnProblem>> built(static_cast<std::size_t>(groups));
  std::vector<std::unique_ptr<SfColumnSolver>> solvers(static_cast<std::size_t>(groups));

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int g = 0; g < groups; ++g) {
    built[static_cast<std::size_t>(g)] = std::make_unique<SfColumnProblem>(plant, patterns[static_cast<std::size_t>(g)]);
    solvers[static_cast<std::size_t>(g)] = std::make_unique<SfColumnSolver>(*built[static_cast<std::size_t>(g)], opts.dense_limit);
  }

  // Each column writes a disjoint column of R and M.
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int j = 0; j < n; ++j) {
    const int g = group_of[static_cast<std::size_t>(j)];
    const auto& prob = *built[static_cast<std::size_t>(g)];
    const EqLsResult col = solvers[static_cast<std::size_t>(g)]->solve(j, opts.feasibility_tol);
    result.columns[static_cast<std::size_t>(j)] = ColumnStatus{col.feasible, col.equality_residual};
    column_degenerate[static_cast<std::size_t>(j)] = col.degenerate ? 1 : 0;
    if (col.feasible) {
      prob.scatter(col.x, j, result.response.R, result.response.M);
      column_cost[static_cast<std::size_t>(j)] = (prob.G() * col.x).squaredNorm();
    }
  }

  if (result.feasible()) {
    double total = plant.D11().squaredNorm();
    for (int j = 0; j < n; ++j) total += weights(j) * column_cost[static_cast<std::size_t>(j)];
    result.cost = std::sqrt(total);
  } else {
    result.cost = std::numeric_limits<double>::infinity();
  }
  for (char d : column_degenerate) result.degenerate = result.degenerate || d;
  result.wall_time_ms = detail::elapsed_ms(start);
  return result;
}

namespace detail {

/// Variable bookkeeping for the stacked output-feedback problem.
class OfLayout {
 public:
  OfLayout(const SlcSet& slc, int T) : T_(T) {
    add_block(slc.R, 1, r_);
    add_block(slc.M, 1, m_);
    add_block(*slc.N, 1, n_);
    add_block(*slc.L, 0, l_);
  }

  int size() const { return count_; }
  /// Variable index of block[t](i, j); -1 when fixed to zero.
  int R(int t, int i, int j) const { return lookup(r_, t, i, j); }
  int M(int t, int i, int j) const { return lookup(m_, t, i, j); }
  int N(int t, int i, int j) const { return lookup(n_, t, i, j); }
  int L(int t, int i, int j) const { return lookup(l_, t, i, j); }

  void scatter(const Vector& x, SystemResponse& resp) const {
    fill(x, r_, resp.R);
    fill(x, m_, resp.M);
    fill(x, n_, *resp.N);
    fill(x, l_, *resp.L);
  }

 private:
  struct Block {
    int rows = 0, cols = 0;
    std::vector<Eigen::MatrixXi> index;  // [t] -> variable index or -1
  };

  void add_block(const SupportMask& mask, int first, Block& b) {
    b.rows = mask.rows();
    b.cols = mask.cols();
    b.index.assign(static_cast<std::size_t>(T_ + 1), Eigen::MatrixXi::Constant(b.rows, b.cols, -1));
    for (int t = first; t <= T_; ++t)
      for (int j = 0; j < b.cols; ++j)
        for (int i = 0; i < b.rows; ++i)
          if (mask.allowed(t, i, j)) b.index[static_cast<std::size_t>(t)](i, j) = count_++;
  }

  static int lookup(const Block& b, int t, int i, int j) {
    if (t < 0 || t >= static_cast<int>(b.index.size())) return -1;
    return b.index[static_cast<std::size_t>(t)](i, j);
  }

  static void fill(const Vector& x, const Block& b, FirMatrix& out) {
    for (std::size_t t = 0; t < b.index.size(); ++t)
      for (int j = 0; j < b.cols; ++j)
        for (int i = 0; i < b.rows; ++i) {
          const int k = b.index[t](i, j);
          if (k >= 0) out[static_cast<int>(t)](i, j) = x(k);
        }
  }

  int T_;
  int count_ = 0;
  Block r_, m_, n_, l_;
};

/// Accumulates sparse rows  sum coeff * var = rhs, skipping fixed-zero variables.
class RowBuilder {
 public:
  void add(int var, double coeff) {
    if (var >= 0 && coeff != 0.0) current_.emplace_back(var, coeff);
  }
  /// Closes the row; rows without variables are kept only as infeasibility
  /// evidence (nonzero rhs).
  void finish(double rhs) {
    if (current_.empty()) {
      orphan_defect_ = std::max(orphan_defect_, std::abs(rhs));
      return;
    }
    for (const auto& [v, c] : current_) trip_.emplace_back(rows_, v, c);
    rhs_.push_back(rhs);
    ++rows_;
    current_.clear();
  }
  SparseMatrix matrix(int cols) const {
    SparseMatrix m(rows_, cols);
    m.setFromTriplets(trip_.begin(), trip_.end());
    return m;
  }
  Vector rhs() const { return Eigen::Map<const Vector>(rhs_.data(), static_cast<Eigen::Index>(rhs_.size())); }
  double orphan_defect() const { return orphan_defect_; }

 private:
  std::vector<std::pair<int, double>> current_;
  std::vector<Eigen::Triplet<double>> trip_;
  std::vector<double> rhs_;
  int rows_ = 0;
  double orphan_defect_ = 0.0;
};

}  // namespace detail

/// Output-feedback H2 synthesis as one stacked equality-constrained least
/// squares over all mask-allowed entries of {R, M, N, L}.
inline SynthesisResult synthesize_of_h2(const SynthesisProblem& problem,
                                        const SynthesisOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  const PlantModel& plant = problem.plant;
  const SlcSet& slc = problem.slc;
  if (problem.mode != Mode::OutputFeedback)
    throw DomainError("synthesize_of_h2: problem is not in output-feedback mode");
  if (!slc.has_output_blocks())
    throw DomainError("synthesize_of_h2: constraint set has no N/L masks");
  const int T = slc.horizon();
  detail::require_domain(T >= 1, "synthesize_of_h2: horizon must be >= 1");
  const int n = plant.n(), nu = plant.nu(), ny = plant.ny(), nz = plant.nz(), nw = plant.nw();
  detail::require_domain(slc.R.rows() == n && slc.R.cols() == n && slc.M.rows() == nu &&
                             slc.M.cols() == n && slc.N->rows() == n && slc.N->cols() == ny &&
                             slc.L->rows() == nu && slc.L->cols() == ny,
                         "synthesize_of_h2: mask shapes do not match the plant");

  const detail::OfLayout vars(slc, T);
  if (static_cast<std::size_t>(vars.size()) > opts.of_variable_budget)
    throw DomainError("synthesize_of_h2: " + std::to_string(vars.size()) +
                      " variables exceed the dense-solve budget");

  const Matrix& A = plant.A();
  const Matrix& B2 = plant.B2();
  const Matrix& C2 = plant.C2();
  detail::RowBuilder eq;

  // Left equations, column by column: X[1] - B2 Y[0] = rhs, X[t+1] - A X[t] - B2 Y[t] = 0,
  // A X[T] + B2 Y[T] = 0, for (X, Y) = (R, M) with rhs I and (N, L) with rhs 0.
  auto left = [&](auto X, auto Y, int cols, bool identity_rhs) {
    for (int j = 0; j < cols; ++j)
      for (int t = 0; t <= T; ++t)
        for (int i = 0; i < n; ++i) {
          eq.add(X(t + 1, i, j), 1.0);
          for (int k = 0; k < n; ++k) eq.add(X(t, k, j), -A(i, k));
          for (int a = 0; a < nu; ++a) eq.add(Y(t, a, j), -B2(i, a));
          eq.finish(identity_rhs && t == 0 && i == j ? 1.0 : 0.0);
        }
  };
  // Right equations, row by row: X[t+1] - X[t] A - Y[t] C2 = rhs (t = 0) or 0.
  auto right = [&](auto X, auto Y, int rows, bool identity_rhs) {
    for (int i = 0; i < rows; ++i)
      for (int t = 0; t <= T; ++t)
        for (int j = 0; j < n; ++j) {
          eq.add(X(t + 1, i, j), 1.0);
          for (int k = 0; k < n; ++k) eq.add(X(t, i, k), -A(k, j));
          for (int s = 0; s < ny; ++s) eq.add(Y(t, i, s), -C2(s, j));
          eq.finish(identity_rhs && t == 0 && i == j ? 1.0 : 0.0);
        }
  };
  auto R = [&](int t, int i, int j) { return vars.R(t, i, j); };
  auto M = [&](int t, int i, int j) { return vars.M(t, i, j); };
  auto N = [&](int t, int i, int j) { return vars.N(t, i, j); };
  auto L = [&](int t, int i, int j) { return vars.L(t, i, j); };
  left(R, M, n, true);
  left(N, L, ny, false);
  right(R, N, n, true);
  right(M, L, nu, false);

  // Objective rows: entry (p, q) of the closed loop at each t.
  detail::RowBuilder obj;
  std::vector<Eigen::Triplet<double>> gtrip;
  std::vector<double> h;
  int grow = 0;
  for (int t = 0; t <= T; ++t) {
    for (int q = 0; q < nw; ++q)
      for (int p = 0; p < nz; ++p) {
        auto put = [&](int var, double c) {
          if (var >= 0 && c != 0.0) gtrip.emplace_back(grow, var, c);
        };
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) put(vars.R(t, i, k), plant.C1()(p, i) * plant.B1()(k, q));
        for (int a = 0; a < nu; ++a)
          for (int k = 0; k < n; ++k) put(vars.M(t, a, k), plant.D12()(p, a) * plant.B1()(k, q));
        for (int i = 0; i < n; ++i)
          for (int s = 0; s < ny; ++s) put(vars.N(t, i, s), plant.C1()(p, i) * plant.D21()(s, q));
        for (int a = 0; a < nu; ++a)
          for (int s = 0; s < ny; ++s) put(vars.L(t, a, s), plant.D12()(p, a) * plant.D21()(s, q));
        h.push_back(t == 0 ? -plant.D11()(p, q) : 0.0);
        ++grow;
      }
  }
  SparseMatrix G(grow, vars.size());
  G.setFromTriplets(gtrip.begin(), gtrip.end());
  const Vector hv = Eigen::Map<const Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
  const SparseMatrix E = eq.matrix(vars.size());
  const Vector f = eq.rhs();

  EqLsResult sol;
  if (static_cast<std::size_t>(vars.size()) <= opts.dense_limit * 4)
    sol = solve_eq_ls(Matrix(G), hv, Matrix(E), f, opts.feasibility_tol);
  else
    sol = SparseEqLs(G, E).solve(hv, f, opts.feasibility_tol);

  const double certificate = std::max(sol.equality_residual, eq.orphan_defect());
  const bool feasible = certificate <= opts.feasibility_tol;

  SynthesisResult result;
  result.response = SystemResponse{FirMatrix(n, n, T), FirMatrix(nu, n, T), FirMatrix(n, ny, T),
                                   FirMatrix(nu, ny, T)};
  result.columns.assign(static_cast<std::size_t>(n), ColumnStatus{feasible, certificate});
  result.degenerate = sol.degenerate;
  if (feasible) {
    vars.scatter(sol.x, result.response);
    result.cost = h2_cost(plant, result.response);
  } else {
    result.cost = std::numeric_limits<double>::infinity();
  }
  result.wall_time_ms = detail::elapsed_ms(start);
  return result;
}

inline SynthesisResult synthesize(const SynthesisProblem& problem, const SynthesisOptions& opts = {}) {
  return problem.mode == Mode::StateFeedback ? synthesize_sf_h2(problem, opts)
                                             : synthesize_of_h2(problem, opts);
}

/// Infinite-horizon optimal H2 (LQR) cost by iterating the Riccati recursion
///   P <- Q + A^T P A - (A^T P B2 + S)(R + B2^T P B2)^{-1}(B2^T P A + S^T)
/// from P = Q, with Q = C1^T C1, R = D12^T D12, S = C1^T D12. Returns
/// sqrt(trace(B1^T P B1) + ||D11||_F^2), the same accounting as h2_cost.
inline double centralized_baseline(const PlantModel& plant, double tol = 1e-10,
                                   int max_iterations = 100000) {
  if (!plant.is_state_feedback())
    throw DomainError("centralized_baseline: plant is not state feedback");
  const Matrix& A = plant.A();
  const Matrix& B = plant.B2();
  const Matrix Q = plant.C1().transpose() * plant.C1();
  const Matrix Rw = plant.D12().transpose() * plant.D12();
  const Matrix S = plant.C1().transpose() * plant.D12();
  Matrix P = Q;
  for (int it = 0; it < max_iterations; ++it) {
    const Matrix BtPA = B.transpose() * P * A + S.transpose();
    const Matrix H = Rw + B.transpose() * P * B;
    Eigen::LDLT<Matrix> ldlt(H);
    Matrix next = Q + A.transpose() * P * A - BtPA.transpose() * ldlt.solve(BtPA);
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) break;
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (change <= tol * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      const double cost2 = (plant.B1().transpose() * P * plant.B1()).trace() + plant.D11().squaredNorm();
      return std::sqrt(cost2);
    }
  }
  throw DomainError("centralized_baseline: no stabilizing solution");
}

}  // namespace sls
