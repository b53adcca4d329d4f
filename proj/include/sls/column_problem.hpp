#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <vector>

#include "sls/eq_ls.hpp"
#include "sls/plant.hpp"

namespace sls {

/// Which entries of column j of R[t] and M[t] (t = 1..T) are decision
/// variables; everything else is fixed to zero.
struct ColumnPattern {
  int horizon = 0;
  std::vector<std::vector<int>> state_rows;  ///< [t-1] -> allowed rows of R[t] e_j
  std::vector<std::vector<int>> input_rows;  ///< [t-1] -> allowed rows of M[t] e_j

  static ColumnPattern full(int n, int nu, int T) {
    ColumnPattern p;
    p.horizon = T;
    std::vector<int> all_states(static_cast<std::size_t>(n));
    std::vector<int> all_inputs(static_cast<std::size_t>(nu));
    for (int i = 0; i < n; ++i) all_states[static_cast<std::size_t>(i)] = i;
    for (int a = 0; a < nu; ++a) all_inputs[static_cast<std::size_t>(a)] = a;
    p.state_rows.assign(static_cast<std::size_t>(T), all_states);
    p.input_rows.assign(static_cast<std::size_t>(T), all_inputs);
    return p;
  }

  friend bool operator==(const ColumnPattern&, const ColumnPattern&) = default;
};

/// Equality-constrained least-squares form of one column of the
/// state-feedback achievability constraints
///
///   R[1] e_j = e_j
///   R[t+1] e_j = A R[t] e_j + B2 M[t] e_j      1 <= t < T
///   0 = A R[T] e_j + B2 M[T] e_j                (FIR closure)
///
/// with objective sum_t ||C1 R[t] e_j + D12 M[t] e_j||^2. Constraint rows that
/// touch no variable are dropped; `pinned_row` reports where the right-hand
/// side e_j lands so callers can detect a forced 0 = 1.
class SfColumnProblem {
 public:
  SfColumnProblem(const PlantModel& plant, ColumnPattern pattern, bool with_objective = true)
      : pattern_(std::move(pattern)), n_(plant.n()), nu_(plant.nu()) {
    const int T = pattern_.horizon;
    detail::require_domain(T >= 1, "column problem: horizon must be >= 1");
    detail::require_domain(static_cast<int>(pattern_.state_rows.size()) == T &&
                               static_cast<int>(pattern_.input_rows.size()) == T,
                           "column problem: pattern horizon mismatch");

    r_index_.assign(static_cast<std::size_t>(T), std::vector<int>(static_cast<std::size_t>(n_), -1));
    m_index_.assign(static_cast<std::size_t>(T), std::vector<int>(static_cast<std::size_t>(nu_), -1));
    int v = 0;
    for (int t = 0; t < T; ++t) {
      for (int i : pattern_.state_rows[static_cast<std::size_t>(t)])
        r_index_[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = v++;
      for (int a : pattern_.input_rows[static_cast<std::size_t>(t)])
        m_index_[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)] = v++;
    }
    num_vars_ = v;

    const SparseMatrix A = plant.A().sparseView();
    const SparseMatrix B2 = plant.B2().sparseView();
    const Eigen::SparseMatrix<double, Eigen::RowMajor> Ar = A;
    const Eigen::SparseMatrix<double, Eigen::RowMajor> Br = B2;

    std::vector<Eigen::Triplet<double>> trip;
    int row = 0;
    for (int b = 1; b <= T + 1; ++b) {
      for (int i = 0; i < n_; ++i) {
        const std::size_t before = trip.size();
        if (b <= T) {
          const int idx = r_index_[static_cast<std::size_t>(b - 1)][static_cast<std::size_t>(i)];
          if (idx >= 0) trip.emplace_back(row, idx, 1.0);
        }
        if (b >= 2) {
          const auto& rprev = r_index_[static_cast<std::size_t>(b - 2)];
          const auto& mprev = m_index_[static_cast<std::size_t>(b - 2)];
          for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Ar, i); it; ++it) {
            const int idx = rprev[static_cast<std::size_t>(it.col())];
            if (idx >= 0) trip.emplace_back(row, idx, -it.value());
          }
          for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Br, i); it; ++it) {
            const int idx = mprev[static_cast<std::size_t>(it.col())];
            if (idx >= 0) trip.emplace_back(row, idx, -it.value());
          }
        }
        if (trip.size() != before) {
          if (b == 1) pinned_rows_.push_back({i, row});
          ++row;
        }
      }
    }
    E_ = SparseMatrix(row, num_vars_);
    E_.setFromTriplets(trip.begin(), trip.end());

    trip.clear();
    int grow = 0;
    if (with_objective) {
      const SparseMatrix C1 = plant.C1().sparseView();
      const SparseMatrix D12 = plant.D12().sparseView();
      const int nz = plant.nz();
      for (int t = 0; t < T; ++t) {
        for (int i = 0; i < n_; ++i) {
          const int idx = r_index_[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
          if (idx < 0) continue;
          for (SparseMatrix::InnerIterator it(C1, i); it; ++it)
            trip.emplace_back(grow + static_cast<int>(it.row()), idx, it.value());
        }
        for (int a = 0; a < nu_; ++a) {
          const int idx = m_index_[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
          if (idx < 0) continue;
          for (SparseMatrix::InnerIterator it(D12, a); it; ++it)
            trip.emplace_back(grow + static_cast<int>(it.row()), idx, it.value());
        }
        grow += nz;
      }
    } else {
      for (int k = 0; k < num_vars_; ++k) trip.emplace_back(k, k, 1.0);
      grow = num_vars_;
    }
    G_ = SparseMatrix(grow, num_vars_);
    G_.setFromTriplets(trip.begin(), trip.end());
  }

  int num_vars() const { return num_vars_; }
  const SparseMatrix& E() const { return E_; }
  const SparseMatrix& G() const { return G_; }
  const ColumnPattern& pattern() const { return pattern_; }

  /// Right-hand side for disturbance column j; nullopt when R[1](j, j) is
  /// forbidden, i.e. the constraint R[1] e_j = e_j reads 0 = 1.
  std::optional<Vector> rhs(int j) const {
    Vector f = Vector::Zero(E_.rows());
    for (const auto& [state, row] : pinned_rows_)
      if (state == j) {
        f(row) = 1.0;
        return f;
      }
    return std::nullopt;
  }

  /// Writes column j of R and M from a solution vector.
  template <class Fir>
  void scatter(const Vector& x, int j, Fir& R, Fir& M) const {
    for (int t = 0; t < pattern_.horizon; ++t) {
      for (int i = 0; i < n_; ++i) {
        const int idx = r_index_[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
        if (idx >= 0) R[t + 1](i, j) = x(idx);
      }
      for (int a = 0; a < nu_; ++a) {
        const int idx = m_index_[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
        if (idx >= 0) M[t + 1](a, j) = x(idx);
      }
    }
  }

 private:
  struct Pinned {
    int state;
    int row;
  };

  ColumnPattern pattern_;
  int n_, nu_;
  int num_vars_ = 0;
  std::vector<std::vector<int>> r_index_, m_index_;
  std::vector<Pinned> pinned_rows_;
  SparseMatrix E_, G_;
};

/// Solves one or more columns sharing a pattern; picks the dense kernel for
/// small problems and a single shared sparse factorization otherwise.
class SfColumnSolver {
 public:
  SfColumnSolver(const SfColumnProblem& problem, std::size_t dense_limit)
      : problem_(problem), dense_(static_cast<std::size_t>(problem.num_vars()) <= dense_limit) {
    if (dense_) {
      Gd_ = Matrix(problem.G());
      Ed_ = Matrix(problem.E());
    } else {
      sparse_ = std::make_unique<SparseEqLs>(problem.G(), problem.E());
    }
  }

  EqLsResult solve(int j, double tol) const {
    const auto f = problem_.rhs(j);
    if (!f) {
      EqLsResult out;
      out.x = Vector::Zero(problem_.num_vars());
      out.equality_residual = 1.0;
      out.feasible = false;
      return out;
    }
    const Vector h = Vector::Zero(problem_.G().rows());
    if (dense_) return solve_eq_ls(Gd_, h, Ed_, *f, tol);
    return sparse_->solve(h, *f, tol);
  }

 private:
  const SfColumnProblem& problem_;
  bool dense_;
  Matrix Gd_, Ed_;
  std::unique_ptr<SparseEqLs> sparse_;
};

}  // namespace sls
