#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sls/errors.hpp"

namespace sls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Node index used for actuators/sensors that cannot be attributed to a state.
inline constexpr int kNoNode = -1;

/// Discrete-time LTI plant
///
///   x[t+1] = A x[t] + B1 w[t] + B2 u[t]
///   z[t]   = C1 x[t] + D11 w[t] + D12 u[t]
///   y[t]   = C2 x[t] + D21 w[t] + D22 u[t]
///
/// together with the node attribution of actuators and sensors used by the
/// locality constraints. Immutable after construction.
class PlantModel {
 public:
  PlantModel(Matrix A, Matrix B1, Matrix B2, Matrix C1, Matrix D11, Matrix D12,
             Matrix C2, Matrix D21, Matrix D22)
      : A_(std::move(A)),
        B1_(std::move(B1)),
        B2_(std::move(B2)),
        C1_(std::move(C1)),
        D11_(std::move(D11)),
        D12_(std::move(D12)),
        C2_(std::move(C2)),
        D21_(std::move(D21)),
        D22_(std::move(D22)) {
    validate();
    actuator_nodes_ = dominant_rows(B2_);
    sensor_nodes_ = dominant_cols(C2_.transpose());
  }

  /// State-feedback plant: C2 = I, D21 = 0, D22 = 0.
  static PlantModel state_feedback(Matrix A, Matrix B1, Matrix B2, Matrix C1,
                                   Matrix D11, Matrix D12) {
    const auto n = A.rows();
    const auto nw = B1.cols();
    const auto nu = B2.cols();
    return PlantModel(std::move(A), std::move(B1), std::move(B2), std::move(C1),
                      std::move(D11), std::move(D12), Matrix::Identity(n, n),
                      Matrix::Zero(n, nw), Matrix::Zero(n, nu));
  }

  const Matrix& A() const { return A_; }
  const Matrix& B1() const { return B1_; }
  const Matrix& B2() const { return B2_; }
  const Matrix& C1() const { return C1_; }
  const Matrix& D11() const { return D11_; }
  const Matrix& D12() const { return D12_; }
  const Matrix& C2() const { return C2_; }
  const Matrix& D21() const { return D21_; }
  const Matrix& D22() const { return D22_; }

  int n() const { return static_cast<int>(A_.rows()); }
  int nw() const { return static_cast<int>(B1_.cols()); }
  int nu() const { return static_cast<int>(B2_.cols()); }
  int nz() const { return static_cast<int>(C1_.rows()); }
  int ny() const { return static_cast<int>(C2_.rows()); }

  bool is_state_feedback() const {
    return ny() == n() && C2_ == Matrix::Identity(n(), n()) && D21_.isZero(0.0) &&
           D22_.isZero(0.0);
  }
  bool has_feedthrough() const { return !D22_.isZero(0.0); }

  /// State node that actuator k drives (largest |B2| entry of column k).
  const std::vector<int>& actuator_nodes() const { return actuator_nodes_; }
  /// State node that sensor s measures (largest |C2| entry of row s).
  const std::vector<int>& sensor_nodes() const { return sensor_nodes_; }

  /// Copy with explicit actuator/sensor node attribution.
  PlantModel with_node_attribution(std::vector<int> actuators,
                                   std::vector<int> sensors) const {
    detail::require_domain(static_cast<int>(actuators.size()) == nu(),
                           "actuator attribution size != nu");
    detail::require_domain(static_cast<int>(sensors.size()) == ny(),
                           "sensor attribution size != ny");
    for (int v : actuators)
      detail::require_domain(v == kNoNode || (v >= 0 && v < n()), "actuator node out of range");
    for (int v : sensors)
      detail::require_domain(v == kNoNode || (v >= 0 && v < n()), "sensor node out of range");
    PlantModel copy = *this;
    copy.actuator_nodes_ = std::move(actuators);
    copy.sensor_nodes_ = std::move(sensors);
    return copy;
  }

 private:
  void validate() const {
    const auto n = A_.rows();
    detail::require_domain(A_.cols() == n, "A must be square");
    detail::require_domain(B1_.rows() == n, "B1 must have n rows");
    detail::require_domain(B2_.rows() == n, "B2 must have n rows");
    detail::require_domain(C1_.cols() == n, "C1 must have n columns");
    detail::require_domain(C2_.cols() == n, "C2 must have n columns");
    detail::require_domain(D11_.rows() == C1_.rows() && D11_.cols() == B1_.cols(),
                           "D11 must be nz x nw");
    detail::require_domain(D12_.rows() == C1_.rows() && D12_.cols() == B2_.cols(),
                           "D12 must be nz x nu");
    detail::require_domain(D21_.rows() == C2_.rows() && D21_.cols() == B1_.cols(),
                           "D21 must be ny x nw");
    detail::require_domain(D22_.rows() == C2_.rows() && D22_.cols() == B2_.cols(),
                           "D22 must be ny x nu");
  }

  static std::vector<int> dominant_rows(const Matrix& m) {
    std::vector<int> out(static_cast<std::size_t>(m.cols()), kNoNode);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      Eigen::Index row = 0;
      const double peak = m.col(c).cwiseAbs().maxCoeff(&row);
      if (peak > 0.0) out[static_cast<std::size_t>(c)] = static_cast<int>(row);
    }
    return out;
  }
  static std::vector<int> dominant_cols(const Matrix& mt) { return dominant_rows(mt); }

  Matrix A_, B1_, B2_, C1_, D11_, D12_, C2_, D21_, D22_;
  std::vector<int> actuator_nodes_;
  std::vector<int> sensor_nodes_;
};

/// Largest eigenvalue magnitude of a square matrix.
inline double spectral_radius(const Matrix& A) {
  detail::require_domain(A.rows() == A.cols(), "spectral_radius: matrix must be square");
  if (A.size() == 0) return 0.0;
  if (A == A.transpose()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Parameters of the bi-directional chain benchmark.
struct ChainParams {
  int n = 100;
  double kappa = 1.0;
  double rho_target = 1.1;
  std::vector<int> actuator_sites;  ///< 1-based node indices
  double gamma = 1.0;
};

/// Actuator sites {5j-4, 5j : j = 1..n/5}, 1-based.
inline std::vector<int> benchmark_actuator_sites(int n = 100) {
  std::vector<int> sites;
  for (int j = 1; 5 * j <= n; ++j) {
    sites.push_back(5 * j - 4);
    sites.push_back(5 * j);
  }
  return sites;
}

/// Chain x_i[t+1] = alpha (x_i + kappa x_{i-1} + kappa x_{i+1}) + b_i u_i + w_i with
/// x_0 = x_{n+1} = 0, alpha scaled so that rho(A) = rho_target, and cost
/// ||x||^2 + gamma ||u||^2 encoded as C1 = [I; 0], D12 = [0; sqrt(gamma) I].
inline PlantModel build_chain(const ChainParams& p) {
  detail::require_domain(p.n >= 1, "build_chain: n must be >= 1");
  detail::require_domain(p.kappa >= 0.0, "build_chain: kappa must be >= 0");
  detail::require_domain(p.rho_target > 0.0, "build_chain: rho_target must be > 0");
  detail::require_domain(p.gamma >= 0.0, "build_chain: gamma must be >= 0");
  if (p.actuator_sites.empty()) throw ConstructionError("build_chain: no actuation");

  std::vector<int> sites = p.actuator_sites;
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  for (int s : sites)
    detail::require_domain(s >= 1 && s <= p.n, "build_chain: actuator site outside 1..n");

  const int n = p.n;
  const int nu = static_cast<int>(sites.size());
  Matrix base = Matrix::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    base(i, i + 1) = p.kappa;
    base(i + 1, i) = p.kappa;
  }
  const double alpha = p.rho_target / spectral_radius(base);
  Matrix A = alpha * base;

  Matrix B2 = Matrix::Zero(n, nu);
  for (int k = 0; k < nu; ++k) B2(sites[static_cast<std::size_t>(k)] - 1, k) = 1.0;

  Matrix C1 = Matrix::Zero(n + nu, n);
  C1.topRows(n).setIdentity();
  Matrix D12 = Matrix::Zero(n + nu, nu);
  D12.bottomRows(nu) = std::sqrt(p.gamma) * Matrix::Identity(nu, nu);

  return PlantModel::state_feedback(std::move(A), Matrix::Identity(n, n), std::move(B2),
                                    std::move(C1), Matrix::Zero(n + nu, n), std::move(D12));
}

/// Hop distances on the undirected graph whose edges are the nonzero
/// off-diagonal entries of A (either direction).
class InterconnectionGraph {
 public:
  static constexpr int kUnreachable = std::numeric_limits<int>::max();

  explicit InterconnectionGraph(const Matrix& A) : n_(static_cast<int>(A.rows())) {
    detail::require_domain(A.rows() == A.cols(), "graph: A must be square");
    adjacency_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j && (A(i, j) != 0.0 || A(j, i) != 0.0))
          adjacency_[static_cast<std::size_t>(i)].push_back(j);
    dist_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), kUnreachable);
    for (int s = 0; s < n_; ++s) bfs(s);
  }

  int size() const { return n_; }

  /// Hop distance; kUnreachable for disconnected pairs or unattributed nodes.
  int distance(int i, int j) const {
    if (i == kNoNode || j == kNoNode) return kUnreachable;
    return dist_[index(i, j)];
  }

  const std::vector<int>& neighbors(int i) const {
    return adjacency_[static_cast<std::size_t>(i)];
  }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) +
           static_cast<std::size_t>(j);
  }

  void bfs(int source) {
    std::deque<int> queue{source};
    dist_[index(source, source)] = 0;
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int w : adjacency_[static_cast<std::size_t>(v)]) {
        if (dist_[index(source, w)] == kUnreachable) {
          dist_[index(source, w)] = dist_[index(source, v)] + 1;
          queue.push_back(w);
        }
      }
    }
  }

  int n_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<int> dist_;
};

inline InterconnectionGraph hop_distances(const PlantModel& plant) {
  return InterconnectionGraph(plant.A());
}

}  // namespace sls
