#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <iostream>
#include <optional>
#include <vector>

#include "sls/column_problem.hpp"
#include "sls/errors.hpp"
#include "sls/plant.hpp"
#include "sls/response.hpp"

namespace sls {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Node attribution of a response block's rows and columns.
struct BlockShape {
  std::vector<int> row_nodes;
  std::vector<int> col_nodes;
  bool strictly_proper = true;

  int rows() const { return static_cast<int>(row_nodes.size()); }
  int cols() const { return static_cast<int>(col_nodes.size()); }
};

/// Shapes of R (state x state), M (actuator x state), N (state x sensor) and
/// L (actuator x sensor, proper).
struct BlockShapes {
  BlockShape R, M, N, L;
};

inline BlockShapes block_shapes(const PlantModel& plant) {
  std::vector<int> states(static_cast<std::size_t>(plant.n()));
  for (int i = 0; i < plant.n(); ++i) states[static_cast<std::size_t>(i)] = i;
  const auto& act = plant.actuator_nodes();
  const auto& sen = plant.sensor_nodes();
  return {BlockShape{states, states, true}, BlockShape{act, states, true},
          BlockShape{states, sen, true}, BlockShape{act, sen, false}};
}

/// Time-indexed support: allowed(t)(i, j) says whether G[t](i, j) may be nonzero.
class SupportMask {
 public:
  SupportMask() = default;

  SupportMask(int rows, int cols, std::vector<BoolArray> allowed)
      : rows_(rows), cols_(cols), allowed_(std::move(allowed)) {
    detail::require_domain(!allowed_.empty(), "SupportMask: needs at least one time index");
    for (const auto& a : allowed_)
      detail::require_domain(a.rows() == rows && a.cols() == cols, "SupportMask: shape mismatch");
  }

  /// Everything allowed for t = 0..T (t = 0 forbidden when strictly proper).
  static SupportMask full(int rows, int cols, int T, bool strictly_proper) {
    std::vector<BoolArray> a(static_cast<std::size_t>(T + 1), BoolArray::Constant(rows, cols, true));
    if (strictly_proper) a[0].setConstant(false);
    return SupportMask(rows, cols, std::move(a));
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int horizon() const { return static_cast<int>(allowed_.size()) - 1; }

  const BoolArray& at(int t) const { return allowed_.at(static_cast<std::size_t>(t)); }
  BoolArray& at(int t) { return allowed_.at(static_cast<std::size_t>(t)); }

  bool allowed(int t, int i, int j) const {
    if (t < 0 || t > horizon()) return false;
    return allowed_[static_cast<std::size_t>(t)](i, j);
  }

  /// Mask ⊆ other (entrywise, over all t).
  bool subset_of(const SupportMask& other) const {
    for (int t = 0; t <= horizon(); ++t)
      for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j)
          if (allowed(t, i, j) && !other.allowed(t, i, j)) return false;
    return true;
  }

  friend bool operator==(const SupportMask& a, const SupportMask& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.horizon() != b.horizon()) return false;
    for (int t = 0; t <= a.horizon(); ++t)
      if ((a.at(t) != b.at(t)).any()) return false;
    return true;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<BoolArray> allowed_;
};

namespace detail {

template <class Rule>
SupportMask build_mask(const InterconnectionGraph& graph, const BlockShape& shape, int T, Rule rule) {
  require_domain(T >= 0, "mask: horizon must be >= 0");
  for (int v : shape.row_nodes)
    require_domain(v == kNoNode || (v >= 0 && v < graph.size()), "mask: row node outside graph");
  for (int v : shape.col_nodes)
    require_domain(v == kNoNode || (v >= 0 && v < graph.size()), "mask: column node outside graph");
  std::vector<BoolArray> a(static_cast<std::size_t>(T + 1),
                           BoolArray::Constant(shape.rows(), shape.cols(), false));
  for (int t = shape.strictly_proper ? 1 : 0; t <= T; ++t)
    for (int i = 0; i < shape.rows(); ++i)
      for (int j = 0; j < shape.cols(); ++j) {
        const int d = graph.distance(shape.row_nodes[static_cast<std::size_t>(i)],
                                     shape.col_nodes[static_cast<std::size_t>(j)]);
        a[static_cast<std::size_t>(t)](i, j) = rule(t, d);
      }
  return SupportMask(shape.rows(), shape.cols(), std::move(a));
}

}  // namespace detail

/// d-hop locality: G[t](i, j) allowed iff dist(node(i), node(j)) <= d.
inline SupportMask locality_mask(const InterconnectionGraph& graph, int d, const BlockShape& shape,
                                 int T) {
  detail::require_domain(d >= 0, "locality_mask: d must be >= 0");
  return detail::build_mask(graph, shape, T, [d](int, int dist) {
    return dist != InterconnectionGraph::kUnreachable && dist <= d;
  });
}

/// Communication delay of t_c sampling periods per hop. Information about a
/// disturbance dist hops away becomes usable at t >= floor(t_c * dist) + 1
/// (same-node entries from t >= 1; from t >= 0 for proper blocks).
inline SupportMask delay_mask(const InterconnectionGraph& graph, double t_c, const BlockShape& shape,
                              int T) {
  if (!(t_c >= 0.0)) throw DomainError("delay_mask: t_c must be >= 0");
  if (t_c >= 1.0)
    std::clog << "warning: delay_mask: t_c = " << t_c
              << " >= 1; localized responses are generally infeasible\n";
  const int first = shape.strictly_proper ? 1 : 0;
  return detail::build_mask(graph, shape, T, [t_c, first](int t, int dist) {
    if (dist == InterconnectionGraph::kUnreachable) return false;
    if (dist == 0) return t >= first;
    return t >= static_cast<int>(std::floor(t_c * dist)) + 1;
  });
}

/// FIR horizon T with no spatial restriction.
inline SupportMask fir_mask(const BlockShape& shape, int T) {
  return SupportMask::full(shape.rows(), shape.cols(), T, shape.strictly_proper);
}

/// Entrywise AND; a shorter horizon forbids everything beyond it.
inline SupportMask intersect(const SupportMask& a, const SupportMask& b) {
  detail::require_domain(a.rows() == b.rows() && a.cols() == b.cols(), "intersect: shape mismatch");
  const int T = std::min(a.horizon(), b.horizon());
  std::vector<BoolArray> out;
  out.reserve(static_cast<std::size_t>(T + 1));
  for (int t = 0; t <= T; ++t) out.emplace_back(a.at(t) && b.at(t));
  return SupportMask(a.rows(), a.cols(), std::move(out));
}

/// Intersection of system level constraints on {R, M, N, L}.
struct SlcSet {
  SupportMask R;
  SupportMask M;
  std::optional<SupportMask> N;
  std::optional<SupportMask> L;
  std::optional<int> locality;    ///< d, when a locality rule contributed
  std::optional<double> delay;    ///< t_c, when a delay rule contributed
  bool explicit_pattern = false;  ///< an explicit subspace contributed

  int horizon() const { return R.horizon(); }
  bool has_output_blocks() const { return N.has_value() && L.has_value(); }
};

/// FIR-only constraint set (output blocks included when `output_feedback`).
inline SlcSet fir(const PlantModel& plant, int T, bool output_feedback) {
  detail::require_domain(T >= 1, "fir: T must be >= 1");
  const auto s = block_shapes(plant);
  SlcSet out{fir_mask(s.R, T), fir_mask(s.M, T), std::nullopt, std::nullopt, {}, {}, false};
  if (output_feedback) {
    out.N = fir_mask(s.N, T);
    out.L = fir_mask(s.L, T);
  }
  return out;
}

inline SlcSet locality(const PlantModel& plant, const InterconnectionGraph& g, int d, int T,
                       bool output_feedback) {
  const auto s = block_shapes(plant);
  SlcSet out{locality_mask(g, d, s.R, T), locality_mask(g, d, s.M, T), std::nullopt,
             std::nullopt, d, {}, false};
  if (output_feedback) {
    out.N = locality_mask(g, d, s.N, T);
    out.L = locality_mask(g, d, s.L, T);
  }
  return out;
}

inline SlcSet delay(const PlantModel& plant, const InterconnectionGraph& g, double t_c, int T,
                    bool output_feedback) {
  const auto s = block_shapes(plant);
  SlcSet out{delay_mask(g, t_c, s.R, T), delay_mask(g, t_c, s.M, T), std::nullopt,
             std::nullopt, {}, t_c, false};
  if (output_feedback) {
    out.N = delay_mask(g, t_c, s.N, T);
    out.L = delay_mask(g, t_c, s.L, T);
  }
  return out;
}

inline SlcSet intersect(const SlcSet& a, const SlcSet& b) {
  detail::require_domain(a.has_output_blocks() == b.has_output_blocks(),
                         "intersect: state- and output-feedback constraint sets mixed");
  SlcSet out{intersect(a.R, b.R), intersect(a.M, b.M), std::nullopt, std::nullopt, {}, {},
             a.explicit_pattern || b.explicit_pattern};
  if (a.has_output_blocks()) {
    out.N = intersect(*a.N, *b.N);
    out.L = intersect(*a.L, *b.L);
  }
  if (a.locality && b.locality) out.locality = std::min(*a.locality, *b.locality);
  else out.locality = a.locality ? a.locality : b.locality;
  if (a.delay && b.delay) out.delay = std::max(*a.delay, *b.delay);
  else out.delay = a.delay ? a.delay : b.delay;
  return out;
}

/// Spatiotemporal constraint: locality d ∩ delay t_c ∩ FIR T.
inline SlcSet spatiotemporal(const PlantModel& plant, const InterconnectionGraph& g, int d,
                             double t_c, int T, bool output_feedback) {
  return intersect(intersect(locality(plant, g, d, T, output_feedback),
                             delay(plant, g, t_c, T, output_feedback)),
                   fir(plant, T, output_feedback));
}

/// Column j of the R/M masks as a column-problem pattern.
inline ColumnPattern column_pattern(const SlcSet& slc, int j) {
  ColumnPattern p;
  p.horizon = slc.horizon();
  p.state_rows.resize(static_cast<std::size_t>(p.horizon));
  p.input_rows.resize(static_cast<std::size_t>(p.horizon));
  for (int t = 1; t <= p.horizon; ++t) {
    for (int i = 0; i < slc.R.rows(); ++i)
      if (slc.R.allowed(t, i, j)) p.state_rows[static_cast<std::size_t>(t - 1)].push_back(i);
    for (int a = 0; a < slc.M.rows(); ++a)
      if (slc.M.allowed(t, a, j)) p.input_rows[static_cast<std::size_t>(t - 1)].push_back(a);
  }
  return p;
}

/// Sparsity quadratic invariance: support(K P K) ⊆ support(K) (Boolean product).
inline bool is_qi(const BoolArray& K, const BoolArray& P) {
  detail::require_domain(K.cols() == P.rows() && P.cols() == K.rows(),
                         "is_qi: K must be nu x ny and P ny x nu");
  using IntMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const IntMatrix k = K.cast<int>().matrix();
  const IntMatrix p = P.cast<int>().matrix();
  const IntMatrix kpk = k * p * k;
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j)
      if (kpk(i, j) != 0 && !K(i, j)) return false;
  return true;
}

/// Closed loop [C1 D12][R N; M L][B1; D21] (t >= 1) and D12 L[0] D21 + D11
/// entrywise nonnegative up to -1e-12.
inline bool positivity_check(const PlantModel& plant, const SystemResponse& resp,
                             double tol = 1e-12) {
  const int T = resp.horizon();
  const bool of = resp.is_output_feedback();
  for (int t = 1; t <= T; ++t) {
    Matrix cl = (plant.C1() * resp.R.coeff(t) + plant.D12() * resp.M.coeff(t)) * plant.B1();
    if (of)
      cl += (plant.C1() * resp.N->coeff(t) + plant.D12() * resp.L->coeff(t)) * plant.D21();
    if (cl.size() && cl.minCoeff() < -tol) return false;
  }
  Matrix feed = plant.D11();
  if (of) feed += plant.D12() * resp.L->coeff(0) * plant.D21();
  return feed.size() == 0 || feed.minCoeff() >= -tol;
}

}  // namespace sls
