#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "sls/plant.hpp"
#include "sls/slc.hpp"
#include "sls/synth.hpp"

namespace sls {

struct SweepGrid {
  std::vector<int> d;
  std::vector<int> T;
  std::vector<double> t_c{0.0};
};

struct SweepRow {
  int d = 0;
  int T = 0;
  double t_c = 0.0;
  std::string status;  ///< feasible | infeasible | error: <message>
  double cost = std::numeric_limits<double>::infinity();
  double normalized_cost = std::numeric_limits<double>::infinity();
  double wall_time_ms = 0.0;
  int columns_infeasible = 0;

  bool feasible() const { return status == "feasible"; }
};

inline constexpr const char* kSweepHeader =
    "d,T,t_c,status,cost,normalized_cost,wall_time_ms,columns_infeasible";

/// Grid points in order t_c, d, T (T varies fastest). Each point is solved in
/// turn; columns inside a point use `opts.threads` workers. Per-point errors
/// are recorded in the row and the sweep continues.
inline std::vector<SweepRow> run_sweep(const PlantModel& plant, const SweepGrid& grid, Mode mode,
                                       double baseline, const SynthesisOptions& opts,
                                       bool record_time = true) {
  detail::require_domain(!grid.d.empty() && !grid.T.empty() && !grid.t_c.empty(),
                         "run_sweep: grids must be nonempty");
  const InterconnectionGraph graph(plant.A());
  const bool of = mode == Mode::OutputFeedback;
  std::vector<SweepRow> rows;
  for (double t_c : grid.t_c)
    for (int d : grid.d)
      for (int T : grid.T) {
        SweepRow row;
        row.d = d;
        row.T = T;
        row.t_c = t_c;
        try {
          const SynthesisProblem problem{plant, spatiotemporal(plant, graph, d, t_c, T, of), mode};
          const SynthesisResult res = synthesize(problem, opts);
          row.status = res.feasible() ? "feasible" : "infeasible";
          row.cost = res.cost;
          row.normalized_cost = res.feasible() ? res.cost / baseline : std::numeric_limits<double>::infinity();
          row.wall_time_ms = record_time ? res.wall_time_ms : 0.0;
          row.columns_infeasible = res.columns_infeasible();
        } catch (const std::exception& e) {
          row.status = std::string("error: ") + e.what();
        }
        rows.push_back(row);
      }
  return rows;
}

/// Pairs of rows where the larger constraint set has the larger cost.
/// Rows that are not feasible count as +inf.
inline std::vector<std::string> monotonicity_violations(const std::vector<SweepRow>& rows,
                                                        double rel_tol = 1e-9) {
  std::vector<std::string> out;
  auto cost = [](const SweepRow& r) {
    return r.feasible() ? r.cost : std::numeric_limits<double>::infinity();
  };
  auto describe = [](const SweepRow& r) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "(d=%d,T=%d,t_c=%g)", r.d, r.T, r.t_c);
    return std::string(buf);
  };
  for (const auto& a : rows)
    for (const auto& b : rows) {
      // b's mask contains a's: d and T no smaller, t_c no larger, not the same point.
      const bool nested = b.d >= a.d && b.T >= a.T && b.t_c <= a.t_c &&
                          (b.d != a.d || b.T != a.T || b.t_c != a.t_c);
      if (!nested) continue;
      const double ca = cost(a), cb = cost(b);
      if (std::isinf(cb) && !std::isinf(ca)) {
        out.push_back(describe(b) + " infeasible but " + describe(a) + " feasible");
      } else if (!std::isinf(cb) && cb > ca * (1.0 + rel_tol) + rel_tol) {
        out.push_back(describe(b) + " cost " + std::to_string(cb) + " > " + describe(a) + " cost " +
                      std::to_string(ca));
      }
    }
  return out;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  auto num = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& ch : status)
      if (ch == ',' || ch == '\n') ch = ';';
    char ms[32];
    std::snprintf(ms, sizeof ms, "%.3f", r.wall_time_ms);
    os << r.d << ',' << r.T << ',' << num(r.t_c) << ',' << status << ',' << num(r.cost) << ','
       << num(r.normalized_cost) << ',' << ms << ',' << r.columns_infeasible << '\n';
  }
}

}  // namespace sls
