#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sls/errors.hpp"
#include "sls/fir.hpp"
#include "sls/plant.hpp"
#include "sls/response.hpp"

namespace sls {

enum class RealizationKind {
  sf,          ///< disturbance-estimating state feedback
  of,          ///< output feedback with internal state beta
  of_d22,      ///< output feedback consuming y - D22 u
  structure1,  ///< u = L y - M B2 u (open-loop stable plants only)
  structure2,  ///< u = L (I + C2 N)^{-1} y
  imc          ///< internal model control with Q = L
};

inline std::string to_string(RealizationKind k) {
  switch (k) {
    case RealizationKind::sf: return "sf";
    case RealizationKind::of: return "of";
    case RealizationKind::of_d22: return "of_d22";
    case RealizationKind::structure1: return "structure1";
    case RealizationKind::structure2: return "structure2";
    case RealizationKind::imc: return "imc";
  }
  return "?";
}

/// Filter banks of a realized controller. Unused banks are empty.
struct ControllerRealization {
  RealizationKind kind = RealizationKind::sf;
  FirMatrix Rt;   ///< sf: I - zR;  of: z(I - zR)
  FirMatrix Mt;   ///< zM
  FirMatrix Nt;   ///< -zN
  FirMatrix L;
  FirMatrix MB2;  ///< structure1 feedback path
  FirMatrix C2N;  ///< structure2 feedback path
  int n = 0, nu = 0, ny = 0;
};

/// Realizes an achievable response as one of the controller structures.
inline ControllerRealization realize(const PlantModel& plant, const SystemResponse& resp,
                                     RealizationKind kind, double tol = 1e-8) {
  ControllerRealization c;
  c.kind = kind;
  c.n = plant.n();
  c.nu = plant.nu();
  c.ny = plant.ny();
  const int T = resp.horizon();
  const SystemResponse r = resp.padded(T);

  if (kind == RealizationKind::sf) {
    if (!plant.is_state_feedback())
      throw DomainError("realize: sf realization needs a state-feedback plant");
    if (sf_residual(plant, r) > tol) throw DomainError("response not achievable");
    // I - zR has no z^0 term because R[1] = I.
    const FirMatrix I = FirMatrix::constant(Matrix::Identity(c.n, c.n));
    c.Rt = I - r.R.advanced(tol);
    c.Rt[0].setZero();
    c.Mt = r.M.advanced(tol);
    return c;
  }

  if (!r.is_output_feedback()) throw DomainError("realize: output-feedback kinds need N and L");
  if (of_residual(plant, r) > tol) throw DomainError("response not achievable");
  if (kind == RealizationKind::of && plant.has_feedthrough())
    throw DomainError("realize: plant has D22 != 0; use of_d22");

  c.L = *r.L;
  switch (kind) {
    case RealizationKind::of:
    case RealizationKind::of_d22: {
      // z(I - zR): coefficient t is -R[t+2]; the z^1 and z^0 terms vanish since R[1] = I, R[0] = 0.
      const int h = std::max(T - 2, 0);
      std::vector<Matrix> rt(static_cast<std::size_t>(h + 1), Matrix::Zero(c.n, c.n));
      for (int t = 0; t <= h; ++t) rt[static_cast<std::size_t>(t)] = -r.R.coeff(t + 2);
      c.Rt = FirMatrix(std::move(rt));
      c.Mt = r.M.advanced(tol);
      c.Nt = -(r.N->advanced(tol));
      break;
    }
    case RealizationKind::structure1:
    case RealizationKind::imc:
      c.MB2 = r.M * plant.B2();
      break;
    case RealizationKind::structure2:
      c.C2N = plant.C2() * *r.N;
      break;
    default:
      break;
  }
  return c;
}

/// Additive perturbations; missing or short series are zero-filled.
struct Perturbations {
  std::vector<Vector> dx, dy, du, dbeta;
};

struct SimTrace {
  std::vector<Vector> x, u, y, beta, delta_hat, zbar;
  /// Measurement consumed by the controller (y - D22 u_command for of_d22, else y).
  std::vector<Vector> ybar;
  Perturbations perturbations;
  int steps() const { return static_cast<int>(x.size()) - 1; }
};

namespace detail {

/// Fixed-depth history of a vector signal; ago(0) is the most recent sample.
class SignalHistory {
 public:
  SignalHistory(int dim, int depth)
      : buf_(static_cast<std::size_t>(std::max(depth, 1)), Vector::Zero(dim)) {}

  void push(const Vector& v) {
    head_ = (head_ + 1) % buf_.size();
    buf_[head_] = v;
  }
  const Vector& ago(int k) const {
    const std::size_t d = buf_.size();
    return buf_[(head_ + d - static_cast<std::size_t>(k) % d) % d];
  }
  int depth() const { return static_cast<int>(buf_.size()); }

 private:
  std::vector<Vector> buf_;
  std::size_t head_ = 0;
};

/// sum_tau G[tau] h.ago(tau + offset); samples older than the history are zero.
inline Vector apply_bank(const FirMatrix& G, const SignalHistory& h, int offset = 0) {
  Vector out = Vector::Zero(G.rows());
  for (int tau = 0; tau <= G.horizon(); ++tau) {
    const int k = tau + offset;
    if (k >= h.depth()) break;
    if (!G[tau].isZero(0.0)) out.noalias() += G[tau] * h.ago(k);
  }
  return out;
}

inline Vector sample(const std::vector<Vector>& s, int t, int dim) {
  if (t < static_cast<int>(s.size()) && s[static_cast<std::size_t>(t)].size() == dim)
    return s[static_cast<std::size_t>(t)];
  if (t < static_cast<int>(s.size()) && s[static_cast<std::size_t>(t)].size() != 0)
    throw DomainError("simulate: perturbation has wrong dimension");
  return Vector::Zero(dim);
}

}  // namespace detail


/// Closed-loop simulation for t = 0..H with zero initial conditions.
///
/// Step order: measurement, controller banks, control input, plant update.
/// A nonzero initial state is modelled as the impulse dx[0] = x0 (x[1] = x0).
inline SimTrace simulate(const PlantModel& plant, const ControllerRealization& c,
                         const Perturbations& p, int H) {
  using detail::apply_bank;
  detail::require_domain(H >= 1, "simulate: H must be >= 1");
  const int n = plant.n(), nu = plant.nu(), ny = plant.ny();
  detail::require_domain(c.n == n && c.nu == nu && c.ny == ny, "simulate: realization/plant mismatch");
  const Matrix& A = plant.A();
  const Matrix& B2 = plant.B2();
  const Matrix& C2 = plant.C2();
  const Matrix& D22 = plant.D22();
  const RealizationKind kind = c.kind;

  int depth = 0;
  for (const FirMatrix* g : {&c.Rt, &c.Mt, &c.Nt, &c.L, &c.MB2, &c.C2N})
    depth = std::max(depth, g->horizon());
  depth += 2;
  const int bdim = kind == RealizationKind::structure1                                   ? nu
                   : kind == RealizationKind::structure2 || kind == RealizationKind::imc ? ny
                                                                                         : n;
  detail::SignalHistory beta_h(bdim, depth), y_h(ny, depth), uc_h(nu, depth), dh_h(n, depth);

  // sum_{tau >= 1} G[tau] s[t - tau], evaluated before s[t] is pushed.
  auto strict = [](const FirMatrix& G, const detail::SignalHistory& h) {
    Vector out = Vector::Zero(G.rows());
    for (int tau = 1; tau <= G.horizon() && tau - 1 < h.depth(); ++tau)
      if (!G[tau].isZero(0.0)) out.noalias() += G[tau] * h.ago(tau - 1);
    return out;
  };

  SimTrace tr;
  tr.perturbations = p;
  Vector x = Vector::Zero(n);
  Vector beta_now = Vector::Zero(bdim);  // beta[t] of the output-feedback kinds
  Vector xm = Vector::Zero(n);           // internal model state (imc)

  for (int t = 0; t <= H; ++t) {
    const Vector dx = detail::sample(p.dx, t, n);
    const Vector dy = detail::sample(p.dy, t, ny);
    const Vector du = detail::sample(p.du, t, nu);
    const Vector db = detail::sample(p.dbeta, t, bdim);

    // For of_d22 this is y - D22 u_command = C2 x + dy + D22 du.
    Vector ybar = C2 * x + dy;
    if (kind == RealizationKind::of_d22) ybar += D22 * du;
    y_h.push(ybar);

    Vector uc = Vector::Zero(nu);  // commanded input
    Vector beta = Vector::Zero(bdim);
    Vector dhat = Vector::Zero(n);

    switch (kind) {
      case RealizationKind::sf:
        // dhat = x - xhat with xhat = (zR - I) dhat
        dhat = ybar + strict(c.Rt, dh_h);
        dh_h.push(dhat);
        uc = apply_bank(c.Mt, dh_h);
        break;
      case RealizationKind::of:
      case RealizationKind::of_d22: {
        beta = beta_now;
        beta_h.push(beta);
        uc = apply_bank(c.Mt, beta_h) + apply_bank(c.L, y_h);
        beta_now = apply_bank(c.Rt, beta_h) + apply_bank(c.Nt, y_h) + db;
        break;
      }
      case RealizationKind::structure1:
        beta = -strict(c.MB2, uc_h) + db;
        uc = apply_bank(c.L, y_h) + beta;
        break;
      case RealizationKind::structure2:
        beta = ybar - strict(c.C2N, beta_h) + db;
        beta_h.push(beta);
        uc = apply_bank(c.L, beta_h);
        break;
      case RealizationKind::imc:
        beta = ybar - C2 * xm + db;
        beta_h.push(beta);
        uc = apply_bank(c.L, beta_h);
        xm = A * xm + B2 * uc;
        break;
    }
    uc_h.push(uc);
    const Vector u = uc + du;

    tr.x.push_back(x);
    tr.u.push_back(u);
    tr.y.push_back(C2 * x + dy + D22 * u);
    tr.ybar.push_back(ybar);
    tr.beta.push_back(beta);
    tr.delta_hat.push_back(dhat);
    tr.zbar.push_back(plant.C1() * x + plant.D12() * u);

    x = A * x + B2 * u + dx;
  }
  return tr;
}

enum class Signal { x, u, y, beta, delta_hat };
enum class Channel { dx, dy, du, dbeta };

inline std::string to_string(Signal s) {
  switch (s) {
    case Signal::x: return "x";
    case Signal::u: return "u";
    case Signal::y: return "y";
    case Signal::beta: return "beta";
    case Signal::delta_hat: return "delta_hat";
  }
  return "?";
}
inline std::string to_string(Channel c) {
  switch (c) {
    case Channel::dx: return "dx";
    case Channel::dy: return "dy";
    case Channel::du: return "du";
    case Channel::dbeta: return "dbeta";
  }
  return "?";
}

using MapTable = std::map<std::pair<Signal, Channel>, FirMatrix>;

/// Closed-loop maps from perturbations to internal signals. State feedback
/// gives the nine maps of the disturbance-estimating structure; output
/// feedback gives all sixteen, with the dy/du columns acting on the
/// measurement the controller consumes when D22 != 0.
inline MapTable predicted_maps(const PlantModel& plant, const SystemResponse& resp) {
  const int T = resp.horizon();
  const SystemResponse r = resp.padded(T);
  const Matrix& A = plant.A();
  const Matrix& B2 = plant.B2();
  const int n = plant.n(), nu = plant.nu();
  const auto eye = [](int k) { return FirMatrix::constant(Matrix::Identity(k, k)); };
  const auto cst = [](const Matrix& m) { return FirMatrix::constant(m); };
  MapTable m;

  if (!r.is_output_feedback()) {
    const FirMatrix& R = r.R;
    const FirMatrix& M = r.M;
    m[{Signal::x, Channel::dx}] = R;
    m[{Signal::x, Channel::dy}] = R.advanced() - eye(n) - R * A;
    m[{Signal::x, Channel::du}] = R * B2;
    m[{Signal::u, Channel::dx}] = M;
    m[{Signal::u, Channel::dy}] = M.advanced() - M * A;
    m[{Signal::u, Channel::du}] = eye(nu) + M * B2;
    m[{Signal::delta_hat, Channel::dx}] = eye(n).delayed(1);
    m[{Signal::delta_hat, Channel::dy}] = eye(n) - cst(A).delayed(1);
    m[{Signal::delta_hat, Channel::du}] = cst(B2).delayed(1);
    return m;
  }

  const FirMatrix& R = r.R;
  const FirMatrix& M = r.M;
  const FirMatrix& N = *r.N;
  const FirMatrix& L = *r.L;
  const Matrix& C2 = plant.C2();
  const int ny = plant.ny();

  m[{Signal::x, Channel::dx}] = R;
  m[{Signal::x, Channel::dy}] = N;
  m[{Signal::x, Channel::dbeta}] = (N * C2).delayed(1);
  m[{Signal::u, Channel::dx}] = M;
  m[{Signal::u, Channel::dy}] = L;
  m[{Signal::u, Channel::dbeta}] = (L * C2).delayed(1);
  m[{Signal::y, Channel::dx}] = C2 * R;
  m[{Signal::y, Channel::dy}] = eye(ny) + C2 * N;
  m[{Signal::y, Channel::dbeta}] = (C2 * N * C2).delayed(1);
  m[{Signal::beta, Channel::dx}] = -(B2 * M).delayed(1);
  m[{Signal::beta, Channel::dy}] = -(B2 * L).delayed(1);
  m[{Signal::beta, Channel::dbeta}] =
      eye(n).delayed(1) - (cst(A) + B2 * L * C2).delayed(2);

  if (plant.has_feedthrough()) {
    const Matrix& D22 = plant.D22();
    m[{Signal::x, Channel::du}] = R * B2 + N * D22;
    m[{Signal::u, Channel::du}] = eye(nu) + M * B2 + L * D22;
    m[{Signal::y, Channel::du}] = C2 * R * B2 + cst(D22) + C2 * N * D22;
    m[{Signal::beta, Channel::du}] = -(B2 * (M * B2 + L * D22)).delayed(1);
  } else {
    m[{Signal::x, Channel::du}] = R * B2;
    m[{Signal::u, Channel::du}] = eye(nu) + M * B2;
    m[{Signal::y, Channel::du}] = C2 * R * B2;
    m[{Signal::beta, Channel::du}] = -(B2 * M * B2).delayed(1);
  }
  return m;
}

/// Per-map outcome of the impulse-response comparison.
struct MapCheck {
  Signal signal;
  Channel channel;
  double max_deviation = 0.0;  ///< |simulated - predicted| over 0..H
  double tail_max = 0.0;       ///< |simulated| after the map horizon
  int horizon = 0;
  int worst_coordinate = -1;
  int worst_time = -1;
};

struct StabilityReport {
  bool passed = true;
  double tol = 0.0;
  int steps = 0;
  double residual = 0.0;  ///< achievability residual of the checked response
  std::vector<MapCheck> maps;

  std::string summary() const {
    std::ostringstream os;
    os << (passed ? "PASS" : "FAIL") << " internal stability (" << maps.size() << " maps, H=" << steps
       << ", residual=" << residual << ")\n";
    for (const auto& mc : maps) {
      os << "  " << to_string(mc.signal) << " <- " << to_string(mc.channel)
         << ": deviation=" << mc.max_deviation << " tail=" << mc.tail_max;
      if (mc.max_deviation > tol || mc.tail_max > tol)
        os << "  [coordinate " << mc.worst_coordinate << ", t=" << mc.worst_time << "]";
      os << "\n";
    }
    return os.str();
  }
};

/// Drives every perturbation coordinate with a unit impulse at t = 0,
/// simulates H = 3T + n steps and compares each internal signal with the
/// predicted map. Past the map horizon the signal must vanish (deadbeat).
inline StabilityReport verify_internal_stability(const PlantModel& plant, const SystemResponse& resp,
                                                 double tol = 1e-8) {
  const bool of = resp.is_output_feedback();
  const RealizationKind kind = !of                       ? RealizationKind::sf
                               : plant.has_feedthrough() ? RealizationKind::of_d22
                                                         : RealizationKind::of;
  // Realize without the achievability gate so a broken response shows up as
  // measured deviations instead of an exception.
  const double residual = of ? of_residual(plant, resp) : sf_residual(plant, resp);
  const ControllerRealization c = realize(plant, resp, kind, std::numeric_limits<double>::infinity());
  const MapTable maps = predicted_maps(plant, resp);
  const int T = resp.horizon();
  const int H = std::max(3 * T + plant.n(), T + 4);

  const std::vector<Channel> channels = of ? std::vector<Channel>{Channel::dx, Channel::dy, Channel::du, Channel::dbeta}
                                           : std::vector<Channel>{Channel::dx, Channel::dy, Channel::du};
  const auto width = [&](Channel ch) {
    switch (ch) {
      case Channel::dx: return plant.n();
      case Channel::dy: return plant.ny();
      case Channel::du: return plant.nu();
      case Channel::dbeta: return plant.n();
    }
    return 0;
  };

  StabilityReport rep;
  rep.tol = tol;
  rep.steps = H;
  rep.residual = residual;
  rep.passed = residual <= tol;
  std::map<std::pair<Signal, Channel>, MapCheck> checks;
  for (const auto& [key, g] : maps) {
    MapCheck mc{key.first, key.second};
    mc.horizon = g.horizon();
    checks[key] = mc;
  }

  for (Channel ch : channels) {
    const int w = width(ch);
    std::vector<SimTrace> traces(static_cast<std::size_t>(w));
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < w; ++k) {
      Perturbations p;
      std::vector<Vector>& series = ch == Channel::dx   ? p.dx
                                    : ch == Channel::dy ? p.dy
                                    : ch == Channel::du ? p.du
                                                        : p.dbeta;
      series.assign(1, Vector::Unit(w, k));
      traces[static_cast<std::size_t>(k)] = simulate(plant, c, p, H);
    }
    for (int k = 0; k < w; ++k) {
      const SimTrace& tr = traces[static_cast<std::size_t>(k)];
      for (auto& [key, mc] : checks) {
        if (key.second != ch) continue;
        const FirMatrix& g = maps.at(key);
        const std::vector<Vector>& s = key.first == Signal::x           ? tr.x
                                       : key.first == Signal::u         ? tr.u
                                       : key.first == Signal::y         ? tr.ybar
                                       : key.first == Signal::beta      ? tr.beta
                                                                        : tr.delta_hat;
        for (int t = 0; t <= H; ++t) {
          const Vector& v = s[static_cast<std::size_t>(t)];
          const double dev = (v - g.coeff(t).col(k)).cwiseAbs().maxCoeff();
          const double tail = t > g.horizon() ? v.cwiseAbs().maxCoeff() : 0.0;
          if (dev > mc.max_deviation || tail > mc.tail_max) {
            if (std::max(dev, tail) > std::max(mc.max_deviation, mc.tail_max)) {
              mc.worst_coordinate = k;
              mc.worst_time = t;
            }
            mc.max_deviation = std::max(mc.max_deviation, dev);
            mc.tail_max = std::max(mc.tail_max, tail);
          }
        }
      }
    }
  }

  for (auto& [key, mc] : checks) {
    rep.passed = rep.passed && mc.max_deviation <= tol && mc.tail_max <= tol;
    rep.maps.push_back(mc);
  }
  return rep;
}

/// Sensitivity of the closed loop to controller-internal noise: H2 norm of
/// the stacked maps from dbeta to (x, u, y, beta).
inline double controller_robustness(const PlantModel& plant, const SystemResponse& resp) {
  if (!resp.is_output_feedback())
    throw DomainError("controller_robustness: needs an output-feedback response");
  const MapTable maps = predicted_maps(plant, resp);
  double total = 0.0;
  for (const auto& [key, g] : maps)
    if (key.second == Channel::dbeta) total += g.h2_squared();
  return std::sqrt(total);
}

/// Behaviour of the simplified structures against the beta-state realization.
struct AltStructureReport {
  bool open_loop_stable = false;
  double spectral_radius = 0.0;
  double imc_vs_structure1 = 0.0;  ///< max |x|, |u| difference under dx, dy, du
  double structure1_peak = 0.0;    ///< max |x| after a dbeta impulse
  double structure2_peak = 0.0;    ///< max |x| after a dx impulse
  double of_tail = 0.0;            ///< max |x| of the beta realization past the map horizon
  int steps = 0;
};

/// Impulse comparison of the simplified structures. dbeta hits coordinate 0 of
/// each structure's internal signal; the IMC comparison uses matched unit
/// impulses on every dx, dy and du coordinate.
inline AltStructureReport demo_alt_structures(const PlantModel& plant, const SystemResponse& resp,
                                              int H) {
  detail::require_domain(H >= 1, "demo_alt_structures: H must be >= 1");
  AltStructureReport rep;
  rep.steps = H;
  rep.spectral_radius = spectral_radius(plant.A());
  rep.open_loop_stable = rep.spectral_radius < 1.0;

  const auto s1 = realize(plant, resp, RealizationKind::structure1);
  const auto s2 = realize(plant, resp, RealizationKind::structure2);
  const auto imc = realize(plant, resp, RealizationKind::imc);
  const auto fig3 = realize(plant, resp, plant.has_feedthrough() ? RealizationKind::of_d22 : RealizationKind::of);

  auto peak = [](const std::vector<Vector>& s, int from) {
    double m = 0.0;
    for (std::size_t t = static_cast<std::size_t>(std::max(from, 0)); t < s.size(); ++t)
      m = std::max(m, s[t].size() ? s[t].cwiseAbs().maxCoeff() : 0.0);
    return m;
  };

  Perturbations shared;
  shared.dx.assign(1, Vector::Ones(plant.n()));
  shared.dy.assign(1, Vector::Ones(plant.ny()));
  shared.du.assign(1, Vector::Ones(plant.nu()));
  const SimTrace a = simulate(plant, imc, shared, H);
  const SimTrace b = simulate(plant, s1, shared, H);
  for (int t = 0; t <= H; ++t) {
    rep.imc_vs_structure1 = std::max(rep.imc_vs_structure1, (a.x[static_cast<std::size_t>(t)] - b.x[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff());
    rep.imc_vs_structure1 = std::max(rep.imc_vs_structure1, (a.u[static_cast<std::size_t>(t)] - b.u[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff());
  }

  Perturbations kick1;
  kick1.dbeta.assign(1, Vector::Unit(plant.nu(), 0));
  rep.structure1_peak = peak(simulate(plant, s1, kick1, H).x, 0);

  Perturbations kick2;
  kick2.dx.assign(1, Vector::Unit(plant.n(), 0));
  rep.structure2_peak = peak(simulate(plant, s2, kick2, H).x, 0);

  Perturbations kick3;
  kick3.dbeta.assign(1, Vector::Unit(plant.n(), 0));
  rep.of_tail = peak(simulate(plant, fig3, kick3, H).x, resp.horizon() + 3);
  return rep;
}

}  // namespace sls
