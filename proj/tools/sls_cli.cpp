// Command-line front end: synth, sweep, simulate, verify, qi-check.
//
// Exit codes: 0 success / feasible / pass, 2 infeasible / fail, 1 error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "sls/sls.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sls;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kFail = 2;

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  json doc;
  fs::path dir;  // relative paths resolve against the config's directory

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : dir / path;
  }
};

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CliError("cannot read config " + path);
  RunConfig cfg;
  try {
    cfg.doc = json::parse(is);
  } catch (const json::exception& e) {
    throw CliError("config " + path + ": " + e.what());
  }
  cfg.dir = fs::path(path).parent_path();
  return cfg;
}

std::vector<int> actuator_sites(const json& spec, int n) {
  if (!spec.contains("actuators") || spec["actuators"] == "benchmark") return benchmark_actuator_sites(n);
  if (spec["actuators"] == "all") {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i + 1;
    return all;
  }
  return spec["actuators"].get<std::vector<int>>();
}

PlantModel random_plant(const json& spec, std::uint64_t seed) {
  const int n = spec.value("n", 3), nu = spec.value("nu", 1), ny = spec.value("ny", n);
  const bool sf = spec.value("state_feedback", false);
  std::mt19937_64 rng(spec.value("seed", seed));
  std::normal_distribution<double> g;
  auto rnd = [&](int r, int c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
  };
  Matrix A = rnd(n, n);
  if (spec.contains("rho")) A *= spec["rho"].get<double>() / std::max(spectral_radius(A), 1e-12);
  const Matrix B2 = rnd(n, nu);
  const Matrix C1 = (Matrix(n + nu, n) << Matrix::Identity(n, n), Matrix::Zero(nu, n)).finished();
  const Matrix D12 = (Matrix(n + nu, nu) << Matrix::Zero(n, nu), Matrix::Identity(nu, nu)).finished();
  if (sf) return PlantModel::state_feedback(A, Matrix::Identity(n, n), B2, C1, Matrix::Zero(n + nu, n), D12);
  const Matrix B1 = (Matrix(n, n + ny) << Matrix::Identity(n, n), Matrix::Zero(n, ny)).finished();
  const Matrix D21 = (Matrix(ny, n + ny) << Matrix::Zero(ny, n), Matrix::Identity(ny, ny)).finished();
  return PlantModel(A, B1, B2, C1, Matrix::Zero(n + nu, n + ny), D12, rnd(ny, n), D21, Matrix::Zero(ny, nu));
}

PlantModel load_plant(const RunConfig& cfg, std::uint64_t seed) {
  if (!cfg.doc.contains("plant")) throw CliError("config: missing 'plant'");
  const json& spec = cfg.doc["plant"];
  const std::string type = spec.value("type", "chain");
  if (type == "chain") {
    ChainParams p;
    p.n = spec.value("n", p.n);
    p.kappa = spec.value("kappa", p.kappa);
    p.rho_target = spec.value("rho", p.rho_target);
    p.gamma = spec.value("gamma", p.gamma);
    p.actuator_sites = actuator_sites(spec, p.n);
    return build_chain(p);
  }
  if (type == "random") return random_plant(spec, seed);
  if (type == "matrices") {
    auto get = [&](const char* key) -> std::optional<Matrix> {
      if (!spec.contains(key)) return std::nullopt;
      return io::read_matrix_csv(cfg.resolve(spec[key].get<std::string>()));
    };
    const Matrix A = *get("A");
    const int n = static_cast<int>(A.rows());
    const Matrix B2 = get("B2").value();
    const int nu = static_cast<int>(B2.cols());
    const Matrix B1 = get("B1").value_or(Matrix::Identity(n, n));
    const Matrix C1 = get("C1").value_or(
        (Matrix(n + nu, n) << Matrix::Identity(n, n), Matrix::Zero(nu, n)).finished());
    const Matrix D12 = get("D12").value_or(
        (Matrix(C1.rows(), nu) << Matrix::Zero(n, nu), Matrix::Identity(nu, nu)).finished());
    const Matrix D11 = get("D11").value_or(Matrix::Zero(C1.rows(), B1.cols()));
    if (!spec.contains("C2")) return PlantModel::state_feedback(A, B1, B2, C1, D11, D12);
    const Matrix C2 = *get("C2");
    const Matrix D21 = get("D21").value_or(Matrix::Zero(C2.rows(), B1.cols()));
    const Matrix D22 = get("D22").value_or(Matrix::Zero(C2.rows(), nu));
    return PlantModel(A, B1, B2, C1, D11, D12, C2, D21, D22);
  }
  throw CliError("config: unknown plant type '" + type + "'");
}

Mode load_mode(const RunConfig& cfg) {
  const std::string m = cfg.doc.value("mode", "sf");
  if (m == "sf" || m == "state_feedback") return Mode::StateFeedback;
  if (m == "of" || m == "output_feedback") return Mode::OutputFeedback;
  throw CliError("config: unknown mode '" + m + "'");
}

SynthesisOptions load_options(const RunConfig& cfg, int threads, double tol) {
  SynthesisOptions o;
  const json solver = cfg.doc.value("solver", json::object());
  o.feasibility_tol = solver.value("tol", o.feasibility_tol);
  o.threads = solver.value("threads", o.threads);
  o.dense_limit = solver.value("dense_limit", o.dense_limit);
  o.of_variable_budget = solver.value("of_variable_budget", o.of_variable_budget);
  if (threads > 0) o.threads = threads;
  if (tol > 0) o.feasibility_tol = tol;
  if (!(o.feasibility_tol > 0)) throw CliError("config: tolerance must be > 0");
  return o;
}

SlcSet load_slc(const RunConfig& cfg, const PlantModel& plant, Mode mode) {
  const json spec = cfg.doc.value("slc", json::object());
  const int T = spec.value("T", 10);
  const double t_c = spec.value("t_c", 0.0);
  const bool of = mode == Mode::OutputFeedback;
  const InterconnectionGraph g(plant.A());
  if (!spec.contains("d") || spec["d"].is_null()) {
    SlcSet s = fir(plant, T, of);
    if (t_c > 0) s = intersect(s, delay(plant, g, t_c, T, of));
    return s;
  }
  return spatiotemporal(plant, g, spec["d"].get<int>(), t_c, T, of);
}

fs::path ensure_out(const std::string& out) {
  const fs::path p(out.empty() ? "." : out);
  fs::create_directories(p);
  return p;
}

SystemResponse load_response_arg(const RunConfig& cfg, const std::string& flag) {
  std::string path = flag;
  if (path.empty()) {
    if (!cfg.doc.contains("response")) throw CliError("no response file given (--response or config 'response')");
    return io::load_response(cfg.resolve(cfg.doc["response"].get<std::string>()));
  }
  return io::load_response(path);
}

int cmd_synth(const RunConfig& cfg, const fs::path& out, int threads, double tol, std::uint64_t seed) {
  const PlantModel plant = load_plant(cfg, seed);
  const Mode mode = load_mode(cfg);
  const SynthesisProblem problem{plant, load_slc(cfg, plant, mode), mode};
  const SynthesisResult res = synthesize(problem, load_options(cfg, threads, tol));

  io::save_response(out / "response.txt", res.response);
  io::detail::atomic_write(out / "cost.txt", [&](std::ostream& os) { os << io::format_double(res.cost) << '\n'; });
  io::detail::atomic_write(out / "columns.csv", [&](std::ostream& os) {
    os << "column,status,residual\n";
    for (std::size_t j = 0; j < res.columns.size(); ++j)
      os << j << ',' << (res.columns[j].feasible ? "feasible" : "infeasible") << ','
         << io::format_double(res.columns[j].residual) << '\n';
  });
  std::cout << (res.feasible() ? "feasible" : "infeasible") << " cost=" << io::format_double(res.cost)
            << " columns_infeasible=" << res.columns_infeasible() << '\n';
  return res.feasible() ? kOk : kFail;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& out, int threads, double tol, std::uint64_t seed) {
  const PlantModel plant = load_plant(cfg, seed);
  const Mode mode = load_mode(cfg);
  if (!cfg.doc.contains("sweep")) throw CliError("config: missing 'sweep'");
  const json& s = cfg.doc["sweep"];
  SweepGrid grid;
  grid.d = s.at("d").get<std::vector<int>>();
  grid.T = s.at("T").get<std::vector<int>>();
  if (s.contains("t_c")) grid.t_c = s["t_c"].get<std::vector<double>>();
  if (grid.d.empty() || grid.T.empty() || grid.t_c.empty()) throw CliError("config: sweep grids must be nonempty");

  const double baseline = centralized_baseline(plant);
  const bool timing = !cfg.doc.value("deterministic", false);
  const auto rows = run_sweep(plant, grid, mode, baseline, load_options(cfg, threads, tol), timing);
  io::detail::atomic_write(out / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, rows); });

  const auto bad = monotonicity_violations(rows);
  for (const auto& v : bad) std::cerr << "monotonicity violation: " << v << '\n';
  std::cout << rows.size() << " rows, baseline=" << io::format_double(baseline)
            << ", monotonicity violations=" << bad.size() << '\n';
  return bad.empty() ? kOk : kFail;
}

Channel parse_channel(const std::string& s) {
  if (s == "dx") return Channel::dx;
  if (s == "dy") return Channel::dy;
  if (s == "du") return Channel::du;
  if (s == "dbeta") return Channel::dbeta;
  throw CliError("unknown channel '" + s + "'");
}

RealizationKind parse_kind(const std::string& s) {
  for (auto k : {RealizationKind::sf, RealizationKind::of, RealizationKind::of_d22, RealizationKind::structure1,
                 RealizationKind::structure2, RealizationKind::imc})
    if (to_string(k) == s) return k;
  throw CliError("unknown realization '" + s + "'");
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out, const std::string& response, std::uint64_t seed) {
  const PlantModel plant = load_plant(cfg, seed);
  const SystemResponse resp = load_response_arg(cfg, response);
  const json sim = cfg.doc.value("simulate", json::object());
  const RealizationKind kind = parse_kind(sim.value("kind", resp.is_output_feedback() ? "of" : "sf"));
  const int H = sim.value("steps", 3 * resp.horizon() + plant.n());
  const ControllerRealization c = realize(plant, resp, kind);

  Perturbations p;
  for (const auto& imp : sim.value("impulses", json::array())) {
    const Channel ch = parse_channel(imp.at("channel").get<std::string>());
    const int t = imp.value("t", 0), k = imp.value("index", 0);
    const double v = imp.value("value", 1.0);
    auto& series = ch == Channel::dx ? p.dx : ch == Channel::dy ? p.dy : ch == Channel::du ? p.du : p.dbeta;
    const int dim = ch == Channel::dx ? plant.n()
                    : ch == Channel::dy ? plant.ny()
                    : ch == Channel::du ? plant.nu()
                    : kind == RealizationKind::structure1                                     ? plant.nu()
                    : kind == RealizationKind::structure2 || kind == RealizationKind::imc ? plant.ny()
                                                                                              : plant.n();
    if (k < 0 || k >= dim || t < 0) throw CliError("impulse index out of range");
    if (static_cast<int>(series.size()) <= t) series.resize(static_cast<std::size_t>(t + 1), Vector::Zero(dim));
    series[static_cast<std::size_t>(t)](k) += v;
  }
  const SimTrace tr = simulate(plant, c, p, H);
  io::detail::atomic_write(out / "trace.csv", [&](std::ostream& os) { io::write_trace_csv(os, tr); });
  std::cout << "simulated " << H << " steps (" << to_string(kind) << ")\n";
  return kOk;
}

int cmd_verify(const RunConfig& cfg, const std::string& response, double tol, std::uint64_t seed) {
  const PlantModel plant = load_plant(cfg, seed);
  const SystemResponse resp = load_response_arg(cfg, response);
  const double check_tol = tol > 0 ? tol : 1e-8;
  const double residual = resp.is_output_feedback() ? of_residual(plant, resp) : sf_residual(plant, resp);
  std::cout << "achievability residual " << residual << '\n';
  if (residual > check_tol) std::cout << "response not achievable\n";
  const StabilityReport rep = verify_internal_stability(plant, resp, check_tol);
  std::cout << rep.summary();
  return rep.passed ? kOk : kFail;
}

int cmd_qi(const RunConfig* cfg, const std::string& kpath, const std::string& ppath) {
  std::string k = kpath, p = ppath;
  fs::path kf = k, pf = p;
  if (cfg && cfg->doc.contains("qi")) {
    if (k.empty()) kf = cfg->resolve(cfg->doc["qi"].at("K").get<std::string>());
    if (p.empty()) pf = cfg->resolve(cfg->doc["qi"].at("P").get<std::string>());
  }
  if (kf.empty() || pf.empty()) throw CliError("qi-check needs K and P pattern files");
  const bool qi = is_qi(io::read_pattern_csv(kf), io::read_pattern_csv(pf));
  std::cout << (qi ? "quadratically invariant" : "not quadratically invariant") << '\n';
  return qi ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"System level synthesis toolkit"};
  app.require_subcommand(1);
  std::string config, out = ".", response, kfile, pfile;
  int threads = 0;
  double tol = 0.0;
  std::uint64_t seed = 0;
  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config, "JSON run configuration");
    if (needs_config) opt->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--threads", threads, "worker threads for column solves");
    sub->add_option("--tol", tol, "feasibility / verification tolerance");
    sub->add_option("--seed", seed, "seed for randomly generated plants");
  };
  auto* synth = app.add_subcommand("synth", "solve one synthesis problem");
  common(synth, true);
  auto* sweep = app.add_subcommand("sweep", "cost over a (d, T, t_c) grid");
  common(sweep, true);
  auto* sim = app.add_subcommand("simulate", "closed-loop simulation of a realized response");
  common(sim, true);
  sim->add_option("--response", response, "response file (FIR dump)");
  auto* verify = app.add_subcommand("verify", "achievability and internal stability check");
  common(verify, true);
  verify->add_option("--response", response, "response file (FIR dump)");
  auto* qi = app.add_subcommand("qi-check", "quadratic invariance of a K pattern under P");
  common(qi, false);
  qi->add_option("--K", kfile, "controller pattern CSV (0/1)");
  qi->add_option("--P", pfile, "plant pattern CSV (0/1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kError;
  }

  try {
    if (*qi) {
      std::optional<RunConfig> cfg;
      if (!config.empty()) cfg = load_config(config);
      return cmd_qi(cfg ? &*cfg : nullptr, kfile, pfile);
    }
    const RunConfig cfg = load_config(config);
    if (*verify) return cmd_verify(cfg, response, tol, seed);
    const fs::path dir = ensure_out(out);
    if (*synth) return cmd_synth(cfg, dir, threads, tol, seed);
    if (*sweep) return cmd_sweep(cfg, dir, threads, tol, seed);
    if (*sim) return cmd_simulate(cfg, dir, response, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return kError;
}
