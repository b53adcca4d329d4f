#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fixtures.hpp"

using namespace sls;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = SLS_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sls_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SLS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string cfg(const std::string& name) { return "--config " + (kConfigs / name).string(); }

}  // namespace

// ------------------------------------------------------------------ files

TEST(Io, MatrixRoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  const Matrix m = oracle::gaussian(rng, 4, 3) * 1e-7;
  const fs::path dir = scratch("matrix");
  io::save_matrix_csv(dir / "m.csv", m);
  const Matrix back = io::read_matrix_csv(dir / "m.csv");
  ASSERT_EQ(back.rows(), 4);
  EXPECT_EQ((back - m).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_FALSE(fs::exists(dir / "m.csv.tmp"));
}

TEST(Io, MalformedFilesRejected) {
  const fs::path dir = scratch("bad");
  std::ofstream(dir / "ragged.csv") << "1,2\n3\n";
  std::ofstream(dir / "text.csv") << "1,x\n";
  std::ofstream(dir / "pattern.csv") << "1,0.5\n";
  EXPECT_THROW(io::read_matrix_csv(dir / "ragged.csv"), io::IoError);
  EXPECT_THROW(io::read_matrix_csv(dir / "text.csv"), io::IoError);
  EXPECT_THROW(io::read_pattern_csv(dir / "pattern.csv"), io::IoError);
  EXPECT_THROW(io::read_matrix_csv(dir / "missing.csv"), io::IoError);
  std::ofstream(dir / "resp.txt") << "# block=R rows=1 cols=1 T=1\n# t=0\n0\n# t=1\n1\n";
  EXPECT_THROW(io::load_response(dir / "resp.txt"), io::IoError);  // no M block
}

TEST(Io, ResponseRoundTrip) {
  std::mt19937_64 rng(2);
  const SystemResponse r{FirMatrix({Matrix::Zero(2, 2), oracle::gaussian(rng, 2, 2)}),
                         FirMatrix({Matrix::Zero(1, 2), oracle::gaussian(rng, 1, 2)}),
                         FirMatrix({Matrix::Zero(2, 3), oracle::gaussian(rng, 2, 3)}),
                         FirMatrix({oracle::gaussian(rng, 1, 3), oracle::gaussian(rng, 1, 3)})};
  const fs::path dir = scratch("resp");
  io::save_response(dir / "r.txt", r);
  const SystemResponse back = io::load_response(dir / "r.txt");
  ASSERT_TRUE(back.is_output_feedback());
  EXPECT_EQ((back.R - r.R).max_abs(), 0.0);
  EXPECT_EQ((back.M - r.M).max_abs(), 0.0);
  EXPECT_EQ((*back.N - *r.N).max_abs(), 0.0);
  EXPECT_EQ((*back.L - *r.L).max_abs(), 0.0);
  EXPECT_NE(slurp(dir / "r.txt").find("# t=1"), std::string::npos);
}

TEST(Io, TraceCsvShape) {
  const PlantModel p = fixture::fully_actuated_chain(3);
  const SystemResponse r{FirMatrix::delay(3, 1), -1.0 * (p.A() * FirMatrix::delay(3, 1)), std::nullopt,
                         std::nullopt};
  const SimTrace tr = simulate(p, realize(p, r, RealizationKind::sf), Perturbations{}, 4);
  std::ostringstream os;
  io::write_trace_csv(os, tr);
  std::istringstream is(os.str());
  std::string header, line;
  std::getline(is, header);
  EXPECT_EQ(header.rfind("t,x0,x1,x2,u0", 0), 0u);
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 5);
}

// -------------------------------------------------------------------- CLI

TEST(Cli, SynthExampleOneMatchesLibrary) {
  const fs::path out = scratch("ex1");
  ASSERT_EQ(run_cli("synth " + cfg("example1.json") + " --out " + out.string()), 0);
  const double cost = std::stod(slurp(out / "cost.txt"));
  const PlantModel p = fixture::fully_actuated_chain(10);
  const SystemResponse kA{FirMatrix::delay(10, 1), -1.0 * (p.A() * FirMatrix::delay(10, 1)), std::nullopt,
                          std::nullopt};
  EXPECT_NEAR(cost, h2_cost(p, kA), 1e-12);
  const SystemResponse back = io::load_response(out / "response.txt");
  EXPECT_LT((back.M.coeff(1) + p.A()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NE(slurp(out / "columns.csv").find("column,status,residual"), std::string::npos);
}

TEST(Cli, InfeasibleAndErrorExitCodes) {
  const fs::path out = scratch("codes");
  EXPECT_EQ(run_cli("synth " + cfg("infeasible_d0.json") + " --out " + out.string()), 2);
  EXPECT_NE(slurp(out / "columns.csv").find("infeasible"), std::string::npos);
  EXPECT_EQ(run_cli("synth --config " + (out / "nope.json").string() + " --out " + out.string()), 1);
  std::ofstream(out / "bad.json") << R"({"plant": {"type": "torus"}})";
  EXPECT_EQ(run_cli("synth --config " + (out / "bad.json").string() + " --out " + out.string()), 1);
  std::ofstream(out / "broken.json") << "{ not json";
  EXPECT_EQ(run_cli("synth --config " + (out / "broken.json").string()), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
}

TEST(Cli, MatrixPlantConfig) {
  const fs::path out = scratch("matrices");
  EXPECT_EQ(run_cli("synth " + cfg("matrices.json") + " --out " + out.string()), 0);
}

TEST(Cli, SweepIsDeterministicWithStableHeader) {
  const fs::path a = scratch("sweep_a"), b = scratch("sweep_b");
  ASSERT_EQ(run_cli("sweep " + cfg("sweep_small.json") + " --out " + a.string()), 0);
  ASSERT_EQ(run_cli("sweep " + cfg("sweep_small.json") + " --out " + b.string() + " --threads 2"), 0);
  const std::string csv = slurp(a / "sweep.csv");
  EXPECT_EQ(csv, slurp(b / "sweep.csv"));
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "d,T,t_c,status,cost,normalized_cost,wall_time_ms,columns_infeasible");
  int rows = 0, feasible = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (line.find(",feasible,") != std::string::npos) ++feasible;
  }
  EXPECT_EQ(rows, 24);
  EXPECT_GT(feasible, 0);
}

TEST(Cli, VerifyPassesAndCatchesCorruption) {
  const fs::path out = scratch("verify");
  ASSERT_EQ(run_cli("synth " + cfg("chain20.json") + " --out " + out.string()), 0);
  EXPECT_EQ(run_cli("verify " + cfg("chain20.json") + " --response " + (out / "response.txt").string()), 0);

  SystemResponse r = io::load_response(out / "response.txt");
  r.R[2](3, 4) += 0.1;
  io::save_response(out / "corrupt.txt", r);
  EXPECT_EQ(run_cli("verify " + cfg("chain20.json") + " --response " + (out / "corrupt.txt").string()), 2);
  EXPECT_EQ(run_cli("verify " + cfg("chain20.json") + " --response " + (out / "absent.txt").string()), 1);
}

TEST(Cli, SimulateWritesTrace) {
  const fs::path out = scratch("simulate");
  ASSERT_EQ(run_cli("synth " + cfg("random_of.json") + " --out " + out.string()), 0);
  ASSERT_EQ(run_cli("simulate " + cfg("random_of.json") + " --out " + out.string() + " --response " +
                    (out / "response.txt").string()),
            0);
  std::istringstream is(slurp(out / "trace.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 31);

  ASSERT_EQ(run_cli("synth " + cfg("chain20.json") + " --out " + out.string()), 0);
  ASSERT_EQ(run_cli("simulate " + cfg("chain20.json") + " --out " + out.string() + " --response " +
                    (out / "response.txt").string()),
            0);
}

TEST(Cli, QiCheck) {
  const fs::path qi = kConfigs / "qi";
  EXPECT_EQ(run_cli("qi-check " + cfg("qi_lower.json")), 0);
  EXPECT_EQ(run_cli("qi-check --K " + (qi / "lower3.csv").string() + " --P " + (qi / "lower3.csv").string()), 0);
  EXPECT_EQ(run_cli("qi-check --K " + (qi / "diag2.csv").string() + " --P " + (qi / "ones2.csv").string()), 2);
  EXPECT_EQ(run_cli("qi-check --K " + (qi / "ones2.csv").string() + " --P " + (qi / "diag2.csv").string()), 0);
  EXPECT_EQ(run_cli("qi-check --K " + (qi / "lower3.csv").string() + " --P " + (qi / "ones2.csv").string()), 1);
}
