#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sls/controller.hpp"
#include "sls/fir.hpp"
#include "sls/plant.hpp"
#include "sls/response.hpp"
#include "sls/slc.hpp"

namespace sls::io {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

namespace detail {

inline std::vector<double> parse_row(const std::string& line, const std::string& where) {
  std::vector<double> row;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      row.push_back(std::stod(cell, &used));
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw IoError(where + ": cannot parse '" + cell + "'");
    }
  }
  return row;
}

inline bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

inline Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows, const std::string& where) {
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw IoError(where + ": ragged rows");
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

/// Writes through a temporary file and renames it into place.
template <class Fn>
void atomic_write(const std::filesystem::path& path, Fn&& body) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw IoError("cannot write " + tmp);
    body(os);
    os.flush();
    if (!os) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Dense CSV, row-major, no header.
inline Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line))
    if (!detail::blank(line)) rows.push_back(detail::parse_row(line, path.string()));
  return detail::rows_to_matrix(rows, path.string());
}

inline void save_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  detail::atomic_write(path, [&](std::ostream& os) { write_matrix_csv(os, m); });
}

/// 0/1 pattern CSV.
inline BoolArray read_pattern_csv(const std::filesystem::path& path) {
  const Matrix m = read_matrix_csv(path);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (m.data()[i] != 0.0 && m.data()[i] != 1.0) throw IoError(path.string() + ": pattern entries must be 0 or 1");
  return m.array() != 0.0;
}

/// FIR block: a header line, then one CSV block per spectral index.
inline void write_fir(std::ostream& os, const std::string& name, const FirMatrix& g) {
  os << "# block=" << name << " rows=" << g.rows() << " cols=" << g.cols() << " T=" << g.horizon() << '\n';
  for (int t = 0; t <= g.horizon(); ++t) {
    os << "# t=" << t << '\n';
    write_matrix_csv(os, g[t]);
  }
}

/// Reads every block of a FIR dump, keyed by block name.
inline std::map<std::string, FirMatrix> read_fir_blocks(std::istream& is, const std::string& where) {
  std::map<std::string, FirMatrix> out;
  std::string line, name;
  int rows = 0, cols = 0, T = -1, current = -1;
  std::vector<Matrix> coeffs;
  std::vector<std::vector<double>> pending;

  auto flush_coeff = [&] {
    if (current < 0) return;
    Matrix m = pending.empty() ? Matrix::Zero(rows, cols) : detail::rows_to_matrix(pending, where);
    if (m.rows() != rows || m.cols() != cols)
      throw IoError(where + ": block " + name + " t=" + std::to_string(current) + " has wrong shape");
    coeffs[static_cast<std::size_t>(current)] = std::move(m);
    pending.clear();
    current = -1;
  };
  auto flush_block = [&] {
    flush_coeff();
    if (!name.empty()) out[name] = FirMatrix(coeffs);
    name.clear();
  };

  while (std::getline(is, line)) {
    if (detail::blank(line)) continue;
    if (line.rfind("# block=", 0) == 0) {
      flush_block();
      std::istringstream hs(line.substr(2));
      std::string tok;
      while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        try {
          if (key == "block") name = val;
          else if (key == "rows") rows = std::stoi(val);
          else if (key == "cols") cols = std::stoi(val);
          else if (key == "T") T = std::stoi(val);
        } catch (const std::exception&) {
          throw IoError(where + ": bad header '" + line + "'");
        }
      }
      if (name.empty() || T < 0 || rows < 0 || cols < 0) throw IoError(where + ": bad header '" + line + "'");
      coeffs.assign(static_cast<std::size_t>(T + 1), Matrix::Zero(rows, cols));
    } else if (line.rfind("# t=", 0) == 0) {
      flush_coeff();
      if (name.empty()) throw IoError(where + ": coefficient before block header");
      try {
        current = std::stoi(line.substr(4));
      } catch (const std::exception&) {
        throw IoError(where + ": bad index line '" + line + "'");
      }
      if (current < 0 || current > T) throw IoError(where + ": index out of range in block " + name);
    } else if (line[0] == '#') {
      continue;
    } else {
      if (current < 0) throw IoError(where + ": data outside a coefficient block");
      pending.push_back(detail::parse_row(line, where));
    }
  }
  flush_block();
  return out;
}

inline void write_response(std::ostream& os, const SystemResponse& r) {
  write_fir(os, "R", r.R);
  write_fir(os, "M", r.M);
  if (r.N) write_fir(os, "N", *r.N);
  if (r.L) write_fir(os, "L", *r.L);
}

inline void save_response(const std::filesystem::path& path, const SystemResponse& r) {
  detail::atomic_write(path, [&](std::ostream& os) { write_response(os, r); });
}

inline SystemResponse load_response(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  auto blocks = read_fir_blocks(is, path.string());
  if (!blocks.count("R") || !blocks.count("M")) throw IoError(path.string() + ": missing R or M block");
  SystemResponse r{blocks.at("R"), blocks.at("M"), std::nullopt, std::nullopt};
  if (blocks.count("N") != blocks.count("L")) throw IoError(path.string() + ": N and L must come together");
  if (blocks.count("N")) {
    r.N = blocks.at("N");
    r.L = blocks.at("L");
  }
  return r;
}

/// Trace as CSV: t, x..., u..., y..., beta...
inline void write_trace_csv(std::ostream& os, const SimTrace& tr) {
  auto header = [&](const char* p, const std::vector<Vector>& s) {
    const Eigen::Index k = s.empty() ? 0 : s.front().size();
    for (Eigen::Index i = 0; i < k; ++i) os << ',' << p << i;
  };
  os << 't';
  header("x", tr.x);
  header("u", tr.u);
  header("y", tr.y);
  header("beta", tr.beta);
  os << '\n';
  for (std::size_t t = 0; t < tr.x.size(); ++t) {
    os << t;
    for (const auto* s : {&tr.x, &tr.u, &tr.y, &tr.beta})
      for (Eigen::Index i = 0; i < (*s)[t].size(); ++i) os << ',' << format_double((*s)[t](i));
    os << '\n';
  }
}

}  // namespace sls::io
