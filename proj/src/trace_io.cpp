#include "fluxobs/trace_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fluxobs/scenario_io.hpp"
#include "fluxobs/version.hpp"

namespace fluxobs {

namespace {

void add(std::vector<std::string>& cols, const std::string& base, Eigen::Index n) {
  for (Eigen::Index k = 1; k <= n; ++k) cols.push_back(base + "_" + std::to_string(k));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename V>
void put(std::string& row, const V& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    row += ',';
    row += fmt(v[k]);
  }
}

void put(std::string& row, double v) {
  row += ',';
  row += fmt(v);
}

}  // namespace

std::vector<std::string> trace_columns(const Trace& tr) {
  std::vector<std::string> c{"t"};
  add(c, "lambda", tr.n_e);
  add(c, "q", tr.n_m);
  add(c, "p", tr.n_m);
  add(c, "i", tr.n_e);
  add(c, "u", tr.m);
  add(c, "i_m", tr.n_e);
  add(c, "u_m", tr.m);
  add(c, "xi", tr.filter_size);
  c.push_back("y");
  add(c, "phi_lambda", tr.n_e);
  add(c, "phi_theta", theta_size(tr.n_e));
  add(c, "theta", theta_size(tr.n_e));
  if (tr.robust) {
    add(c, "robust_lambda_hat", tr.n_e);
    c.push_back("robust_error");
  }
  if (tr.adaptive) {
    add(c, "adaptive_lambda_hat", tr.n_e);
    add(c, "adaptive_theta_hat", tr.adaptive_theta_size);
    c.push_back("adaptive_lambda_error");
    c.push_back("adaptive_theta_error");
  }
  if (tr.pebo) {
    add(c, "pebo_lambda_hat", tr.n_e);
    c.push_back("pebo_error");
  }
  c.push_back("w_residual");
  c.push_back("regression_residual");
  return c;
}

void write_trace_csv(const Trace& tr, std::ostream& out) {
  const auto cols = trace_columns(tr);
  for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << cols[j];
  out << '\n';
  std::string row;
  for (const TraceRecord& r : tr.records) {
    row = fmt(r.t);
    put(row, r.lambda);
    put(row, r.q);
    put(row, r.p);
    put(row, r.i);
    put(row, r.u);
    put(row, r.i_m);
    put(row, r.u_m);
    put(row, r.xi);
    put(row, r.y);
    put(row, r.phi_lambda);
    put(row, r.phi_theta);
    put(row, r.theta);
    if (tr.robust) {
      put(row, r.robust_lambda_hat);
      put(row, r.robust_error);
    }
    if (tr.adaptive) {
      put(row, r.adaptive_lambda_hat);
      put(row, r.adaptive_theta_hat);
      put(row, r.adaptive_lambda_error);
      put(row, r.adaptive_theta_error);
    }
    if (tr.pebo) {
      put(row, r.pebo_lambda_hat);
      put(row, r.pebo_error);
    }
    put(row, r.w_residual);
    put(row, r.regression_residual);
    out << row << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return j;
  }
  throw std::out_of_range("no column '" + name + "'");
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line, cell;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
  std::istringstream hs(line);
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(t.header.size());
    std::istringstream rs(line);
    while (std::getline(rs, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != t.header.size()) {
      throw std::runtime_error("csv: row " + std::to_string(t.rows.size() + 1) + " has " +
                               std::to_string(row.size()) + " cells, header has " +
                               std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_metadata(const Scenario& sc, std::ostream& out) {
  out << "# version = " << kVersion << '\n';
  out << "# step = " << fmt(sc.step) << " s, nu = " << fmt(sc.nu)
      << " 1/s, gain_scale = " << fmt(sc.gain_scale) << '\n';
  out << "# integrator = rk4, decimation = " << sc.decimation << '\n';
  out << serialize_scenario(sc);
}

void write_summary(const Summary& s, std::ostream& out) {
  for (const auto& [k, v] : s.entries()) out << k << " = " << v << '\n';
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "scale,steady_error\n";
  for (const auto& r : rows) out << fmt(r.scale) << ',' << fmt(r.steady_error) << '\n';
}

void write_run_outputs(const Scenario& sc, const RunResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(dir) / name);
    if (!f) throw std::runtime_error(std::string("cannot write ") + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("trace.csv");
    write_trace_csv(result.trace, f);
  }
  {
    auto f = open("metadata.txt");
    write_metadata(sc, f);
  }
  {
    auto f = open("summary.txt");
    write_summary(result.summary, f);
  }
}

}  // namespace fluxobs
