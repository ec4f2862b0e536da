#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "fluxobs/harness.hpp"

namespace fluxobs {

/// CSV column names in output order:
///   t, lambda_k, q_k, p_k, i_k, u_k, i_m_k, u_m_k, xi_k (packed bank), y,
///   phi_lambda_k, phi_theta_k, theta_k,
///   [robust_lambda_hat_k, robust_error],
///   [adaptive_lambda_hat_k, adaptive_theta_hat_k, adaptive_lambda_error, adaptive_theta_error],
///   [pebo_lambda_hat_k, pebo_error],
///   w_residual, regression_residual.
/// Indices k start at 1; bracketed groups appear only for enabled observers.
std::vector<std::string> trace_columns(const Trace& trace);

/// Writes the header and one row per record, every value as %.17g.
void write_trace_csv(const Trace& trace, std::ostream& out);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws std::out_of_range when absent.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);

/// Sidecar: version and integration settings as comments, then the full
/// scenario echo. The file parses back with parse_scenario.
void write_metadata(const Scenario& sc, std::ostream& out);

/// key = value, one per line, in summary order.
void write_summary(const Summary& summary, std::ostream& out);

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

/// Writes trace.csv, metadata.txt and summary.txt into `dir` (created if needed).
void write_run_outputs(const Scenario& sc, const RunResult& result, const std::string& dir);

}  // namespace fluxobs
