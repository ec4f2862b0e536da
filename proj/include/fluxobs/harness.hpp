#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fluxobs/constraint.hpp"
#include "fluxobs/em_models.hpp"
#include "fluxobs/integrator.hpp"
#include "fluxobs/observers.hpp"

namespace fluxobs {

enum class ModelKind { pmsm, maglev };
enum class FilterInit { zero, rest };

struct Scenario {
  std::string name = "custom";
  ModelKind model = ModelKind::maglev;

  PmsmParams pmsm;
  PmsmDrive drive;
  MaglevParams maglev;
  MaglevControllerParams controller;

  MeasurementBias bias;

  bool robust = false;
  bool adaptive = false;
  bool pebo = false;
  Vec robust_gain;    // diagonal of Gamma_r
  Vec adaptive_gain;  // diagonal over the stacked (lambda_hat, theta_hat)
  double gain_scale = 1.0;
  Vec lambda_hat0;    // empty means zero
  Vec theta_hat0;     // empty means zero

  double nu = 50.0;
  FilterInit filter_init = FilterInit::rest;

  double step = 1.0e-5;   // [s]
  double horizon = 10.0;  // [s]
  int decimation = 100;
  std::uint64_t seed = 0;
  double initial_flux_jitter = 0.0;  // relative, drawn from N(0, 1) with `seed`
  Vec initial_flux;  // empty means the model's rest flux

  double load = 0.0;  // constant F_L on every mechanical port

  // Cross-check of the pipeline against direct integration of the error models.
  bool error_models = false;
  double error_model_start = 0.1;  // [s]

  double burn_in = 0.1;    // [s], excluded from residual metrics
  double pe_window = 1.0;  // [s]

  Dims dims() const;
  ModelSpec model_spec() const;
  bool reduced_form() const;
  void validate() const;
};

/// Offsets of each block inside the flat coupled state vector.
struct StateLayout {
  struct Block {
    std::string name;
    int offset = -1;
    int size = 0;
    bool present() const { return offset >= 0; }
  };
  Block lambda, q, p, filters, robust, adaptive_lambda, adaptive_theta, pebo, robust_shadow,
      adaptive_shadow;
  int total = 0;

  static StateLayout build(const Scenario& sc);
  std::vector<const Block*> blocks() const;
};

struct CoupledState {
  std::int64_t step = 0;
  double t = 0.0;
  Eigen::VectorXd x;
  bool shadows_active = false;
  Rk4Workspace work;
};

struct TraceRecord {
  double t = 0.0;
  Vec lambda, q, p, i, u, i_m, u_m;
  Eigen::VectorXd xi;  // packed filter bank
  double y = 0.0;
  Vec phi_lambda, phi_theta;
  Vec theta;  // true parameters of the active bias segment
  Vec robust_lambda_hat;
  double robust_error = 0.0;
  Vec adaptive_lambda_hat, adaptive_theta_hat;
  double adaptive_lambda_error = 0.0;
  double adaptive_theta_error = 0.0;
  Vec pebo_lambda_hat;
  double pebo_error = 0.0;
  double w_residual = 0.0;
  double regression_residual = 0.0;
};

struct Trace {
  int n_e = 0, n_m = 0, m = 0;
  int filter_size = 0;
  bool robust = false, adaptive = false, pebo = false;
  int adaptive_theta_size = 0;
  double stride = 0.0;  // h * decimation
  std::vector<TraceRecord> records;
};

/// Ordered key/value summary; insertion order is the output order.
class Summary {
 public:
  void set(const std::string& key, double value);
  void set_text(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  double get(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct RunResult {
  Trace trace;
  Summary summary;
};

double regression_residual(double y, const Vec& phi_lambda, const Vec& lambda,
                           const Vec& phi_theta, const Vec& theta);

class Simulation {
 public:
  explicit Simulation(Scenario scenario);

  const Scenario& scenario() const { return sc_; }
  const ModelSpec& model() const { return spec_; }
  const StateLayout& layout() const { return layout_; }
  const TrueParameters& true_parameters_at(std::int64_t step) const;

  CoupledState initial_state() const;
  /// One fixed RK4 step of the coupled plant/filter/observer system. Throws
  /// DivergenceError naming the first non-finite block, DomainError on model
  /// breakdown.
  void step(CoupledState& state) const;
  /// Full derivative of the coupled system; stage time `t`, bias segment
  /// fixed by the step index.
  void derivative(double t, std::size_t segment, const Eigen::VectorXd& x,
                  Eigen::VectorXd& dx, bool shadows_active) const;
  TraceRecord snapshot(const CoupledState& state) const;

  PlantState plant_state(const Eigen::VectorXd& x) const;
  FilterBankState filter_state(const Eigen::VectorXd& x) const;
  std::size_t segment_for_step(std::int64_t step) const;
  std::int64_t total_steps() const;

  /// Voltage program or controller output at time t.
  Vec control(double t, const PlantState& st) const;

  RunResult run() const;

 private:

  Scenario sc_;
  ModelSpec spec_;
  StateLayout layout_;
  bool reduced_;
  Mat robust_gain_;
  Vec adaptive_gain_;
  std::vector<std::int64_t> switch_steps_;
  std::vector<TrueParameters> theta_;
  std::int64_t shadow_start_step_ = 0;
};

RunResult run(const Scenario& scenario);

struct SweepRow {
  double scale = 0.0;
  double steady_error = 0.0;
};

/// Robust-observer steady-state error (mean |lambda_tilde| over the last 10%
/// of the horizon) for each bias scale. Points run concurrently.
std::vector<SweepRow> bias_sweep(const Scenario& scenario, const std::vector<double>& scales);

}  // namespace fluxobs
