#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fluxobs/constraint.hpp"
#include "fluxobs/types.hpp"

namespace fluxobs {

struct PlantState {
  Vec lambda;  // flux linkages [V s]
  Vec q;       // mechanical coordinates
  Vec p;       // momenta
};

struct PlantDerivative {
  Vec lambda;
  Vec q;
  Vec p;
};

/// Linear magnetics lambda = L(q) i + mu(q). Partials are with respect to the
/// k-th mechanical coordinate.
struct LinearMagnetics {
  std::function<Mat(const Vec& q)> inductance;
  std::function<Mat(const Vec& q, int k)> inductance_partial;
  std::function<Vec(const Vec& q)> magnet_flux;
  std::function<Vec(const Vec& q, int k)> magnet_flux_partial;
};

/// One electromechanical plant in port-Hamiltonian form. Immutable after
/// construction; the callables must be pure.
///
/// Mechanical interconnection is q' = K grad_p H, p' = -K^T grad_q H - R_M grad_p H + F_L
/// with K = `coupling` (identity for the standard form; the 2-DOF MagLev
/// uses the lever arm D).
struct ModelSpec {
  std::string name;
  Dims dims;
  Mat r_eff;     // n_E x n_E, as it enters the flux equation
  Mat input;     // B, n_E x m
  Mat r_mech;    // n_M x n_M
  Mat coupling;  // n_M x n_M
  ConstraintConstants constraint;

  std::function<Vec(const Vec& lambda, const Vec& q)> current;           // grad_lambda H_E
  std::function<Vec(const Vec& lambda, const Vec& q)> electric_q_grad;   // grad_q H_E
  std::function<Vec(const Vec& q, const Vec& p)> velocity;               // grad_p H_M
  std::function<Vec(const Vec& q, const Vec& p)> mechanical_q_grad;      // grad_q H_M
  std::function<double(const Vec& lambda, const Vec& q)> electric_energy;
  std::function<double(const Vec& q, const Vec& p)> mechanical_energy;
  /// Throws DomainError when the state is outside the model's validity.
  std::function<void(const PlantState&)> check_domain;

  std::optional<LinearMagnetics> magnetics;

  double total_energy(const PlantState& s) const {
    return electric_energy(s.lambda, s.q) + mechanical_energy(s.q, s.p);
  }
};

struct PmsmParams {
  double l_s = 2.0e-3;      // stator inductance [H]
  double lambda_m = 0.05;   // magnet flux [V s]
  int n_p = 4;              // pole pairs
  double r_s = 0.5;         // stator resistance [Ohm]
  double inertia = 1.0e-4;  // [kg m^2]
  double friction = 0.0;    // R_M [N m s]

  void validate() const;
};

/// Open-loop two-phase drive u = amplitude * (cos wt, sin wt).
struct PmsmDrive {
  double amplitude = 5.0;    // [V]
  double frequency = 100.0;  // [rad/s]

  Vec voltage(double t) const;
};

struct MaglevParams {
  double inertia = 9.67e-2;  // J [kg m^2]
  double k1 = 2.2e-8;        // [H m]
  double k2 = 2.2e-8;        // [H m]
  double r = 1.6;            // coil resistance [Ohm]
  double turns = 321.0;      // N
  double c1 = 293.5;
  double c2 = 293.5;
  double gap = 3.3e-4;   // g [m]
  double arm = 0.145;    // D [m]
  double friction = 0.0;

  void validate() const;
  Mat inductance(double q) const;
};

struct MaglevControllerParams {
  double alpha = 10.0;
  double beta = -10.0;
  double r_a = 1.0e-2;
  double gain = 1.0;          // G
  double lambda2_star = 0.0;  // [V s]
  double q_star = 0.0;        // [m]
  double p_star = 0.0;
  double reference_scale = 1.0;  // multiplies the multisine q_d(t)
  // Apply the coil voltage through 1/(N c_k), so that N c_k lambda_k' = v_k - R i_k.
  bool coil_scaling = false;

  void validate() const;
  double lambda1_star(const MaglevParams& plant) const;
};

struct BiasSegment {
  double start = 0.0;  // [s]
  Vec delta_i;
  Vec delta_u;
};

/// Piecewise-constant measurement biases. Segment starts are strictly
/// increasing and the first segment starts at t = 0.
struct MeasurementBias {
  std::vector<BiasSegment> schedule;

  static MeasurementBias constant(const Vec& delta_i, const Vec& delta_u);
  static MeasurementBias none(const Dims& dims);

  void validate(const Dims& dims) const;
  const BiasSegment& active(double t) const;
  std::size_t active_index(double t) const;
  MeasurementBias scaled(double factor) const;
};

struct Measurement {
  Vec i_m;
  Vec u_m;
};

ModelSpec make_pmsm(const PmsmParams& params);
ModelSpec make_maglev(const MaglevParams& params);

ConstraintConstants pmsm_constraint(const PmsmParams& params);
ConstraintConstants maglev_constraint(const MaglevParams& params);

Vec constitutive_current(const ModelSpec& spec, const Vec& lambda, const Vec& q);

/// lambda = L(q) i + mu(q); requires linear magnetics.
Vec flux_from_current(const ModelSpec& spec, const Vec& q, const Vec& i);

/// di/dt along (lambda', q') for linear magnetics.
Vec current_rate(const ModelSpec& spec, const PlantState& state, const Vec& lambda_dot,
                 const Vec& q_dot);

PlantDerivative ph_dynamics(const ModelSpec& spec, const PlantState& state, const Vec& u,
                            const Vec& load);

Measurement measure(const Vec& i, const Vec& u, const MeasurementBias& bias, double t);

/// Multisine position reference [m].
double reference_qd(double t);

Vec maglev_controller(const MaglevControllerParams& ctrl, const MaglevParams& plant,
                      const PlantState& state, double q_d);

/// Flux at which the closed loop rests for q = q_*, p = 0, q_d = 0. Newton
/// iteration started from `guess`.
Vec maglev_rest_flux(const MaglevControllerParams& ctrl, const MaglevParams& plant,
                     const ModelSpec& spec, const Vec& guess);

}  // namespace fluxobs
