#pragma once

#include <vector>

#include "fluxobs/harness.hpp"

namespace fluxobs {

struct AppendixOptions {
  double window_start = 0.01;  // [s] derivative check window
  double window_end = 0.3;     // [s]
  int fd_stride = 1;           // finite-difference spacing in integration steps
  double fit_start = 5.0;     // decay fit starts at fit_start / nu
  double fit_floor = 1.0e3;   // fit stops once the residual is within this factor of its floor
};

struct AppendixResult {
  // (a) termwise derivative of w(lambda, i_m - delta_i) against central differences.
  double derivative_rel_error = 0.0;
  double derivative_abs_error = 0.0;
  double derivative_scale = 0.0;  // max |analytic term derivative| over the window
  double identity_sum_rel = 0.0;  // |sum of analytic term derivatives| / scale
  double flux_identity_rel = 0.0; // |lambda' - (y_m + theta_m)| / max |lambda'|

  // (b) filtered identity: xi5 - nu y_c minus its right-hand side, filters started at zero.
  std::vector<double> times;
  std::vector<double> dif6_residual;
  double dif6_initial = 0.0;
  double dif6_max_after_burn_in = 0.0;  // over t >= 5/nu
  double dif6_floor = 0.0;
  double dif6_decay_rate = 0.0;  // fitted, [1/s]
  double fit_start = 0.0, fit_end = 0.0;
};

/// Right-hand side of the filtered identity for one sample.
double dif6_residual(const ConstraintConstants& k, const FilterBankState& xi,
                     const KnownSignals& s, const Vec& lambda, const TrueParameters& tp);

/// Simulates the scenario (observers off, filters from zero) and checks the
/// differentiated constraint and the filtered identity along the trajectory.
/// Throws GridTooCoarseError when the finite differences are not resolved.
AppendixResult appendix_identity_check(const Scenario& scenario, const AppendixOptions& opt = {});

}  // namespace fluxobs
