#pragma once

#include <span>

#include "fluxobs/types.hpp"

namespace fluxobs {

/// Constants of the quadratic flux/current constraint
///   w(lambda, i) = lambda' Q1 lambda + lambda' Q2 i + i' Q3 i + C' i + d = 0.
struct ConstraintConstants {
  Mat q1;
  Mat q2;
  Mat q3;
  Vec c;
  double d = 0.0;

  int n_e() const { return static_cast<int>(q1.rows()); }
  void validate() const;
};

double eval_w(const ConstraintConstants& k, const Vec& lambda, const Vec& i);

/// Signals computable from the biased measurements.
struct KnownSignals {
  Vec y_m;    // -R i_m + B u_m
  Vec y_a;    // Q2 i_m
  Vec y_b;    // (i_m ; 1)
  double y_c = 0.0;  // i_m' Q3 i_m + C' i_m
};

KnownSignals known_signals(const ConstraintConstants& k, const Vec& i_m, const Vec& u_m,
                           const Mat& r_eff, const Mat& input);

/// True when y_b and y_c carry no information (Q3 = 0, C = 0); the filters
/// xi3, xi8 and the theta_yb block are then dropped.
bool reduced_form_active(const ConstraintConstants& k);

/// Nine-filter bank. In reduced form xi3 and xi8 are empty.
struct FilterBankState {
  Vec xi1, xi2, xi3, xi4;
  double xi5 = 0.0;
  Vec xi6, xi7, xi8;
  double xi9 = 0.0;
  double nu = 50.0;

  static FilterBankState zero(int n_e, double nu, bool reduced);
  bool reduced() const { return xi3.size() == 0; }
  int n_e() const { return static_cast<int>(xi1.size()); }
  bool finite() const;

  static int packed_size(int n_e, bool reduced);
  void pack(std::span<double> out) const;
  void unpack(std::span<const double> in);
};

/// Right-hand sides of the filter bank. `out` must have the same layout as
/// `state` (nu is copied through).
void filter_derivatives(const FilterBankState& state, const ConstraintConstants& k,
                        const KnownSignals& s, FilterBankState& out);

/// Fixed point of the filter bank for constant inputs, i.e. the state of a
/// bank that has been driven by `s` since t = -infinity.
FilterBankState rest_filter_state(const ConstraintConstants& k, const KnownSignals& s,
                                  double nu, bool reduced);

/// One sample of the linear regression y = phi_lambda' lambda + phi_theta' theta.
/// phi_theta always has the full 3 n_E + 2 layout (theta_m, theta_ya,
/// theta_yb, scalar); in reduced form the theta_yb block is a structural zero.
struct RegressionSample {
  double y = 0.0;
  Vec phi_lambda;
  Vec phi_theta;
  Vec psi;  // (phi_lambda ; phi_theta)
};

RegressionSample regression_sample(const FilterBankState& state, const KnownSignals& s);

int theta_size(int n_e);
/// Number of theta entries estimated in reduced form (theta_m, theta_ya, scalar).
int reduced_theta_size(int n_e);
/// Drops the theta_yb block from a full-layout theta or phi_theta.
Vec compress_reduced(const Vec& full, int n_e);
/// Inverse of compress_reduced; the theta_yb block is filled with zeros.
Vec expand_reduced(const Vec& reduced, int n_e);

struct TrueParameters {
  Vec theta_m;   // R delta_i - B delta_u
  Vec theta_ya;  // -Q2 delta_i
  Vec theta_yb;  // (-(Q3 + Q3') delta_i ; delta_i' Q3 delta_i - C' delta_i)
  Vec theta;     // (theta_m ; theta_ya ; theta_yb ; (2/nu) theta_m' Q1 theta_m)
};

TrueParameters true_parameters(const ConstraintConstants& k, const Mat& r_eff,
                               const Mat& input, const Vec& delta_i, const Vec& delta_u,
                               double nu);

}  // namespace fluxobs
