#include "fluxobs/constraint.hpp"

#include <cassert>
#include <cmath>
#include <string>

namespace fluxobs {

void ConstraintConstants::validate() const {
  const auto n = q1.rows();
  if (n <= 0 || n > kMaxPorts) throw DimensionError("constraint: bad n_E");
  auto square = [n](const Mat& m, const char* name) {
    if (m.rows() != n || m.cols() != n) {
      throw DimensionError(std::string("constraint: ") + name + " must be n_E x n_E");
    }
  };
  square(q1, "Q1");
  square(q2, "Q2");
  square(q3, "Q3");
  require_size(c, static_cast<int>(n), "constraint C");
  if (!(q1 - q1.transpose()).isZero(0.0)) {
    // The derivative d/dt(lambda' Q1 lambda) = 2 lambda' Q1 lambda' relies on it.
    throw DimensionError("constraint: Q1 must be symmetric");
  }
}

double eval_w(const ConstraintConstants& k, const Vec& lambda, const Vec& i) {
  require_size(lambda, k.n_e(), "eval_w lambda");
  require_size(i, k.n_e(), "eval_w i");
  return lambda.dot(k.q1 * lambda) + lambda.dot(k.q2 * i) + i.dot(k.q3 * i) + k.c.dot(i) + k.d;
}

KnownSignals known_signals(const ConstraintConstants& k, const Vec& i_m, const Vec& u_m,
                           const Mat& r_eff, const Mat& input) {
  const int n = k.n_e();
  KnownSignals s;
  s.y_m = -r_eff * i_m + input * u_m;
  s.y_a = k.q2 * i_m;
  s.y_b.resize(n + 1);
  s.y_b.head(n) = i_m;
  s.y_b(n) = 1.0;
  s.y_c = i_m.dot(k.q3 * i_m) + k.c.dot(i_m);
  return s;
}

bool reduced_form_active(const ConstraintConstants& k) {
  return k.q3.isZero(0.0) && k.c.isZero(0.0);
}

FilterBankState FilterBankState::zero(int n_e, double nu, bool reduced) {
  FilterBankState f;
  f.nu = nu;
  f.xi1 = Vec::Zero(n_e);
  f.xi2 = Vec::Zero(n_e);
  f.xi3 = Vec::Zero(reduced ? 0 : n_e + 1);
  f.xi4 = Vec::Zero(n_e);
  f.xi6 = Vec::Zero(n_e);
  f.xi7 = Vec::Zero(n_e);
  f.xi8 = Vec::Zero(reduced ? 0 : n_e + 1);
  return f;
}

bool FilterBankState::finite() const {
  return xi1.allFinite() && xi2.allFinite() && xi3.allFinite() && xi4.allFinite() &&
         std::isfinite(xi5) && xi6.allFinite() && xi7.allFinite() && xi8.allFinite() &&
         std::isfinite(xi9);
}

int FilterBankState::packed_size(int n_e, bool reduced) {
  return 5 * n_e + 2 + (reduced ? 0 : 2 * (n_e + 1));
}

void FilterBankState::pack(std::span<double> out) const {
  assert(static_cast<int>(out.size()) == packed_size(n_e(), reduced()));
  std::size_t o = 0;
  auto put = [&](const Vec& v) {
    for (int j = 0; j < v.size(); ++j) out[o++] = v(j);
  };
  put(xi1);
  put(xi2);
  put(xi3);
  put(xi4);
  out[o++] = xi5;
  put(xi6);
  put(xi7);
  put(xi8);
  out[o++] = xi9;
}

void FilterBankState::unpack(std::span<const double> in) {
  assert(static_cast<int>(in.size()) == packed_size(n_e(), reduced()));
  std::size_t o = 0;
  auto get = [&](Vec& v) {
    for (int j = 0; j < v.size(); ++j) v(j) = in[o++];
  };
  get(xi1);
  get(xi2);
  get(xi3);
  get(xi4);
  xi5 = in[o++];
  get(xi6);
  get(xi7);
  get(xi8);
  xi9 = in[o++];
}

void filter_derivatives(const FilterBankState& f, const ConstraintConstants& k,
                        const KnownSignals& s, FilterBankState& out) {
  const double nu = f.nu;
  const double nu2 = nu * nu;
  const Vec q1_ym = k.q1 * s.y_m;
  out.nu = nu;
  out.xi1 = -nu * f.xi1 + nu * s.y_m;
  out.xi2 = -nu * f.xi2 + 2.0 * nu * q1_ym - nu2 * s.y_a;
  out.xi4 = -nu * f.xi4 + f.xi2 + 2.0 * q1_ym;
  out.xi5 = -nu * f.xi5 + s.y_m.dot(f.xi2) + nu2 * s.y_c;
  out.xi6 = -nu * f.xi6 + nu * f.xi4 - f.xi2;
  out.xi7 = -nu * f.xi7 + nu * f.xi1;
  out.xi9 = -nu * f.xi9 + nu * f.xi5 - nu2 * s.y_c + s.y_m.dot(nu * f.xi4 - f.xi2);
  if (f.reduced()) {
    out.xi3.resize(0);
    out.xi8.resize(0);
  } else {
    out.xi3 = -nu * f.xi3 + nu * s.y_b;
    out.xi8 = -nu * f.xi8 + nu * (s.y_b - f.xi3);
  }
}

FilterBankState rest_filter_state(const ConstraintConstants& k, const KnownSignals& s,
                                  double nu, bool reduced) {
  FilterBankState f = FilterBankState::zero(static_cast<int>(s.y_m.size()), nu, reduced);
  const Vec q1_ym = k.q1 * s.y_m;
  f.xi1 = s.y_m;
  f.xi2 = 2.0 * q1_ym - nu * s.y_a;
  f.xi4 = (f.xi2 + 2.0 * q1_ym) / nu;
  f.xi5 = (s.y_m.dot(f.xi2) + nu * nu * s.y_c) / nu;
  f.xi6 = (nu * f.xi4 - f.xi2) / nu;
  f.xi7 = f.xi1;
  f.xi9 = f.xi5 - nu * s.y_c + s.y_m.dot(nu * f.xi4 - f.xi2) / nu;
  if (!reduced) {
    f.xi3 = s.y_b;
    f.xi8.setZero();
  }
  return f;
}

int theta_size(int n_e) { return 3 * n_e + 2; }
int reduced_theta_size(int n_e) { return 2 * n_e + 1; }

RegressionSample regression_sample(const FilterBankState& f, const KnownSignals& s) {
  const int n = f.n_e();
  const double nu = f.nu;
  RegressionSample r;
  r.y = f.xi5 - nu * s.y_c - f.xi9;
  r.phi_lambda = 2.0 * f.xi2 + nu * s.y_a - nu * f.xi4;
  r.phi_theta = Vec::Zero(theta_size(n));
  r.phi_theta.segment(0, n) = 2.0 * f.xi6;
  r.phi_theta.segment(n, n) = f.xi1 - f.xi7;
  if (!f.reduced()) {
    r.phi_theta.segment(2 * n, n + 1) = nu * (s.y_b - f.xi3 - f.xi8);
  }
  r.phi_theta(3 * n + 1) = 1.0;
  r.psi.resize(n + r.phi_theta.size());
  r.psi.head(n) = r.phi_lambda;
  r.psi.tail(r.phi_theta.size()) = r.phi_theta;
  return r;
}

Vec compress_reduced(const Vec& full, int n_e) {
  require_size(full, theta_size(n_e), "compress_reduced");
  Vec out(reduced_theta_size(n_e));
  out.head(2 * n_e) = full.head(2 * n_e);
  out(2 * n_e) = full(3 * n_e + 1);
  return out;
}

Vec expand_reduced(const Vec& reduced, int n_e) {
  require_size(reduced, reduced_theta_size(n_e), "expand_reduced");
  Vec out = Vec::Zero(theta_size(n_e));
  out.head(2 * n_e) = reduced.head(2 * n_e);
  out(3 * n_e + 1) = reduced(2 * n_e);
  return out;
}

TrueParameters true_parameters(const ConstraintConstants& k, const Mat& r_eff,
                               const Mat& input, const Vec& delta_i, const Vec& delta_u,
                               double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("true_parameters: nu must be positive");
  const int n = k.n_e();
  require_size(delta_i, n, "true_parameters delta_i");
  require_size(delta_u, static_cast<int>(input.cols()), "true_parameters delta_u");
  TrueParameters t;
  t.theta_m = r_eff * delta_i - input * delta_u;
  // i = i_m - delta_i, so the bias enters w with a minus sign.
  t.theta_ya = -(k.q2 * delta_i);
  t.theta_yb.resize(n + 1);
  t.theta_yb.head(n) = -((k.q3 + k.q3.transpose()) * delta_i);
  t.theta_yb(n) = delta_i.dot(k.q3 * delta_i) - k.c.dot(delta_i);
  t.theta.resize(theta_size(n));
  t.theta.segment(0, n) = t.theta_m;
  t.theta.segment(n, n) = t.theta_ya;
  t.theta.segment(2 * n, n + 1) = t.theta_yb;
  t.theta(3 * n + 1) = 2.0 / nu * t.theta_m.dot(k.q1 * t.theta_m);
  return t;
}

}  // namespace fluxobs
