#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fluxobs/constraint.hpp"
#include "fluxobs/em_models.hpp"
#include "fluxobs/harness.hpp"
#include "fluxobs/scenario_io.hpp"
#include "helpers.hpp"

using namespace fluxobs;
using testing::vec;

namespace {

// Integrates the filter bank with constant inputs by plain RK4 on the packed state.
FilterBankState integrate_bank(FilterBankState f, const ConstraintConstants& k,
                               const KnownSignals& s, double h, int steps) {
  const int n = FilterBankState::packed_size(f.n_e(), f.reduced());
  std::vector<double> x(n), k1(n), k2(n), k3(n), k4(n), tmp(n);
  f.pack(x);
  FilterBankState a = f, d = f;
  auto rhs = [&](const std::vector<double>& in, std::vector<double>& out) {
    a.unpack(in);
    filter_derivatives(a, k, s, d);
    d.pack(out);
  };
  for (int step = 0; step < steps; ++step) {
    rhs(x, k1);
    for (int j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
    rhs(tmp, k2);
    for (int j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
    rhs(tmp, k3);
    for (int j = 0; j < n; ++j) tmp[j] = x[j] + h * k3[j];
    rhs(tmp, k4);
    for (int j = 0; j < n; ++j) x[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  f.unpack(x);
  return f;
}

}  // namespace

TEST_CASE("constraint value examples") {
  PmsmParams p;
  const ConstraintConstants k = pmsm_constraint(p);
  CHECK(eval_w(k, vec({p.lambda_m, 0}), vec({0, 0})) == 0.0);
  CHECK(eval_w(k, vec({0, 0}), vec({0, 0})) == doctest::Approx(-p.lambda_m * p.lambda_m));
}

TEST_CASE("constraint vanishes on the constitutive manifold") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> cur(-10.0, 10.0), ang(-M_PI, M_PI), gap(-3e-4, 3e-4);
  for (const ModelSpec& s : {make_pmsm({}), make_maglev({})}) {
    for (int n = 0; n < 500; ++n) {
      const Vec i = vec({cur(rng), cur(rng)});
      const Vec q = vec({s.name == "pmsm" ? ang(rng) : gap(rng)});
      const Vec lambda = flux_from_current(s, q, i);
      const ConstraintConstants& k = s.constraint;
      const double scale = std::abs(lambda.dot(k.q1 * lambda)) + std::abs(lambda.dot(k.q2 * i)) +
                           std::abs(i.dot(k.q3 * i)) + std::abs(k.d) + 1e-300;
      CHECK(std::abs(eval_w(k, lambda, i)) / scale <= 1e-12);
    }
  }
}

TEST_CASE("known signals for unit phase-a current") {
  PmsmParams p;
  const ModelSpec s = make_pmsm(p);
  const KnownSignals sig = known_signals(s.constraint, vec({1, 0}), vec({0, 0}), s.r_eff, s.input);
  CHECK(sig.y_a(0) == doctest::Approx(-2.0 * p.l_s));
  CHECK(sig.y_a(1) == 0.0);
  CHECK(sig.y_c == doctest::Approx(p.l_s * p.l_s));
  CHECK(sig.y_m(0) == doctest::Approx(-p.r_s));
  CHECK(sig.y_b.size() == 3);
  CHECK(sig.y_b(2) == 1.0);

  MaglevParams m;
  const ModelSpec ml = make_maglev(m);
  const KnownSignals ms = known_signals(ml.constraint, vec({2, 3}), vec({0, 0}), ml.r_eff, ml.input);
  CHECK(ms.y_a(0) == doctest::Approx(-m.k2 * 3));
  CHECK(ms.y_a(1) == doctest::Approx(-m.k1 * 2));
  CHECK(ms.y_c == 0.0);
}

TEST_CASE("true parameters of the maglev bias") {
  MaglevParams m;
  const ModelSpec s = make_maglev(m);
  const Vec di = vec({-0.003, 0.0025});
  const TrueParameters tp = true_parameters(s.constraint, s.r_eff, s.input, di, vec({0, 0}), 50.0);
  CHECK(tp.theta_ya(0) == doctest::Approx(5.5e-11).epsilon(1e-12));
  CHECK(tp.theta_ya(1) == doctest::Approx(-6.6e-11).epsilon(1e-12));
  CHECK(tp.theta_m(0) == doctest::Approx(m.r / (m.turns * m.c1) * di(0)));
  CHECK(tp.theta_m(1) == doctest::Approx(m.r / (m.turns * m.c2) * di(1)));
  CHECK(tp.theta_yb.norm() == 0.0);
  const double tail = 2.0 / 50.0 * tp.theta_m.dot(s.constraint.q1 * tp.theta_m);
  CHECK(tp.theta(3 * 2 + 1) == doctest::Approx(tail));
  CHECK_THROWS_AS(true_parameters(s.constraint, s.r_eff, s.input, di, vec({0, 0}), 0.0),
                  std::invalid_argument);
}

TEST_CASE("reduced form detection") {
  CHECK(reduced_form_active(maglev_constraint({})));
  CHECK_FALSE(reduced_form_active(pmsm_constraint({})));
  ConstraintConstants k = maglev_constraint({});
  k.c = vec({0, 1e-3});
  CHECK_FALSE(reduced_form_active(k));
}

TEST_CASE("regressor at the zero filter state") {
  for (bool reduced : {true, false}) {
    const FilterBankState f = FilterBankState::zero(2, 50.0, reduced);
    KnownSignals s;
    s.y_m = vec({0, 0});
    s.y_a = vec({0, 0});
    s.y_b = vec({0, 0, 1});
    const RegressionSample r = regression_sample(f, s);
    CHECK(r.y == 0.0);
    CHECK(r.phi_lambda.norm() == 0.0);
    REQUIRE(r.phi_theta.size() == 8);
    CHECK(r.phi_theta(7) == 1.0);
    // y_b = (0, 0, 1) drives the full-form theta_yb regressor through nu.
    CHECK(r.phi_theta.head(7).norm() == (reduced ? 0.0 : doctest::Approx(50.0)));
    CHECK(r.psi.size() == 10);
  }
  CHECK(FilterBankState::packed_size(2, true) == 12);
  CHECK(FilterBankState::packed_size(2, false) == 18);
}

TEST_CASE("first filter step response") {
  const ConstraintConstants k = maglev_constraint({});
  KnownSignals s;
  s.y_m = vec({0.3, -0.2});
  s.y_a = vec({0, 0});
  s.y_b = vec({0, 0, 1});
  const double nu = 50.0, h = 1e-4;
  const FilterBankState f = integrate_bank(FilterBankState::zero(2, nu, true), k, s, h, 200);
  const double t = 200 * h;
  for (int j = 0; j < 2; ++j) {
    CHECK(f.xi1(j) == doctest::Approx(s.y_m(j) * (1.0 - std::exp(-nu * t))).epsilon(1e-10));
  }
}

TEST_CASE("rest filter state is a fixed point") {
  for (const ModelSpec& spec : {make_pmsm({}), make_maglev({})}) {
    const bool reduced = reduced_form_active(spec.constraint);
    const KnownSignals s =
        known_signals(spec.constraint, vec({1.2, -0.4}), vec({3.0, 1.0}), spec.r_eff, spec.input);
    const FilterBankState f = rest_filter_state(spec.constraint, s, 20.0, reduced);
    FilterBankState d = f;
    filter_derivatives(f, spec.constraint, s, d);
    const int n = FilterBankState::packed_size(2, reduced);
    std::vector<double> dx(n), x(n);
    d.pack(dx);
    f.pack(x);
    double worst = 0.0, scale = 1e-300;
    for (int j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(dx[j]));
      scale = std::max(scale, 20.0 * std::abs(x[j]));
    }
    CHECK(worst <= 1e-12 * scale);
    // Integration from the rest state stays there.
    const FilterBankState g = integrate_bank(f, spec.constraint, s, 1e-3, 100);
    CHECK((g.xi2 - f.xi2).norm() <= 1e-10 * (1.0 + f.xi2.norm()));
  }
}

TEST_CASE("filters are homogeneous in the measured signals") {
  const ModelSpec spec = make_pmsm({});
  const KnownSignals s1 =
      known_signals(spec.constraint, vec({0.7, -0.2}), vec({1.0, 2.0}), spec.r_eff, spec.input);
  const KnownSignals s2 =
      known_signals(spec.constraint, vec({1.4, -0.4}), vec({2.0, 4.0}), spec.r_eff, spec.input);
  // y_b carries the constant 1 and is not homogeneous; compare the blocks that are.
  const FilterBankState a = integrate_bank(FilterBankState::zero(2, 30.0, false), spec.constraint, s1, 1e-3, 300);
  const FilterBankState b = integrate_bank(FilterBankState::zero(2, 30.0, false), spec.constraint, s2, 1e-3, 300);
  CHECK((b.xi1 - 2.0 * a.xi1).norm() <= 1e-12 * b.xi1.norm());
  CHECK((b.xi2 - 2.0 * a.xi2).norm() <= 1e-12 * b.xi2.norm());
  CHECK(b.xi5 == doctest::Approx(4.0 * a.xi5).epsilon(1e-11));
  CHECK(b.xi9 == doctest::Approx(4.0 * a.xi9).epsilon(1e-11));
}

TEST_CASE("reduced and full banks give the same regression when Q3 and C vanish") {
  const ModelSpec spec = make_maglev({});
  const KnownSignals s =
      known_signals(spec.constraint, vec({2.0, 1.5}), vec({3.0, 2.0}), spec.r_eff, spec.input);
  const FilterBankState r = integrate_bank(FilterBankState::zero(2, 50.0, true), spec.constraint, s, 1e-4, 500);
  const FilterBankState f = integrate_bank(FilterBankState::zero(2, 50.0, false), spec.constraint, s, 1e-4, 500);
  const RegressionSample a = regression_sample(r, s);
  const RegressionSample b = regression_sample(f, s);
  CHECK(a.y == b.y);
  CHECK(a.phi_lambda == b.phi_lambda);
  CHECK(compress_reduced(a.phi_theta, 2) == compress_reduced(b.phi_theta, 2));
  const TrueParameters tp =
      true_parameters(spec.constraint, spec.r_eff, spec.input, vec({0.01, -0.02}), vec({0, 0}), 50.0);
  CHECK(a.phi_theta.dot(tp.theta) == doctest::Approx(b.phi_theta.dot(tp.theta)));
}

TEST_CASE("compress and expand round trip") {
  const Vec full = vec({1, 2, 3, 4, 0, 0, 0, 8});
  const Vec red = compress_reduced(full, 2);
  CHECK(red == vec({1, 2, 3, 4, 8}));
  CHECK(expand_reduced(red, 2) == full);
  CHECK(reduced_theta_size(2) == 5);
  CHECK(theta_size(2) == 8);
  CHECK_THROWS_AS(compress_reduced(red, 2), DimensionError);
}

TEST_CASE("first filter tracks a ramp with lag 1/nu") {
  const ConstraintConstants k = maglev_constraint({});
  const double nu = 50.0, h = 1e-4, slope = 2.0;
  FilterBankState f = FilterBankState::zero(2, nu, true);
  KnownSignals s;
  s.y_a = vec({0, 0});
  s.y_b = vec({0, 0, 1});
  for (int n = 0; n < 2000; ++n) {
    // Piecewise-constant ramp sampled at the midpoint of each step.
    s.y_m = vec({slope * (n + 0.5) * h, 0});
    f = integrate_bank(f, k, s, h, 1);
  }
  const double t = 2000 * h;
  const double exact = slope * (t - (1.0 - std::exp(-nu * t)) / nu);
  CHECK(f.xi1(0) == doctest::Approx(exact).epsilon(1e-6));
}

TEST_CASE("regression identity holds along a pmsm trajectory") {
  Scenario sc = preset("pmsm-openloop");
  sc.horizon = 1.5;
  sc.robust = sc.pebo = false;
  const RunResult r = run(sc);
  CHECK(r.summary.get("regression_residual_ratio") <= 1e-6);
  CHECK(r.summary.get("max_w_residual_rel") <= 1e-10);
}
