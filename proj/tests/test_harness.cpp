#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fluxobs/harness.hpp"
#include "fluxobs/integrator.hpp"
#include "fluxobs/scenario_io.hpp"
#include "fluxobs/verify.hpp"
#include "helpers.hpp"

using namespace fluxobs;
using testing::vec;

namespace {

// Global error of RK4 on a harmonic oscillator after time 1.
double oscillator_error(double h) {
  Eigen::VectorXd x(2);
  x << 1.0, 0.0;
  Rk4Workspace w;
  auto f = [](double, const Eigen::VectorXd& s, Eigen::VectorXd& d) {
    d.resize(2);
    d << s(1), -s(0);
  };
  const int n = static_cast<int>(std::llround(1.0 / h));
  for (int k = 0; k < n; ++k) rk4_step(f, k * h, h, x, w);
  return std::hypot(x(0) - std::cos(1.0), x(1) + std::sin(1.0));
}

Scenario short_maglev() {
  Scenario sc = preset("maglev-paper");
  sc.horizon = 0.2;
  sc.decimation = 100;
  sc.adaptive = false;
  return sc;
}

}  // namespace

TEST_CASE("rk4 on exponential decay") {
  Eigen::VectorXd x(1);
  x << 1.0;
  Rk4Workspace w;
  auto f = [](double, const Eigen::VectorXd& s, Eigen::VectorXd& d) { d = -s; };
  for (int k = 0; k < 10; ++k) rk4_step(f, k * 0.01, 0.01, x, w);
  CHECK(std::abs(x(0) - std::exp(-0.1)) <= 1e-7);
}

TEST_CASE("rk4 leaves an equilibrium unchanged") {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 2.5);
  Rk4Workspace w;
  auto f = [](double, const Eigen::VectorXd& s, Eigen::VectorXd& d) {
    d = Eigen::VectorXd::Zero(s.size());
  };
  for (int k = 0; k < 1000; ++k) rk4_step(f, 0.0, 0.1, x, w);
  CHECK(x == Eigen::VectorXd::Constant(3, 2.5));
}

TEST_CASE("rk4 global error is fourth order") {
  const double e1 = oscillator_error(0.02), e2 = oscillator_error(0.01);
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.05));
}

TEST_CASE("closed-loop maglev at rest without reference or bias stays at rest") {
  Scenario sc = short_maglev();
  sc.robust = sc.pebo = false;
  sc.controller.reference_scale = 0.0;
  sc.bias = MeasurementBias::none(sc.dims());
  const RunResult r = run(sc);
  const TraceRecord& a = r.trace.records.front();
  const TraceRecord& b = r.trace.records.back();
  CHECK((b.lambda - a.lambda).norm() <= 1e-12 * a.lambda.norm());
  CHECK(std::abs(b.q(0)) <= 1e-15);
  CHECK(std::abs(b.p(0)) <= 1e-15);
}

TEST_CASE("runs are deterministic") {
  Scenario sc = short_maglev();
  sc.initial_flux_jitter = 0.01;
  sc.seed = 42;
  const RunResult a = run(sc), b = run(sc);
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (std::size_t k = 0; k < a.trace.records.size(); ++k) {
    CHECK(a.trace.records[k].lambda == b.trace.records[k].lambda);
    CHECK(a.trace.records[k].robust_lambda_hat == b.trace.records[k].robust_lambda_hat);
  }
  std::ostringstream sa, sb;
  for (const auto& [k, v] : a.summary.entries()) sa << k << v;
  for (const auto& [k, v] : b.summary.entries()) sb << k << v;
  CHECK(sa.str() == sb.str());
}

TEST_CASE("trace sampling follows the decimation") {
  Scenario sc = short_maglev();
  const RunResult r = run(sc);
  CHECK(r.trace.records.size() == 201);
  CHECK(r.trace.records[1].t == doctest::Approx(1e-3));
  CHECK(r.trace.stride == doctest::Approx(1e-3));
  CHECK(r.trace.robust);
  CHECK_FALSE(r.trace.adaptive);
}

TEST_CASE("trace residual column survives a csv round trip") {
  Scenario sc = preset("pmsm-openloop");
  sc.horizon = 0.6;
  const CheckResult c = checks::trace_self_consistency(sc);
  CHECK_MESSAGE(c.status == Status::pass, c.detail);
}

TEST_CASE("second bias segment is unused before its start") {
  Scenario sc = short_maglev();
  const Vec theta0 = run(sc).trace.records.front().theta;
  for (const TraceRecord& rec : run(sc).trace.records) CHECK(rec.theta == theta0);
  const ModelSpec s = sc.model_spec();
  const TrueParameters tp = true_parameters(s.constraint, s.r_eff, s.input,
                                            sc.bias.schedule[0].delta_i,
                                            sc.bias.schedule[0].delta_u, sc.nu);
  CHECK(theta0 == tp.theta);
}

TEST_CASE("bias switch changes the true parameters") {
  Scenario sc = preset("maglev-paper");
  const Simulation sim(sc);
  const std::int64_t at = std::llround(50.0 / sc.step);
  CHECK(sim.segment_for_step(at - 1) == 0);
  CHECK(sim.segment_for_step(at) == 1);
  CHECK(sim.true_parameters_at(at).theta != sim.true_parameters_at(0).theta);
}

TEST_CASE("scenario validation") {
  Scenario sc = short_maglev();
  sc.validate();
  auto rejects = [](Scenario s) { CHECK_THROWS_AS(s.validate(), std::invalid_argument); };
  Scenario a = sc;
  a.step = 0.0;
  rejects(a);
  a = sc;
  a.horizon = sc.step / 2;
  rejects(a);
  a = sc;
  a.decimation = 0;
  rejects(a);
  a = sc;
  a.nu = -1.0;
  rejects(a);
  a = sc;
  a.robust_gain = vec({1.0, -1.0});
  rejects(a);
  a = sc;
  a.robust_gain = vec({1.0});
  rejects(a);
  a = sc;
  a.adaptive = true;
  a.adaptive_gain = vec({1.0, 1.0});
  rejects(a);
}

TEST_CASE("sweep argument errors") {
  Scenario sc = short_maglev();
  CHECK_THROWS_WITH_AS(bias_sweep(sc, {}), "sweep: empty scale list", std::invalid_argument);
  CHECK_THROWS_WITH_AS(bias_sweep(sc, {-1.0}), "sweep: scales must be non-negative",
                       std::invalid_argument);
  sc.robust = false;
  CHECK_THROWS_WITH_AS(bias_sweep(sc, {1.0}), "sweep requires robust observer",
                       std::invalid_argument);
}

TEST_CASE("sweep returns one row per scale in order") {
  Scenario sc = short_maglev();
  sc.pebo = false;
  const auto rows = bias_sweep(sc, {0.0, 1.0});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].scale == 0.0);
  CHECK(rows[1].scale == 1.0);
  CHECK(std::isfinite(rows[1].steady_error));
}

TEST_CASE("summary access") {
  Summary s;
  s.set("a", 1.5);
  s.set_text("b", "ok");
  CHECK(s.has("a"));
  CHECK(s.get("a") == 1.5);
  CHECK(s.text("b") == "ok");
  CHECK_THROWS_AS(s.get("missing"), std::out_of_range);
}

TEST_CASE("robust shadow error model agrees with the pipeline on pmsm") {
  Scenario sc = preset("pmsm-openloop");
  sc.horizon = 1.0;
  sc.error_models = true;
  sc.error_model_start = 0.5;
  for (const CheckResult& c : checks::error_models(sc, 1e-6)) {
    CHECK_MESSAGE(c.status != Status::fail, c.name << ": " << c.detail);
  }
}
