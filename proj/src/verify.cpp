#include "fluxobs/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fluxobs/scenario_io.hpp"
#include "fluxobs/trace_io.hpp"

namespace fluxobs {

bool SuiteReport::passed() const {
  return std::none_of(checks.begin(), checks.end(),
                      [](const CheckResult& c) { return c.status == Status::fail; });
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"constraint", "regression", "appendix", "observers",
                                              "bounds"};
  return names;
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

CheckResult make(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok ? Status::pass : Status::fail, std::move(detail)};
}

CheckResult failed_run(std::string name, const std::exception& e) {
  return {std::move(name), Status::fail, std::string("run aborted: ") + e.what()};
}

double max_flux_norm(const Trace& tr) {
  double m = 0.0;
  for (const auto& r : tr.records) m = std::max(m, r.lambda.norm());
  return m;
}

// Sup of `value` over [a, b).
template <typename F>
double sup_over(const Trace& tr, double a, double b, F value) {
  double m = 0.0;
  for (const auto& r : tr.records) {
    if (r.t >= a && r.t < b) m = std::max(m, value(r));
  }
  return m;
}

Scenario with_horizon(Scenario sc, const VerifyOptions& opt) {
  if (opt.horizon > 0.0) sc.horizon = opt.horizon;
  return sc;
}

}  // namespace

namespace scenarios {

Scenario maglev(bool robust, bool adaptive, bool pebo) {
  Scenario sc = preset("maglev-paper");
  sc.robust = robust;
  sc.adaptive = adaptive;
  sc.pebo = pebo;
  return sc;
}

Scenario pmsm_plain() {
  Scenario sc = preset("pmsm-openloop");
  sc.robust = sc.adaptive = sc.pebo = false;
  return sc;
}

Scenario maglev_transient() {
  Scenario sc = maglev(false, false, false);
  sc.step = 1.0e-7;
  sc.initial_flux_jitter = 0.02;
  sc.seed = 7;
  return sc;
}

}  // namespace scenarios

namespace checks {

CheckResult constraint_identity(ModelKind model, int samples, std::uint64_t seed, double tol) {
  Scenario sc;
  sc.model = model;
  const ModelSpec spec = sc.model_spec();
  std::mt19937_64 rng(seed);
  const bool pmsm = model == ModelKind::pmsm;
  std::uniform_real_distribution<double> flux(pmsm ? -0.2 : 0.0, pmsm ? 0.2 : 0.1);
  const double q_max = pmsm ? M_PI : 0.9 * sc.maglev.gap;
  std::uniform_real_distribution<double> pos(-q_max, q_max);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    Vec lambda(2), q(1);
    lambda << flux(rng), flux(rng);
    q << pos(rng);
    const Vec i = spec.current(lambda, q);
    worst = std::max(worst, std::abs(eval_w(spec.constraint, lambda, i)) /
                                (1.0 + lambda.squaredNorm()));
  }
  return make(std::string("w_identity_") + (pmsm ? "pmsm" : "maglev"), worst <= tol,
              "max |w|/(1+|lambda|^2) = " + sci(worst) + " over " + std::to_string(samples) +
                  " states (tol " + sci(tol) + ")");
}

CheckResult trajectory_constraint(const Scenario& sc, double tol) {
  const std::string name = "trajectory_w_" + sc.name;
  try {
    const double v = run(sc).summary.get("max_w_residual_rel");
    return make(name, v <= tol, "max |w|/(1+|lambda|^2) = " + sci(v) + " (tol " + sci(tol) + ")");
  } catch (const std::exception& e) {
    return failed_run(name, e);
  }
}

CheckResult lemma1_residual(const Scenario& sc, double tol) {
  const std::string name = "lemma1_" + sc.name;
  try {
    const Summary s = run(sc).summary;
    const double ratio = s.get("regression_residual_ratio");
    return make(name, ratio <= tol,
                "max residual / RMS(y) = " + sci(ratio) + " over t >= " + sci(sc.burn_in) +
                    " s (residual " + sci(s.get("max_regression_residual")) + ", RMS(y) " +
                    sci(s.get("rms_y")) + ", tol " + sci(tol) + ")");
  } catch (const std::exception& e) {
    return failed_run(name, e);
  }
}

CheckResult trace_self_consistency(const Scenario& sc) {
  const std::string name = "trace_self_consistency_" + sc.name;
  try {
    const RunResult res = run(sc);
    std::stringstream buf;
    write_trace_csv(res.trace, buf);
    const CsvTable t = read_csv(buf);
    const int n = res.trace.n_e, nt = theta_size(n);
    std::vector<std::size_t> lam, phl, pht, th;
    for (int k = 1; k <= n; ++k) {
      lam.push_back(t.column("lambda_" + std::to_string(k)));
      phl.push_back(t.column("phi_lambda_" + std::to_string(k)));
    }
    for (int k = 1; k <= nt; ++k) {
      pht.push_back(t.column("phi_theta_" + std::to_string(k)));
      th.push_back(t.column("theta_" + std::to_string(k)));
    }
    const std::size_t cy = t.column("y"), cr = t.column("regression_residual");
    std::size_t mismatches = 0;
    for (const auto& row : t.rows) {
      Vec l(n), pl(n), pt(nt), tt(nt);
      for (int k = 0; k < n; ++k) {
        l[k] = row[lam[k]];
        pl[k] = row[phl[k]];
      }
      for (int k = 0; k < nt; ++k) {
        pt[k] = row[pht[k]];
        tt[k] = row[th[k]];
      }
      if (regression_residual(row[cy], pl, l, pt, tt) != row[cr]) ++mismatches;
    }
    return make(name, mismatches == 0 && t.rows.size() == res.trace.records.size(),
                std::to_string(mismatches) + " of " + std::to_string(t.rows.size()) +
                    " rows differ after CSV round trip");
  } catch (const std::exception& e) {
    return failed_run(name, e);
  }
}

std::vector<CheckResult> appendix(const std::string& label, const Scenario& sc,
                                  const AppendixOptions& opt, double derivative_tol,
                                  double rate_tol) {
  const std::string dname = "derivative_identity_" + label;
  const std::string rname = "filtered_identity_decay_" + label;
  try {
    const AppendixResult r = appendix_identity_check(sc, opt);
    const double rate_err = std::abs(r.dif6_decay_rate - sc.nu) / sc.nu;
    return {make(dname, r.derivative_rel_error <= derivative_tol,
                 "relative error " + sci(r.derivative_rel_error) + " (scale " +
                     sci(r.derivative_scale) + ", h " + sci(sc.step) + ", window [" +
                     sci(opt.window_start) + ", " + sci(opt.window_end) + "] s, tol " +
                     sci(derivative_tol) + ")"),
            make(rname, rate_err <= rate_tol,
                 "fitted rate " + sci(r.dif6_decay_rate) + " 1/s vs nu " + sci(sc.nu) +
                     " over [" + sci(r.fit_start) + ", " + sci(r.fit_end) + "] s, floor " +
                     sci(r.dif6_floor))};
  } catch (const GridTooCoarseError& e) {
    return {{dname, Status::fail, e.what()}, {rname, Status::skip, "not evaluated"}};
  } catch (const std::exception& e) {
    return {failed_run(dname, e), {rname, Status::skip, "not evaluated"}};
  }
}

CheckResult robust_zero_bias(const Scenario& scenario, double tol) {
  Scenario sc = scenario;
  sc.bias = MeasurementBias::none(sc.dims());
  const std::string name = "robust_zero_bias_" + sc.name;
  try {
    const RunResult res = run(sc);
    const double ref = max_flux_norm(res.trace);
    const double e = res.trace.records.back().robust_error;
    return make(name, e <= tol * ref,
                "|lambda_tilde(T)| = " + sci(e) + ", " + sci(tol) + " * max|lambda| = " +
                    sci(tol * ref) + ", T = " + sci(sc.horizon) + " s");
  } catch (const std::exception& e) {
    return failed_run(name, e);
  }
}

CheckResult zero_bias_coincidence(const Scenario& scenario) {
  Scenario sc = scenario;
  sc.bias = MeasurementBias::none(sc.dims());
  sc.robust = true;
  const std::string name = "zero_bias_coincidence_" + sc.name;
  try {
    const Simulation sim(sc);
    const RunResult res = sim.run();
    const ModelSpec& spec = sim.model();
    const int n = res.trace.n_e;
    const bool reduced = sc.reduced_form();
    RobustObserverState ro;
    ro.gain = Mat(sc.robust_gain.asDiagonal()) * sc.gain_scale;
    AdaptiveObserverState ao;
    ao.reduced = reduced;
    ao.theta_hat = Vec::Zero(reduced ? reduced_theta_size(n) : theta_size(n));
    ao.gain = Vec::Ones(n + ao.theta_hat.size());
    ao.gain.head(n) = ro.gain.diagonal();
    double worst = 0.0;
    for (const auto& r : res.trace.records) {
      FilterBankState f = FilterBankState::zero(n, sc.nu, reduced);
      f.unpack(std::span<const double>(r.xi.data(), static_cast<std::size_t>(r.xi.size())));
      const KnownSignals s = known_signals(spec.constraint, r.i_m, r.u_m, spec.r_eff, spec.input);
      const RegressionSample smp = regression_sample(f, s);
      ro.lambda_hat = ao.lambda_hat = r.robust_lambda_hat;
      const Vec a = robust_observer_derivative(ro, r.i_m, r.u_m, smp, spec.r_eff, spec.input);
      const Vec b =
          adaptive_observer_derivative(ao, r.i_m, r.u_m, smp, spec.r_eff, spec.input).lambda_hat;
      const double scale = std::max(a.norm(), 1e-300);
      worst = std::max(worst, (a - b).norm() / scale);
    }
    return make(name, worst <= 1e-12,
                "max relative difference " + sci(worst) + " over " +
                    std::to_string(res.trace.records.size()) + " samples");
  } catch (const std::exception& e) {
    return failed_run(name, e);
  }
}

std::vector<CheckResult> error_models(const Scenario& scenario, double tol) {
  Scenario sc = scenario;
  sc.error_models = true;
  std::vector<CheckResult> out;
  try {
    const Summary s = run(sc).summary;
    for (const char* key : {"robust_error_model_mismatch", "adaptive_error_model_mismatch"}) {
      if (!s.has(key)) continue;
      const double v = s.get(key);
      out.push_back(make(key, v <= tol,
                         "relative sup-norm difference " + sci(v) + " after " +
                             sci(sc.error_model_start) + " s (tol " + sci(tol) + ")"));
    }
  } catch (const std::exception& e) {
    out.push_back(failed_run("error_model_mismatch", e));
  }
  return out;
}

std::vector<CheckResult> pebo_drift(const Scenario& scenario, double t0, double t1, double tol) {
  Scenario sc = scenario;
  sc.pebo = true;
  sc.horizon = std::max(sc.horizon, t1);
  try {
    const Simulation sim(sc);
    const RunResult res = sim.run();
    // Least-squares slope of |error| over [t0, t1].
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (const auto& r : res.trace.records) {
      if (r.t < t0 || r.t > t1) continue;
      sx += r.t;
      sy += r.pebo_error;
      sxx += r.t * r.t;
      sxy += r.t * r.pebo_error;
      ++m;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double expect = sim.true_parameters_at(std::llround(t0 / sc.step)).theta_m.norm();
    const double rel = std::abs(slope - expect) / expect;
    std::vector<CheckResult> out{make("pebo_drift_slope", rel <= tol,
                                      "slope " + sci(slope) + " vs |theta_m| " + sci(expect) +
                                          " over [" + sci(t0) + ", " + sci(t1) +
                                          "] s, relative difference " + sci(rel))};
    if (sc.robust) {
      // Drift of the error vector, not its norm: a drift orthogonal to a large
      // error barely moves |lambda_tilde|.
      const TraceRecord* first = nullptr;
      const TraceRecord* last = nullptr;
      for (const auto& r : res.trace.records) {
        if (r.t < t0 || r.t > t1) continue;
        if (!first) first = &r;
        last = &r;
      }
      const Vec e0 = first->robust_lambda_hat - first->lambda;
      const Vec e1 = last->robust_lambda_hat - last->lambda;
      const double drift = (e1 - e0).norm() / (last->t - first->t);
      out.push_back(make("robust_bounded_same_run", drift <= tol * slope,
                         "robust error drift " + sci(drift) + " per s vs PEBO " + sci(slope) +
                             " (allowed " + sci(tol) + " of it), |lambda_tilde| " +
                             sci(e0.norm()) + " -> " + sci(e1.norm())));
    }
    return out;
  } catch (const std::exception& e) {
    return {failed_run("pebo_drift_slope", e)};
  }
}

CheckResult adaptive_convergence(const Scenario& scenario, double fraction) {
  Scenario sc = scenario;
  sc.adaptive = true;
  const std::string name = "adaptive_convergence_" + sc.name;
  try {
    const RunResult res = run(sc);
    std::ostringstream detail;
    bool ok = true;
    const auto& segs = sc.bias.schedule;
    for (std::size_t k = 0; k < segs.size() && segs[k].start < sc.horizon; ++k) {
      const double a = segs[k].start;
      const double b = k + 1 < segs.size() ? segs[k + 1].start : sc.horizon + 1.0;
      for (int which = 0; which < 2; ++which) {
        auto err = [which](const TraceRecord& r) {
          return which == 0 ? r.adaptive_lambda_error : r.adaptive_theta_error;
        };
        const double peak = sup_over(res.trace, a, b, err);
        double low = peak;
        for (const auto& r : res.trace.records) {
          if (r.t >= a && r.t < b) low = std::min(low, err(r));
        }
        const bool hit = low <= fraction * peak;
        ok = ok && hit;
        detail << (which == 0 ? "lambda" : "theta") << " [" << a << ", " << std::min(b, sc.horizon)
               << ") min/peak " << sci(peak > 0.0 ? low / peak : 0.0) << "; ";
      }
    }
    return make(name, ok, detail.str() + "target " + sci(fraction));
  } catch (const std::exception& e) {
    return failed_run(name, e);
  }
}

CheckResult prop1_envelope(const Scenario& scenario) {
  Scenario sc = scenario;
  sc.robust = true;
  const std::string name = "prop1_envelope_" + sc.name;
  try {
    const Summary s = run(sc).summary;
    const std::string verdict = s.text("prop1_bound_check");
    std::string detail = "PE alpha " + sci(s.get("pe_phi_lambda_alpha")) + " over " +
                         sci(s.get("pe_window")) + " s windows";
    if (verdict == "undefined") {
      detail += "; bound undefined (regressor not persistently exciting)";
    } else {
      detail += ", m_r " + sci(s.get("prop1_m_r")) + ", rho_r " + sci(s.get("prop1_rho_r")) +
                ", ell " + sci(s.get("prop1_ell")) + ", violations " +
                sci(s.get("prop1_violations"));
    }
    return make(name, verdict == "pass", detail);
  } catch (const std::exception& e) {
    return failed_run(name, e);
  }
}

CheckResult sweep_monotone(const Scenario& scenario, const std::vector<double>& scales,
                           double tol) {
  Scenario sc = scenario;
  sc.adaptive = false;
  const std::string name = "bias_sweep_" + sc.name;
  try {
    const std::vector<SweepRow> rows = bias_sweep(sc, scales);
    const double ref = Simulation(sc).initial_state().x.head(sc.dims().n_e).norm();
    bool mono = true, zero_ok = true;
    std::ostringstream detail;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      detail << rows[k].scale << ":" << sci(rows[k].steady_error) << " ";
      if (k > 0 && rows[k].steady_error < rows[k - 1].steady_error) mono = false;
      if (rows[k].scale == 0.0 && rows[k].steady_error > tol * ref) zero_ok = false;
    }
    detail << "| monotone " << (mono ? "yes" : "no") << ", scale-0 within " << sci(tol)
           << " |lambda(0)| " << (zero_ok ? "yes" : "no");
    return make(name, mono && zero_ok, detail.str());
  } catch (const std::exception& e) {
    return failed_run(name, e);
  }
}

CheckResult richardson(const Scenario& scenario, double lo, double hi) {
  const std::string name = "richardson_" + scenario.name;
  try {
    std::vector<Trace> tr;
    for (int k = 0; k < 3; ++k) {
      Scenario sc = scenario;
      sc.robust = sc.adaptive = sc.pebo = false;
      sc.step = scenario.step / (1 << k);
      sc.decimation = scenario.decimation * (1 << k);
      tr.push_back(run(sc).trace);
    }
    std::ostringstream detail;
    bool ok = true;
    const char* names[] = {"lambda", "q", "p"};
    for (int w = 0; w < 3; ++w) {
      auto field = [w](const TraceRecord& r) -> const Vec& {
        return w == 0 ? r.lambda : w == 1 ? r.q : r.p;
      };
      double d1 = 0.0, d2 = 0.0;
      for (std::size_t j = 0; j < tr[0].records.size(); ++j) {
        d1 = std::max(d1, (field(tr[0].records[j]) - field(tr[1].records[j])).norm());
        d2 = std::max(d2, (field(tr[1].records[j]) - field(tr[2].records[j])).norm());
      }
      const double ratio = d2 > 0.0 ? d1 / d2 : 0.0;
      ok = ok && ratio >= lo && ratio <= hi;
      detail << names[w] << " " << sci(ratio) << " (" << sci(d1) << "/" << sci(d2) << ") ";
    }
    detail << "accepted [" << sci(lo) << ", " << sci(hi) << "]";
    return make(name, ok, detail.str());
  } catch (const std::exception& e) {
    return failed_run(name, e);
  }
}

}  // namespace checks

SuiteReport run_suite(const std::string& name, const VerifyOptions& opt) {
  SuiteReport rep;
  rep.suite = name;
  auto add = [&rep](std::vector<CheckResult> v) {
    for (auto& c : v) rep.checks.push_back(std::move(c));
  };
  const Scenario maglev_short = [] {
    Scenario sc = scenarios::maglev(false, false, false);
    sc.horizon = 10.0;
    return sc;
  }();
  if (name == "constraint") {
    rep.checks.push_back(checks::constraint_identity(ModelKind::pmsm, 1000, opt.seed, 1e-12));
    rep.checks.push_back(checks::constraint_identity(ModelKind::maglev, 1000, opt.seed, 1e-12));
    Scenario p = scenarios::pmsm_plain();
    p.horizon = 1.0;
    Scenario m = maglev_short;
    m.horizon = 1.0;
    rep.checks.push_back(checks::trajectory_constraint(p, 1e-9));
    rep.checks.push_back(checks::trajectory_constraint(m, 1e-9));
  } else if (name == "regression") {
    Scenario p = scenarios::pmsm_plain();
    p.horizon = 2.0;
    rep.checks.push_back(checks::lemma1_residual(p, 1e-6));
    rep.checks.push_back(checks::lemma1_residual(maglev_short, 1e-6));
    rep.checks.push_back(checks::trace_self_consistency(p));
  } else if (name == "appendix") {
    AppendixOptions po;
    add(checks::appendix("pmsm", scenarios::pmsm_plain(), po, 1e-4, 0.2));
    AppendixOptions mo;
    mo.window_start = 2e-5;
    mo.window_end = 3e-4;
    add(checks::appendix("maglev", scenarios::maglev_transient(), mo, 1e-4, 0.2));
  } else if (name == "observers") {
    const Scenario robust = with_horizon(scenarios::maglev(true, false, true), opt);
    rep.checks.push_back(checks::robust_zero_bias(robust, 1e-6));
    Scenario pm = preset("pmsm-openloop");
    rep.checks.push_back(checks::robust_zero_bias(pm, 1e-6));
    Scenario co = maglev_short;
    co.horizon = 1.0;
    co.robust = true;
    rep.checks.push_back(checks::zero_bias_coincidence(co));
    Scenario em = scenarios::maglev(true, true, false);
    em.horizon = 1.0;
    add(checks::error_models(em, 1e-6));
    Scenario first_segment = robust;
    first_segment.horizon = std::min(first_segment.horizon, 50.0);
    add(checks::pebo_drift(first_segment, 10.0, 40.0, 0.01));
    rep.checks.push_back(
        checks::adaptive_convergence(with_horizon(scenarios::maglev(false, true, false), opt), 0.01));
  } else if (name == "bounds") {
    rep.checks.push_back(
        checks::prop1_envelope(with_horizon(scenarios::maglev(true, false, false), opt)));
    rep.checks.push_back(checks::prop1_envelope(preset("pmsm-openloop")));
  } else {
    throw std::invalid_argument("unknown suite: " + name);
  }
  return rep;
}

void print_report(const SuiteReport& rep, std::ostream& out) {
  for (const auto& c : rep.checks) {
    const char* tag = c.status == Status::pass ? "PASS" : c.status == Status::fail ? "FAIL" : "SKIP";
    out << tag << "  " << rep.suite << "/" << c.name << "  " << c.detail << '\n';
  }
  out << (rep.passed() ? "suite " + rep.suite + ": passed" : "suite " + rep.suite + ": FAILED")
      << '\n';
}

}  // namespace fluxobs
