#include "fluxobs/harness.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <sstream>

namespace fluxobs {

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

Vec block(const Eigen::VectorXd& x, const StateLayout::Block& b) {
  return x.segment(b.offset, b.size);
}

}  // namespace

// ---------------------------------------------------------------- Scenario

Dims Scenario::dims() const { return {2, 1, 2}; }

ModelSpec Scenario::model_spec() const {
  return model == ModelKind::pmsm ? make_pmsm(pmsm) : make_maglev(maglev);
}

bool Scenario::reduced_form() const {
  return reduced_form_active(model == ModelKind::pmsm ? pmsm_constraint(pmsm)
                                                      : maglev_constraint(maglev));
}

void Scenario::validate() const {
  if (!(step > 0.0)) throw std::invalid_argument("scenario: step must be > 0");
  if (!(horizon > step)) throw std::invalid_argument("scenario: horizon must exceed step");
  if (decimation < 1) throw std::invalid_argument("scenario: decimation must be >= 1");
  if (!(nu > 0.0)) throw std::invalid_argument("scenario: nu must be > 0");
  if (!(gain_scale > 0.0)) throw std::invalid_argument("scenario: gain scale must be > 0");
  if (model == ModelKind::pmsm) {
    pmsm.validate();
  } else {
    maglev.validate();
    controller.validate();
  }
  const Dims d = dims();
  bias.validate(d);
  if (robust) {
    require_size(robust_gain, d.n_e, "robust gain");
    if ((robust_gain.array() <= 0.0).any()) {
      throw std::invalid_argument("scenario: robust gain entries must be positive");
    }
  }
  if (adaptive) {
    const int n_theta = reduced_form() ? reduced_theta_size(d.n_e) : theta_size(d.n_e);
    require_size(adaptive_gain, d.n_e + n_theta, "adaptive gain");
    if ((adaptive_gain.array() <= 0.0).any()) {
      throw std::invalid_argument("scenario: adaptive gain entries must be positive");
    }
    if (theta_hat0.size() != 0) require_size(theta_hat0, n_theta, "initial theta_hat");
  }
  if (lambda_hat0.size() != 0) require_size(lambda_hat0, d.n_e, "initial lambda_hat");
  if (initial_flux.size() != 0) require_size(initial_flux, d.n_e, "initial flux");
  if (initial_flux_jitter < 0.0) throw std::invalid_argument("scenario: jitter must be >= 0");
  if (error_models && !(error_model_start >= 0.0 && error_model_start < horizon)) {
    throw std::invalid_argument("scenario: error model start must lie inside the horizon");
  }
  if (!(pe_window > 0.0)) throw std::invalid_argument("scenario: PE window must be > 0");
}

// ------------------------------------------------------------------ Layout

StateLayout StateLayout::build(const Scenario& sc) {
  const Dims d = sc.dims();
  const bool reduced = sc.reduced_form();
  StateLayout l;
  int at = 0;
  auto add = [&at](StateLayout::Block& b, const char* name, int size) {
    b.name = name;
    b.offset = at;
    b.size = size;
    at += size;
  };
  add(l.lambda, "lambda", d.n_e);
  add(l.q, "q", d.n_m);
  add(l.p, "p", d.n_m);
  add(l.filters, "filters", FilterBankState::packed_size(d.n_e, reduced));
  const int n_theta = reduced ? reduced_theta_size(d.n_e) : theta_size(d.n_e);
  if (sc.robust) add(l.robust, "robust observer", d.n_e);
  if (sc.adaptive) {
    add(l.adaptive_lambda, "adaptive observer flux", d.n_e);
    add(l.adaptive_theta, "adaptive observer parameters", n_theta);
  }
  if (sc.pebo) add(l.pebo, "pebo integrator", d.n_e);
  if (sc.error_models && sc.robust) add(l.robust_shadow, "robust error model", d.n_e);
  if (sc.error_models && sc.adaptive) add(l.adaptive_shadow, "adaptive error model", d.n_e + n_theta);
  l.total = at;
  return l;
}

std::vector<const StateLayout::Block*> StateLayout::blocks() const {
  std::vector<const Block*> out;
  for (const Block* b : {&lambda, &q, &p, &filters, &robust, &adaptive_lambda, &adaptive_theta,
                         &pebo, &robust_shadow, &adaptive_shadow}) {
    if (b->present()) out.push_back(b);
  }
  return out;
}

// ----------------------------------------------------------------- Summary

void Summary::set(const std::string& key, double value) { set_text(key, format_double(value)); }

void Summary::set_text(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

bool Summary::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

const std::string& Summary::text(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw std::out_of_range("summary has no key '" + key + "'");
}

double Summary::get(const std::string& key) const { return std::stod(text(key)); }

double regression_residual(double y, const Vec& phi_lambda, const Vec& lambda,
                           const Vec& phi_theta, const Vec& theta) {
  return y - phi_lambda.dot(lambda) - phi_theta.dot(theta);
}

// -------------------------------------------------------------- Simulation

Simulation::Simulation(Scenario scenario)
    : sc_(std::move(scenario)), spec_(sc_.model_spec()), layout_(StateLayout::build(sc_)) {
  sc_.validate();
  reduced_ = sc_.reduced_form();
  const int n = sc_.dims().n_e;
  if (sc_.robust) robust_gain_ = Mat(sc_.robust_gain.asDiagonal()) * sc_.gain_scale;
  if (sc_.adaptive) adaptive_gain_ = sc_.adaptive_gain * sc_.gain_scale;
  for (const auto& seg : sc_.bias.schedule) {
    switch_steps_.push_back(std::llround(seg.start / sc_.step));
    theta_.push_back(fluxobs::true_parameters(spec_.constraint, spec_.r_eff, spec_.input,
                                              seg.delta_i, seg.delta_u, sc_.nu));
  }
  (void)n;
  shadow_start_step_ = std::llround(sc_.error_model_start / sc_.step);
}

std::int64_t Simulation::total_steps() const { return std::llround(sc_.horizon / sc_.step); }

std::size_t Simulation::segment_for_step(std::int64_t step) const {
  std::size_t k = 0;
  while (k + 1 < switch_steps_.size() && switch_steps_[k + 1] <= step) ++k;
  return k;
}

const TrueParameters& Simulation::true_parameters_at(std::int64_t step) const {
  return theta_[segment_for_step(step)];
}

PlantState Simulation::plant_state(const Eigen::VectorXd& x) const {
  return {block(x, layout_.lambda), block(x, layout_.q), block(x, layout_.p)};
}

FilterBankState Simulation::filter_state(const Eigen::VectorXd& x) const {
  FilterBankState f = FilterBankState::zero(sc_.dims().n_e, sc_.nu, reduced_);
  f.unpack(std::span<const double>(x.data() + layout_.filters.offset, layout_.filters.size));
  return f;
}

Vec Simulation::control(double t, const PlantState& st) const {
  if (sc_.model == ModelKind::pmsm) return sc_.drive.voltage(t);
  return maglev_controller(sc_.controller, sc_.maglev, st,
                           sc_.controller.reference_scale * reference_qd(t));
}

void Simulation::derivative(double t, std::size_t segment, const Eigen::VectorXd& x,
                            Eigen::VectorXd& dx, bool shadows_active) const {
  const Dims d = sc_.dims();
  const PlantState st = plant_state(x);
  const Vec u = control(t, st);
  const PlantDerivative pd = ph_dynamics(spec_, st, u, Vec::Constant(d.n_m, sc_.load));
  dx.segment(layout_.lambda.offset, d.n_e) = pd.lambda;
  dx.segment(layout_.q.offset, d.n_m) = pd.q;
  dx.segment(layout_.p.offset, d.n_m) = pd.p;

  const BiasSegment& bias = sc_.bias.schedule[segment];
  const Vec i = spec_.current(st.lambda, st.q);
  const Vec i_m = i + bias.delta_i;
  const Vec u_m = u + bias.delta_u;
  const KnownSignals sig = known_signals(spec_.constraint, i_m, u_m, spec_.r_eff, spec_.input);

  const FilterBankState fb = filter_state(x);
  FilterBankState dfb = fb;
  filter_derivatives(fb, spec_.constraint, sig, dfb);
  dfb.pack(std::span<double>(dx.data() + layout_.filters.offset, layout_.filters.size));
  const RegressionSample sample = regression_sample(fb, sig);

  if (layout_.robust.present()) {
    const RobustObserverState obs{block(x, layout_.robust), robust_gain_};
    dx.segment(layout_.robust.offset, d.n_e) =
        robust_observer_derivative(obs, i_m, u_m, sample, spec_.r_eff, spec_.input);
  }
  AdaptiveObserverState adaptive;
  if (layout_.adaptive_lambda.present()) {
    adaptive.lambda_hat = block(x, layout_.adaptive_lambda);
    adaptive.theta_hat = block(x, layout_.adaptive_theta);
    adaptive.gain = adaptive_gain_;
    adaptive.reduced = reduced_;
    const AdaptiveDerivative ad =
        adaptive_observer_derivative(adaptive, i_m, u_m, sample, spec_.r_eff, spec_.input);
    dx.segment(layout_.adaptive_lambda.offset, d.n_e) = ad.lambda_hat;
    dx.segment(layout_.adaptive_theta.offset, layout_.adaptive_theta.size) = ad.theta_hat;
  }
  if (layout_.pebo.present()) {
    dx.segment(layout_.pebo.offset, d.n_e) = pebo_derivative(i_m, u_m, spec_.r_eff, spec_.input);
  }
  if (layout_.robust_shadow.present()) {
    auto out = dx.segment(layout_.robust_shadow.offset, d.n_e);
    if (shadows_active) {
      out = robust_error_derivative(block(x, layout_.robust_shadow), robust_gain_, sample,
                                    theta_[segment].theta);
    } else {
      out.setZero();
    }
  }
  if (layout_.adaptive_shadow.present()) {
    auto out = dx.segment(layout_.adaptive_shadow.offset, layout_.adaptive_shadow.size);
    if (shadows_active) {
      out = adaptive_error_derivative(block(x, layout_.adaptive_shadow), adaptive_gain_,
                                      adaptive.psi(sample), d.n_e);
    } else {
      out.setZero();
    }
  }
}

CoupledState Simulation::initial_state() const {
  const Dims d = sc_.dims();
  PlantState st;
  st.q = Vec::Zero(d.n_m);
  st.p = Vec::Zero(d.n_m);
  if (sc_.initial_flux.size()) {
    st.lambda = sc_.initial_flux;
    if (sc_.model == ModelKind::maglev) {
      st.q(0) = sc_.controller.q_star;
      st.p(0) = sc_.controller.p_star;
    }
  } else if (sc_.model == ModelKind::pmsm) {
    st.lambda = spec_.magnetics->magnet_flux(st.q);
  } else {
    st.q(0) = sc_.controller.q_star;
    st.p(0) = sc_.controller.p_star;
    Vec guess(2);
    guess << 0.05, 0.05;
    st.lambda = maglev_rest_flux(sc_.controller, sc_.maglev, spec_, guess);
  }
  if (sc_.initial_flux_jitter > 0.0) {
    std::mt19937_64 rng(sc_.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < d.n_e; ++k) {
      st.lambda(k) *= 1.0 + sc_.initial_flux_jitter * normal(rng);
    }
  }
  spec_.check_domain(st);

  CoupledState cs;
  cs.x = Eigen::VectorXd::Zero(layout_.total);
  cs.x.segment(layout_.lambda.offset, d.n_e) = st.lambda;
  cs.x.segment(layout_.q.offset, d.n_m) = st.q;
  cs.x.segment(layout_.p.offset, d.n_m) = st.p;

  FilterBankState fb = FilterBankState::zero(d.n_e, sc_.nu, reduced_);
  if (sc_.filter_init == FilterInit::rest) {
    const BiasSegment& bias = sc_.bias.schedule[0];
    const Vec u = control(0.0, st);
    const Vec i_m = spec_.current(st.lambda, st.q) + bias.delta_i;
    const KnownSignals sig =
        known_signals(spec_.constraint, i_m, u + bias.delta_u, spec_.r_eff, spec_.input);
    fb = rest_filter_state(spec_.constraint, sig, sc_.nu, reduced_);
  }
  fb.pack(std::span<double>(cs.x.data() + layout_.filters.offset, layout_.filters.size));

  const Vec lambda_hat0 = sc_.lambda_hat0.size() ? sc_.lambda_hat0 : Vec::Zero(d.n_e);
  if (layout_.robust.present()) cs.x.segment(layout_.robust.offset, d.n_e) = lambda_hat0;
  if (layout_.adaptive_lambda.present()) {
    cs.x.segment(layout_.adaptive_lambda.offset, d.n_e) = lambda_hat0;
    if (sc_.theta_hat0.size()) {
      cs.x.segment(layout_.adaptive_theta.offset, layout_.adaptive_theta.size) = sc_.theta_hat0;
    }
  }
  // PEBO: xi(0) = 0 with the offset calibrated to lambda(0); the stored state
  // is the estimate xi + offset itself.
  if (layout_.pebo.present()) cs.x.segment(layout_.pebo.offset, d.n_e) = st.lambda;
  return cs;
}

void Simulation::step(CoupledState& cs) const {
  const double h = sc_.step;
  const std::size_t seg = segment_for_step(cs.step);
  const bool has_shadow = layout_.robust_shadow.present() || layout_.adaptive_shadow.present();
  if (has_shadow && !cs.shadows_active && cs.step >= shadow_start_step_) {
    const Vec lambda = block(cs.x, layout_.lambda);
    if (layout_.robust_shadow.present()) {
      cs.x.segment(layout_.robust_shadow.offset, lambda.size()) =
          block(cs.x, layout_.robust) - lambda;
    }
    if (layout_.adaptive_shadow.present()) {
      const int n = static_cast<int>(lambda.size());
      const Vec& theta = theta_[seg].theta;
      const Vec theta_obs = reduced_ ? compress_reduced(theta, n) : theta;
      auto chi = cs.x.segment(layout_.adaptive_shadow.offset, layout_.adaptive_shadow.size);
      chi.head(n) = block(cs.x, layout_.adaptive_lambda) - lambda;
      chi.tail(theta_obs.size()) = block(cs.x, layout_.adaptive_theta) - theta_obs;
    }
    // The shadow blocks were overwritten; drop their summation carry.
    if (cs.work.carry.size() == cs.x.size()) {
      for (const auto* b : {&layout_.robust_shadow, &layout_.adaptive_shadow}) {
        if (b->present()) cs.work.carry.segment(b->offset, b->size).setZero();
      }
    }
    cs.shadows_active = true;
  }

  const double t = static_cast<double>(cs.step) * h;
  const bool shadows = cs.shadows_active;
  rk4_step(
      [this, seg, shadows](double ts, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
        derivative(ts, seg, x, dx, shadows);
      },
      t, h, cs.x, cs.work);
  ++cs.step;
  cs.t = static_cast<double>(cs.step) * h;

  if (!cs.x.allFinite()) {
    for (const auto* b : layout_.blocks()) {
      if (!cs.x.segment(b->offset, b->size).allFinite()) throw DivergenceError(b->name, cs.t);
    }
  }
}

TraceRecord Simulation::snapshot(const CoupledState& cs) const {
  const Dims d = sc_.dims();
  const std::size_t seg = segment_for_step(cs.step);
  const BiasSegment& bias = sc_.bias.schedule[seg];
  const TrueParameters& tp = theta_[seg];

  TraceRecord r;
  r.t = cs.t;
  const PlantState st = plant_state(cs.x);
  r.lambda = st.lambda;
  r.q = st.q;
  r.p = st.p;
  r.u = control(cs.t, st);
  r.i = spec_.current(st.lambda, st.q);
  r.i_m = r.i + bias.delta_i;
  r.u_m = r.u + bias.delta_u;
  r.xi = cs.x.segment(layout_.filters.offset, layout_.filters.size);
  const KnownSignals sig = known_signals(spec_.constraint, r.i_m, r.u_m, spec_.r_eff, spec_.input);
  const RegressionSample sample = regression_sample(filter_state(cs.x), sig);
  r.y = sample.y;
  r.phi_lambda = sample.phi_lambda;
  r.phi_theta = sample.phi_theta;
  r.theta = tp.theta;
  r.w_residual = eval_w(spec_.constraint, st.lambda, r.i);
  r.regression_residual =
      regression_residual(r.y, r.phi_lambda, r.lambda, r.phi_theta, r.theta);

  if (layout_.robust.present()) {
    r.robust_lambda_hat = block(cs.x, layout_.robust);
    r.robust_error = (r.robust_lambda_hat - st.lambda).norm();
  }
  if (layout_.adaptive_lambda.present()) {
    r.adaptive_lambda_hat = block(cs.x, layout_.adaptive_lambda);
    r.adaptive_theta_hat = block(cs.x, layout_.adaptive_theta);
    const Vec theta_obs = reduced_ ? compress_reduced(tp.theta, d.n_e) : tp.theta;
    r.adaptive_lambda_error = (r.adaptive_lambda_hat - st.lambda).norm();
    r.adaptive_theta_error = (r.adaptive_theta_hat - theta_obs).norm();
  }
  if (layout_.pebo.present()) {
    r.pebo_lambda_hat = block(cs.x, layout_.pebo);
    r.pebo_error = (r.pebo_lambda_hat - st.lambda).norm();
  }
  return r;
}

namespace {

void summarize(const Simulation& sim, const Trace& trace, Summary& s) {
  const Scenario& sc = sim.scenario();
  const auto& recs = trace.records;
  if (recs.empty()) return;

  double max_w = 0.0, max_res = 0.0, sum_y2 = 0.0;
  std::size_t n_after = 0;
  for (const auto& r : recs) {
    max_w = std::max(max_w, std::abs(r.w_residual) / (1.0 + r.lambda.squaredNorm()));
    if (r.t >= sc.burn_in) {
      max_res = std::max(max_res, std::abs(r.regression_residual));
      sum_y2 += r.y * r.y;
      ++n_after;
    }
  }
  const double rms_y = n_after ? std::sqrt(sum_y2 / static_cast<double>(n_after)) : 0.0;
  s.set("max_w_residual_rel", max_w);
  s.set("max_regression_residual", max_res);
  s.set("rms_y", rms_y);
  s.set("regression_residual_ratio", rms_y > 0.0 ? max_res / rms_y : 0.0);

  std::vector<Vec> phi, psi;
  phi.reserve(recs.size());
  const bool reduced = sc.reduced_form();
  const int n = trace.n_e;
  for (const auto& r : recs) {
    phi.push_back(r.phi_lambda);
    const Vec pt = reduced ? compress_reduced(r.phi_theta, n) : r.phi_theta;
    Vec ps(n + pt.size());
    ps.head(n) = r.phi_lambda;
    ps.tail(pt.size()) = pt;
    psi.push_back(ps);
  }
  const auto window_samples = static_cast<std::size_t>(std::llround(sc.pe_window / trace.stride));
  const std::size_t start_stride = std::max<std::size_t>(1, window_samples / 20);
  std::optional<PeEstimate> pe_phi;
  if (recs.size() > window_samples && window_samples > 0) {
    pe_phi = pe_estimate(phi, trace.stride, sc.pe_window, start_stride);
    const PeEstimate pe_psi = pe_estimate(psi, trace.stride, sc.pe_window, start_stride);
    s.set("pe_window", pe_phi->window);
    s.set("pe_phi_lambda_alpha", pe_phi->alpha);
    s.set("pe_phi_lambda_sup", pe_phi->sup_norm);
    s.set("pe_psi_alpha", pe_psi.alpha);
    s.set("pe_psi_sup", pe_psi.sup_norm);
  }

  if (trace.robust) {
    double peak = 0.0;
    for (const auto& r : recs) peak = std::max(peak, r.robust_error);
    s.set("robust_error_initial", recs.front().robust_error);
    s.set("robust_error_max", peak);
    s.set("robust_error_final", recs.back().robust_error);

    std::string verdict = "undefined";
    if (pe_phi && pe_phi->alpha > 0.0) {
      const Mat gain = Mat(sc.robust_gain.asDiagonal()) * sc.gain_scale;
      double b_sup = 0.0;
      for (const auto& r : recs) {
        RegressionSample smp;
        smp.phi_lambda = r.phi_lambda;
        smp.phi_theta = r.phi_theta;
        b_sup = std::max(b_sup, disturbance_norm(gain, smp, r.theta, n));
      }
      s.set("prop1_b_sup", b_sup);
      try {
        const Prop1Bound bound = prop1_bound(*pe_phi, gain, b_sup);
        std::size_t violations = 0;
        const double e0 = recs.front().robust_error;
        for (const auto& r : recs) {
          if (r.robust_error > bound.envelope(r.t, e0)) ++violations;
        }
        s.set("prop1_eta", bound.eta);
        s.set("prop1_m_r", bound.m_r);
        s.set("prop1_rho_r", bound.rho_r);
        s.set("prop1_ell", bound.ell);
        s.set("prop1_violations", static_cast<double>(violations));
        verdict = violations == 0 ? "pass" : "fail";
      } catch (const std::exception&) {
        verdict = "undefined";
      }
    }
    s.set_text("prop1_bound_check", verdict);
  }
  if (trace.adaptive) {
    double peak_l = 0.0, peak_t = 0.0;
    for (const auto& r : recs) {
      peak_l = std::max(peak_l, r.adaptive_lambda_error);
      peak_t = std::max(peak_t, r.adaptive_theta_error);
    }
    s.set("adaptive_lambda_error_max", peak_l);
    s.set("adaptive_lambda_error_final", recs.back().adaptive_lambda_error);
    s.set("adaptive_theta_error_max", peak_t);
    s.set("adaptive_theta_error_final", recs.back().adaptive_theta_error);
  }
  if (trace.pebo) s.set("pebo_error_final", recs.back().pebo_error);
}

}  // namespace

RunResult Simulation::run() const {
  RunResult out;
  const Dims d = sc_.dims();
  Trace& tr = out.trace;
  tr.n_e = d.n_e;
  tr.n_m = d.n_m;
  tr.m = d.m;
  tr.filter_size = layout_.filters.size;
  tr.robust = sc_.robust;
  tr.adaptive = sc_.adaptive;
  tr.pebo = sc_.pebo;
  tr.adaptive_theta_size = layout_.adaptive_theta.size;
  tr.stride = sc_.step * sc_.decimation;

  const std::int64_t steps = total_steps();
  tr.records.reserve(static_cast<std::size_t>(steps / sc_.decimation + 1));

  // Sup norms for the error-model cross-check, accumulated on every step.
  double robust_diff = 0.0, robust_ref = 0.0, adaptive_diff = 0.0, adaptive_ref = 0.0;

  CoupledState cs = initial_state();
  tr.records.push_back(snapshot(cs));
  for (std::int64_t k = 0; k < steps; ++k) {
    step(cs);
    if (cs.shadows_active) {
      const Vec lambda = block(cs.x, layout_.lambda);
      if (layout_.robust_shadow.present()) {
        const Vec e = block(cs.x, layout_.robust) - lambda;
        robust_diff = std::max(robust_diff, (e - block(cs.x, layout_.robust_shadow)).norm());
        robust_ref = std::max(robust_ref, e.norm());
      }
      if (layout_.adaptive_shadow.present()) {
        const int n = d.n_e;
        const Vec& theta = theta_[segment_for_step(cs.step - 1)].theta;
        const Vec theta_obs = reduced_ ? compress_reduced(theta, n) : theta;
        Vec chi(n + theta_obs.size());
        chi.head(n) = block(cs.x, layout_.adaptive_lambda) - lambda;
        chi.tail(theta_obs.size()) = block(cs.x, layout_.adaptive_theta) - theta_obs;
        adaptive_diff = std::max(adaptive_diff, (chi - block(cs.x, layout_.adaptive_shadow)).norm());
        adaptive_ref = std::max(adaptive_ref, chi.norm());
      }
    }
    if (cs.step % sc_.decimation == 0) tr.records.push_back(snapshot(cs));
  }

  Summary& s = out.summary;
  s.set_text("scenario", sc_.name);
  s.set_text("model", sc_.model == ModelKind::pmsm ? "pmsm" : "maglev");
  s.set("steps", static_cast<double>(steps));
  s.set("step", sc_.step);
  s.set("horizon", sc_.horizon);
  s.set("nu", sc_.nu);
  s.set("records", static_cast<double>(tr.records.size()));
  summarize(*this, tr, s);
  if (layout_.robust_shadow.present()) {
    s.set("robust_error_model_mismatch", robust_ref > 0.0 ? robust_diff / robust_ref : robust_diff);
  }
  if (layout_.adaptive_shadow.present()) {
    s.set("adaptive_error_model_mismatch",
          adaptive_ref > 0.0 ? adaptive_diff / adaptive_ref : adaptive_diff);
  }
  return out;
}

RunResult run(const Scenario& scenario) { return Simulation(scenario).run(); }

std::vector<SweepRow> bias_sweep(const Scenario& scenario, const std::vector<double>& scales) {
  if (scales.empty()) throw std::invalid_argument("sweep: empty scale list");
  if (!scenario.robust) throw std::invalid_argument("sweep requires robust observer");
  std::vector<std::future<SweepRow>> jobs;
  jobs.reserve(scales.size());
  for (double scale : scales) {
    if (!(scale >= 0.0)) throw std::invalid_argument("sweep: scales must be non-negative");
    Scenario sc = scenario;
    sc.bias = scenario.bias.scaled(scale);
    jobs.push_back(std::async(std::launch::async, [sc = std::move(sc), scale]() {
      const RunResult res = run(sc);
      const double cutoff = 0.9 * sc.horizon;
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& r : res.trace.records) {
        if (r.t >= cutoff) {
          sum += r.robust_error;
          ++count;
        }
      }
      return SweepRow{scale, count ? sum / static_cast<double>(count) : 0.0};
    }));
  }
  std::vector<SweepRow> rows;
  rows.reserve(jobs.size());
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

}  // namespace fluxobs
