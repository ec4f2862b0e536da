#include "fluxobs/appendix.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace fluxobs {

double dif6_residual(const ConstraintConstants& k, const FilterBankState& xi,
                     const KnownSignals& s, const Vec& lambda, const TrueParameters& tp) {
  const double nu = xi.nu;
  const Vec& tm = tp.theta_m;
  double rhs = lambda.dot(xi.xi2 + nu * s.y_a) + 2.0 * lambda.dot(k.q1 * tm) - tm.dot(xi.xi4) +
               tp.theta_ya.dot(xi.xi1) + tm.dot(tp.theta_ya - (2.0 / nu) * (k.q1 * tm));
  if (!xi.reduced()) rhs += nu * tp.theta_yb.dot(s.y_b - xi.xi3);
  return xi.xi5 - nu * s.y_c - rhs;
}

namespace {

// The three groups of w(lambda, i_m - delta_i) up to its constant term.
struct Terms {
  double quad = 0.0;    // lambda' Q1 lambda
  double cross = 0.0;   // lambda' (y_a + theta_ya)
  double affine = 0.0;  // y_b' theta_yb + y_c
  double operator[](int j) const { return j == 0 ? quad : j == 1 ? cross : affine; }
};

struct Probe {
  Terms value;
  Terms rate;  // analytic time derivatives
  double flux_mismatch = 0.0;
  double flux_rate = 0.0;
};

}  // namespace

AppendixResult appendix_identity_check(const Scenario& scenario, const AppendixOptions& opt) {
  if (!(opt.window_end > opt.window_start) || opt.window_start < 0.0 || opt.fd_stride < 1) {
    throw std::invalid_argument("appendix check: bad window or stride");
  }
  Scenario sc = scenario;
  sc.robust = sc.adaptive = sc.pebo = sc.error_models = false;
  sc.filter_init = FilterInit::zero;
  const double fit_horizon = 40.0 / sc.nu;
  sc.horizon = std::max(opt.window_end, fit_horizon) + 4.0 * opt.fd_stride * sc.step;

  const Simulation sim(sc);
  const ModelSpec& spec = sim.model();
  const ConstraintConstants& k = spec.constraint;
  const Dims d = sc.dims();
  const Vec load = Vec::Constant(d.n_m, sc.load);

  auto probe = [&](const CoupledState& cs) {
    const std::size_t seg = sim.segment_for_step(cs.step);
    const BiasSegment& bias = sc.bias.schedule[seg];
    const TrueParameters& tp = sim.true_parameters_at(cs.step);
    const PlantState st = sim.plant_state(cs.x);
    const Vec u = sim.control(cs.t, st);
    const PlantDerivative pd = ph_dynamics(spec, st, u, load);
    const Vec i = spec.current(st.lambda, st.q);
    const Vec i_m = i + bias.delta_i;
    const KnownSignals s = known_signals(k, i_m, u + bias.delta_u, spec.r_eff, spec.input);
    const Vec lambda_dot = s.y_m + tp.theta_m;
    const Vec i_dot = current_rate(spec, st, lambda_dot, pd.q);

    Probe p;
    p.value.quad = st.lambda.dot(k.q1 * st.lambda);
    p.value.cross = st.lambda.dot(s.y_a + tp.theta_ya);
    p.value.affine = s.y_b.dot(tp.theta_yb) + s.y_c;
    p.rate.quad = 2.0 * st.lambda.dot(k.q1 * lambda_dot);
    p.rate.cross = lambda_dot.dot(s.y_a + tp.theta_ya) + st.lambda.dot(k.q2 * i_dot);
    p.rate.affine = i_dot.dot(tp.theta_yb.head(d.n_e)) +
                    i_m.dot((k.q3 + k.q3.transpose()) * i_dot) + k.c.dot(i_dot);
    p.flux_mismatch = (pd.lambda - lambda_dot).norm();
    p.flux_rate = pd.lambda.norm();
    return p;
  };

  AppendixResult out;
  const double h = sc.step;
  const int s = opt.fd_stride;
  const auto first = std::llround(opt.window_start / h);
  const auto last = std::llround(opt.window_end / h);

  // Samples on the stride grid, kept in a short window for the 2s-spaced
  // coarse difference used to detect under-resolution.
  std::deque<Probe> ring;
  double max_err = 0.0, max_coarse_gap = 0.0, max_sum = 0.0, max_flux_err = 0.0,
         max_flux = 0.0;
  std::size_t checked = 0;

  CoupledState cs = sim.initial_state();
  const std::int64_t total = sim.total_steps();
  const std::int64_t burn = std::llround(5.0 / sc.nu / h);
  auto record_dif6 = [&](const CoupledState& c) {
    const PlantState st = sim.plant_state(c.x);
    const BiasSegment& bias = sc.bias.schedule[sim.segment_for_step(c.step)];
    const Vec u = sim.control(c.t, st);
    const Vec i_m = spec.current(st.lambda, st.q) + bias.delta_i;
    const KnownSignals sig = known_signals(k, i_m, u + bias.delta_u, spec.r_eff, spec.input);
    const double r = dif6_residual(k, sim.filter_state(c.x), sig, st.lambda,
                                   sim.true_parameters_at(c.step));
    out.times.push_back(c.t);
    out.dif6_residual.push_back(r);
    if (c.step >= burn) out.dif6_max_after_burn_in = std::max(out.dif6_max_after_burn_in, std::abs(r));
  };

  for (std::int64_t n = 0;; ++n) {
    if (cs.t <= fit_horizon + 0.5 * h) record_dif6(cs);
    if (n >= first - 2 * s && n <= last + 2 * s && (n - first) % s == 0) {
      ring.push_back(probe(cs));
      if (ring.size() > 5) ring.pop_front();
      if (ring.size() == 5) {
        const Probe& mid = ring[2];
        for (int j = 0; j < 3; ++j) {
          const double fine = (ring[3].value[j] - ring[1].value[j]) / (2.0 * s * h);
          const double coarse = (ring[4].value[j] - ring[0].value[j]) / (4.0 * s * h);
          const double analytic = mid.rate[j];
          out.derivative_scale = std::max(out.derivative_scale, std::abs(analytic));
          max_err = std::max(max_err, std::abs(fine - analytic));
          max_coarse_gap = std::max(max_coarse_gap, std::abs(coarse - fine));
        }
        max_sum = std::max(max_sum, std::abs(mid.rate.quad + mid.rate.cross + mid.rate.affine));
        max_flux_err = std::max(max_flux_err, mid.flux_mismatch);
        max_flux = std::max(max_flux, mid.flux_rate);
        ++checked;
      }
    }
    if (n >= total) break;
    sim.step(cs);
  }
  if (checked == 0) throw std::invalid_argument("appendix check: window holds no stencil");

  const double scale = out.derivative_scale;
  out.derivative_abs_error = max_err;
  out.derivative_rel_error = scale > 0.0 ? max_err / scale : max_err;
  out.identity_sum_rel = scale > 0.0 ? max_sum / scale : max_sum;
  out.flux_identity_rel = max_flux > 0.0 ? max_flux_err / max_flux : max_flux_err;
  // Central differences at spacing s and 2s differ by ~3x the truncation
  // error; a gap comparable to the signal means the grid does not resolve it.
  if (scale > 0.0 && max_coarse_gap > 0.1 * scale) {
    throw GridTooCoarseError("appendix check: finite differences unresolved (gap " +
                             std::to_string(max_coarse_gap / scale) + " of signal scale)");
  }

  // Log-linear fit of the dif6 transient between fit_start/nu and the point
  // where it reaches its round-off floor.
  const auto& r = out.dif6_residual;
  out.dif6_initial = std::abs(r.front());
  const std::size_t tail = r.size() - r.size() / 5;
  double floor = 0.0;
  for (std::size_t j = tail; j < r.size(); ++j) floor = std::max(floor, std::abs(r[j]));
  out.dif6_floor = floor;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  const double t0 = opt.fit_start / sc.nu;
  for (std::size_t j = 0; j < r.size(); ++j) {
    if (out.times[j] < t0) continue;
    const double a = std::abs(r[j]);
    if (!(a > opt.fit_floor * floor)) break;
    const double x = out.times[j], y = std::log(a);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
    if (m == 1) out.fit_start = x;
    out.fit_end = x;
  }
  if (m >= 3) {
    const double den = m * sxx - sx * sx;
    out.dif6_decay_rate = den > 0.0 ? -(m * sxy - sx * sy) / den : 0.0;
  }
  return out;
}

}  // namespace fluxobs
