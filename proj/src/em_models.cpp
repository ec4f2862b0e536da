#include "fluxobs/em_models.hpp"

#include <cmath>
#include <sstream>

namespace fluxobs {

void Dims::validate() const {
  if (n_e <= 0 || n_m <= 0 || m <= 0) throw DimensionError("dims: counts must be positive");
  if (m > n_e) throw DimensionError("dims: m must not exceed n_E");
  if (n_e > kMaxPorts || n_m > kMaxPorts) throw DimensionError("dims: too many ports");
}

DivergenceError::DivergenceError(const std::string& component, double t)
    : std::runtime_error("non-finite " + component + " at t=" + std::to_string(t)),
      component_(component),
      time_(t) {}

ConfigError::ConfigError(const std::string& message, std::string key, int line)
    : std::runtime_error(message), key_(std::move(key)), line_(line) {}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be strictly positive");
  }
}

Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Vec vec1(double a) {
  Vec v(1);
  v(0) = a;
  return v;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

void PmsmParams::validate() const {
  require_positive(l_s, "L_s");
  require_positive(lambda_m, "lambda_m");
  require_positive(r_s, "R_s");
  require_positive(inertia, "J");
  if (n_p < 1) throw std::invalid_argument("n_p must be a positive integer");
  if (friction < 0.0) throw std::invalid_argument("friction must be non-negative");
}

Vec PmsmDrive::voltage(double t) const {
  return vec2(amplitude * std::cos(frequency * t), amplitude * std::sin(frequency * t));
}

void MaglevParams::validate() const {
  require_positive(inertia, "J");
  require_positive(k1, "k1");
  require_positive(k2, "k2");
  require_positive(r, "R");
  require_positive(turns, "N");
  require_positive(c1, "c1");
  require_positive(c2, "c2");
  require_positive(gap, "g");
  require_positive(arm, "D");
  if (friction < 0.0) throw std::invalid_argument("friction must be non-negative");
}

Mat MaglevParams::inductance(double q) const { return diag2(k1 / (gap - q), k2 / (gap + q)); }

void MaglevControllerParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("controller alpha must be > 0");
  if (!(beta < 0.0)) throw std::invalid_argument("controller beta must be < 0");
  if (!(r_a > 0.0)) throw std::invalid_argument("controller R_a must be > 0");
  if (!(gain > 0.0)) throw std::invalid_argument("controller G must be > 0");
}

double MaglevControllerParams::lambda1_star(const MaglevParams& plant) const {
  return std::sqrt(plant.k1 * plant.c2 / (plant.k2 * plant.c1)) * lambda2_star;
}

ConstraintConstants pmsm_constraint(const PmsmParams& p) {
  ConstraintConstants k;
  k.q1 = Mat::Identity(2, 2);
  k.q2 = -2.0 * p.l_s * Mat::Identity(2, 2);
  k.q3 = p.l_s * p.l_s * Mat::Identity(2, 2);
  k.c = Vec::Zero(2);
  k.d = -p.lambda_m * p.lambda_m;
  return k;
}

ConstraintConstants maglev_constraint(const MaglevParams& p) {
  ConstraintConstants k;
  k.q1 = Mat::Zero(2, 2);
  k.q1(0, 1) = k.q1(1, 0) = p.gap;
  k.q2 = Mat::Zero(2, 2);
  k.q2(0, 1) = -p.k2;
  k.q2(1, 0) = -p.k1;
  k.q3 = Mat::Zero(2, 2);
  k.c = Vec::Zero(2);
  k.d = 0.0;
  return k;
}

ModelSpec make_pmsm(const PmsmParams& prm) {
  prm.validate();
  ModelSpec s;
  s.name = "pmsm";
  s.dims = {2, 1, 2};
  s.r_eff = prm.r_s * Mat::Identity(2, 2);
  s.input = Mat::Identity(2, 2);
  s.r_mech = Mat::Constant(1, 1, prm.friction);
  s.coupling = Mat::Identity(1, 1);
  s.constraint = pmsm_constraint(prm);

  const double l_s = prm.l_s;
  const double lm = prm.lambda_m;
  const double np = prm.n_p;
  const double inertia = prm.inertia;
  auto mu = [lm, np](const Vec& q) {
    return vec2(lm * std::cos(np * q(0)), lm * std::sin(np * q(0)));
  };
  auto dmu = [lm, np](const Vec& q) {
    return vec2(-lm * np * std::sin(np * q(0)), lm * np * std::cos(np * q(0)));
  };

  s.current = [=](const Vec& lambda, const Vec& q) -> Vec { return (lambda - mu(q)) / l_s; };
  s.electric_q_grad = [=](const Vec& lambda, const Vec& q) -> Vec {
    return vec1(-(lambda - mu(q)).dot(dmu(q)) / l_s);
  };
  s.velocity = [inertia](const Vec&, const Vec& p) -> Vec { return p / inertia; };
  s.mechanical_q_grad = [](const Vec& q, const Vec&) -> Vec { return Vec::Zero(q.size()); };
  s.electric_energy = [=](const Vec& lambda, const Vec& q) {
    return 0.5 * (lambda - mu(q)).squaredNorm() / l_s;
  };
  s.mechanical_energy = [inertia](const Vec&, const Vec& p) {
    return 0.5 * p.squaredNorm() / inertia;
  };
  s.check_domain = [](const PlantState&) {};

  LinearMagnetics mag;
  mag.inductance = [l_s](const Vec&) -> Mat { return l_s * Mat::Identity(2, 2); };
  mag.inductance_partial = [](const Vec&, int) -> Mat { return Mat::Zero(2, 2); };
  mag.magnet_flux = mu;
  mag.magnet_flux_partial = [dmu](const Vec& q, int) -> Vec { return dmu(q); };
  s.magnetics = mag;
  return s;
}

ModelSpec make_maglev(const MaglevParams& prm) {
  prm.validate();
  ModelSpec s;
  s.name = "maglev";
  s.dims = {2, 1, 2};
  s.r_eff = diag2(prm.r / (prm.turns * prm.c1), prm.r / (prm.turns * prm.c2));
  s.input = Mat::Identity(2, 2);
  s.r_mech = Mat::Constant(1, 1, prm.friction);
  s.coupling = Mat::Constant(1, 1, prm.arm);
  s.constraint = maglev_constraint(prm);

  const double k1 = prm.k1;
  const double k2 = prm.k2;
  const double g = prm.gap;
  const double inertia = prm.inertia;

  s.current = [=](const Vec& lambda, const Vec& q) -> Vec {
    return vec2((g - q(0)) / k1 * lambda(0), (g + q(0)) / k2 * lambda(1));
  };
  s.electric_q_grad = [=](const Vec& lambda, const Vec&) -> Vec {
    return vec1(-lambda(0) * lambda(0) / (2.0 * k1) + lambda(1) * lambda(1) / (2.0 * k2));
  };
  s.velocity = [inertia](const Vec&, const Vec& p) -> Vec { return p / inertia; };
  s.mechanical_q_grad = [](const Vec& q, const Vec&) -> Vec { return Vec::Zero(q.size()); };
  s.electric_energy = [=](const Vec& lambda, const Vec& q) {
    return 0.5 * ((g - q(0)) / k1 * lambda(0) * lambda(0) + (g + q(0)) / k2 * lambda(1) * lambda(1));
  };
  s.mechanical_energy = [inertia](const Vec&, const Vec& p) {
    return 0.5 * p.squaredNorm() / inertia;
  };
  s.check_domain = [g](const PlantState& st) {
    if (!(std::abs(st.q(0)) < g)) {
      std::ostringstream msg;
      msg << "maglev air gap closed: |q| = " << std::abs(st.q(0)) << " >= g = " << g;
      throw DomainError(msg.str());
    }
  };

  LinearMagnetics mag;
  mag.inductance = [prm](const Vec& q) -> Mat { return prm.inductance(q(0)); };
  mag.inductance_partial = [=](const Vec& q, int) -> Mat {
    return diag2(k1 / ((g - q(0)) * (g - q(0))), -k2 / ((g + q(0)) * (g + q(0))));
  };
  mag.magnet_flux = [](const Vec&) -> Vec { return Vec::Zero(2); };
  mag.magnet_flux_partial = [](const Vec&, int) -> Vec { return Vec::Zero(2); };
  s.magnetics = mag;
  return s;
}

Vec constitutive_current(const ModelSpec& spec, const Vec& lambda, const Vec& q) {
  require_size(lambda, spec.dims.n_e, "constitutive_current lambda");
  require_size(q, spec.dims.n_m, "constitutive_current q");
  PlantState st{lambda, q, Vec::Zero(spec.dims.n_m)};
  spec.check_domain(st);
  return spec.current(lambda, q);
}

Vec flux_from_current(const ModelSpec& spec, const Vec& q, const Vec& i) {
  if (!spec.magnetics) throw std::logic_error(spec.name + ": no linear magnetics");
  return spec.magnetics->inductance(q) * i + spec.magnetics->magnet_flux(q);
}

Vec current_rate(const ModelSpec& spec, const PlantState& st, const Vec& lambda_dot,
                 const Vec& q_dot) {
  if (!spec.magnetics) throw std::logic_error(spec.name + ": no linear magnetics");
  const auto& mag = *spec.magnetics;
  const Mat l_inv = mag.inductance(st.q).inverse();
  const Vec i = l_inv * (st.lambda - mag.magnet_flux(st.q));
  Vec flux_rate = lambda_dot;
  for (int k = 0; k < spec.dims.n_m; ++k) {
    flux_rate -= mag.magnet_flux_partial(st.q, k) * q_dot(k);
    flux_rate -= mag.inductance_partial(st.q, k) * i * q_dot(k);
  }
  return l_inv * flux_rate;
}

PlantDerivative ph_dynamics(const ModelSpec& spec, const PlantState& st, const Vec& u,
                            const Vec& load) {
  const Dims& d = spec.dims;
  require_size(st.lambda, d.n_e, "ph_dynamics lambda");
  require_size(st.q, d.n_m, "ph_dynamics q");
  require_size(st.p, d.n_m, "ph_dynamics p");
  require_size(u, d.m, "ph_dynamics u");
  require_size(load, d.n_m, "ph_dynamics F_L");
  spec.check_domain(st);

  const Vec i = spec.current(st.lambda, st.q);
  const Vec v = spec.velocity(st.q, st.p);
  const Vec dh_dq = spec.electric_q_grad(st.lambda, st.q) + spec.mechanical_q_grad(st.q, st.p);

  PlantDerivative out;
  out.lambda = -spec.r_eff * i + spec.input * u;
  out.q = spec.coupling * v;
  out.p = -spec.coupling.transpose() * dh_dq - spec.r_mech * v + load;
  return out;
}

MeasurementBias MeasurementBias::constant(const Vec& delta_i, const Vec& delta_u) {
  MeasurementBias b;
  b.schedule.push_back({0.0, delta_i, delta_u});
  return b;
}

MeasurementBias MeasurementBias::none(const Dims& dims) {
  return constant(Vec::Zero(dims.n_e), Vec::Zero(dims.m));
}

void MeasurementBias::validate(const Dims& dims) const {
  if (schedule.empty()) throw std::invalid_argument("bias schedule is empty");
  if (schedule.front().start != 0.0) {
    throw std::invalid_argument("bias schedule must start at t = 0");
  }
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    require_size(schedule[k].delta_i, dims.n_e, "bias delta_i");
    require_size(schedule[k].delta_u, dims.m, "bias delta_u");
    if (k > 0 && !(schedule[k].start > schedule[k - 1].start)) {
      throw std::invalid_argument("bias switch times must be strictly increasing");
    }
  }
}

std::size_t MeasurementBias::active_index(double t) const {
  std::size_t k = 0;
  while (k + 1 < schedule.size() && schedule[k + 1].start <= t) ++k;
  return k;
}

const BiasSegment& MeasurementBias::active(double t) const {
  return schedule[active_index(t)];
}

MeasurementBias MeasurementBias::scaled(double factor) const {
  MeasurementBias b = *this;
  for (auto& s : b.schedule) {
    s.delta_i *= factor;
    s.delta_u *= factor;
  }
  return b;
}

Measurement measure(const Vec& i, const Vec& u, const MeasurementBias& bias, double t) {
  const BiasSegment& seg = bias.active(t);
  return {i + seg.delta_i, u + seg.delta_u};
}

double reference_qd(double t) {
  return 1.0e-5 * (6.0 * std::sin(10.0 * t) + 4.0 * std::sin(20.0 * t) + 6.0 * std::sin(15.0 * t));
}

Vec maglev_controller(const MaglevControllerParams& c, const MaglevParams& m,
                      const PlantState& st, double q_d) {
  const double l1 = st.lambda(0);
  const double l2 = st.lambda(1);
  const double q = st.q(0);
  const double p = st.p(0);
  if (!(std::abs(q) < m.gap)) throw DomainError("maglev controller: |q| >= g");

  const double d = m.arm;
  const double l1s = c.lambda1_star(m);
  const double l2s = c.lambda2_star;
  const double z2 = d / (2.0 * c.alpha) * (l1 - l1s) + d / (2.0 * c.beta) * (l2 - l2s) +
                    d * (q - (c.q_star + q_d)) + c.r_a / d * (p - c.p_star);
  const double e2s = m.c2 * l2s * l2s / (2.0 * m.k2);

  const double u1 = m.r * (m.gap - q) / m.k1 * l1 -
                    m.r * d / (c.alpha * m.c1) * (m.c1 * l1 * l1 / (2.0 * m.k1) - e2s) -
                    (m.r * d / (2.0 * c.alpha * m.c1) + m.turns * c.alpha * c.r_a / d) * c.gain * z2 -
                    m.turns * c.alpha / m.inertia * p;
  const double u2 = m.r * (m.gap + q) / m.k2 * l2 +
                    m.r * d / (c.beta * m.c2) * (m.c2 * l2 * l2 / (2.0 * m.k2) - e2s) -
                    (m.r * d / (2.0 * c.beta * m.c2) + m.turns * c.beta * c.r_a / d) * c.gain * z2 -
                    m.turns * c.beta / m.inertia * p;
  if (c.coil_scaling) return vec2(u1 / (m.turns * m.c1), u2 / (m.turns * m.c2));
  return vec2(u1, u2);
}

Vec maglev_rest_flux(const MaglevControllerParams& c, const MaglevParams& m,
                     const ModelSpec& spec, const Vec& guess) {
  Vec q = vec1(c.q_star);
  Vec p = vec1(c.p_star);
  auto residual = [&](const Vec& lambda) -> Vec {
    PlantState st{lambda, q, p};
    const Vec u = maglev_controller(c, m, st, 0.0);
    return -spec.r_eff * spec.current(lambda, q) + spec.input * u;
  };
  Vec lambda = guess;
  for (int iter = 0; iter < 100; ++iter) {
    const Vec f = residual(lambda);
    Mat jac(2, 2);
    for (int k = 0; k < 2; ++k) {
      const double step = 1e-7 * std::max(1e-3, std::abs(lambda(k)));
      Vec lp = lambda, lm = lambda;
      lp(k) += step;
      lm(k) -= step;
      jac.col(k) = (residual(lp) - residual(lm)) / (2.0 * step);
    }
    const Vec delta = jac.fullPivLu().solve(f);
    lambda -= delta;
    if (delta.norm() <= 1e-15 * std::max(1.0, lambda.norm())) break;
  }
  if (!lambda.allFinite() || residual(lambda).norm() > 1e-9) {
    throw DomainError("maglev: closed-loop rest flux did not converge");
  }
  return lambda;
}

}  // namespace fluxobs
