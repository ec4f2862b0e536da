#include "fluxobs/scenario_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace fluxobs {

ScenarioNotFound::ScenarioNotFound(const std::string& what)
    : ConfigError("scenario not found: " + what) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& key, int line, const std::string& why) {
  std::string msg = "scenario";
  if (line > 0) msg += " line " + std::to_string(line);
  msg += ": key '" + key + "': " + why;
  throw ConfigError(msg, key, line);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_vec(const Vec& v) {
  std::string s;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (j) s += ", ";
    s += fmt(v[j]);
  }
  return s;
}

double parse_double(const std::string& key, const std::string& text, int line) {
  const std::string t = trim(text);
  if (t.empty()) fail(key, line, "expected a number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    fail(key, line, "not a finite number: '" + t + "'");
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& text, int line) {
  const std::string t = trim(text);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    fail(key, line, "not an integer: '" + t + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text, int line) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  fail(key, line, "expected true or false, got '" + t + "'");
}

Vec parse_vec(const std::string& key, const std::string& text, int line) {
  std::vector<double> vals;
  std::string item;
  std::string t = text;
  for (char& c : t) {
    if (c == ',') c = ' ';
  }
  std::istringstream ss(t);
  while (ss >> item) vals.push_back(parse_double(key, item, line));
  if (vals.size() > static_cast<std::size_t>(kMaxStacked)) fail(key, line, "vector too long");
  Vec v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t j = 0; j < vals.size(); ++j) v[static_cast<Eigen::Index>(j)] = vals[j];
  return v;
}

struct Field {
  std::string key;
  std::string unit;
  std::function<std::string(const Scenario&)> get;
  std::function<void(Scenario&, const std::string&, int)> set;
};

Field real(std::string key, std::string unit, double Scenario::*m) {
  return {key, std::move(unit), [m](const Scenario& s) { return fmt(s.*m); },
          [m, key](Scenario& s, const std::string& v, int line) { s.*m = parse_double(key, v, line); }};
}

template <typename Part>
Field nested(std::string key, std::string unit, Part Scenario::*part, double Part::*m) {
  return {key, std::move(unit), [part, m](const Scenario& s) { return fmt(s.*part.*m); },
          [part, m, key](Scenario& s, const std::string& v, int line) {
            s.*part.*m = parse_double(key, v, line);
          }};
}

Field flag(std::string key, bool Scenario::*m) {
  return {key, "", [m](const Scenario& s) { return std::string(s.*m ? "true" : "false"); },
          [m, key](Scenario& s, const std::string& v, int line) { s.*m = parse_bool(key, v, line); }};
}

Field vector(std::string key, std::string unit, Vec Scenario::*m) {
  return {key, std::move(unit), [m](const Scenario& s) { return fmt_vec(s.*m); },
          [m, key](Scenario& s, const std::string& v, int line) { s.*m = parse_vec(key, v, line); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"name", "", [](const Scenario& s) { return s.name; },
                 [](Scenario& s, const std::string& v, int line) {
                   if (v.empty() || v.find_first_of("#\n") != std::string::npos) {
                     fail("name", line, "must be non-empty and free of #");
                   }
                   s.name = v;
                 }});
    f.push_back({"model", "pmsm | maglev",
                 [](const Scenario& s) {
                   return std::string(s.model == ModelKind::pmsm ? "pmsm" : "maglev");
                 },
                 [](Scenario& s, const std::string& v, int line) {
                   if (v == "pmsm") s.model = ModelKind::pmsm;
                   else if (v == "maglev") s.model = ModelKind::maglev;
                   else fail("model", line, "expected pmsm or maglev, got '" + v + "'");
                 }});
    f.push_back(real("step", "s", &Scenario::step));
    f.push_back(real("horizon", "s", &Scenario::horizon));
    f.push_back({"decimation", "samples", [](const Scenario& s) { return std::to_string(s.decimation); },
                 [](Scenario& s, const std::string& v, int line) {
                   const long long n = parse_int("decimation", v, line);
                   if (n < 1 || n > 1000000000) fail("decimation", line, "must be >= 1");
                   s.decimation = static_cast<int>(n);
                 }});
    f.push_back({"seed", "", [](const Scenario& s) { return std::to_string(s.seed); },
                 [](Scenario& s, const std::string& v, int line) {
                   const long long n = parse_int("seed", v, line);
                   if (n < 0) fail("seed", line, "must be >= 0");
                   s.seed = static_cast<std::uint64_t>(n);
                 }});
    f.push_back(real("nu", "1/s", &Scenario::nu));
    f.push_back({"filter_init", "rest | zero",
                 [](const Scenario& s) {
                   return std::string(s.filter_init == FilterInit::rest ? "rest" : "zero");
                 },
                 [](Scenario& s, const std::string& v, int line) {
                   if (v == "rest") s.filter_init = FilterInit::rest;
                   else if (v == "zero") s.filter_init = FilterInit::zero;
                   else fail("filter_init", line, "expected rest or zero, got '" + v + "'");
                 }});
    f.push_back(flag("robust", &Scenario::robust));
    f.push_back(flag("adaptive", &Scenario::adaptive));
    f.push_back(flag("pebo", &Scenario::pebo));
    f.push_back(vector("robust_gain", "diagonal", &Scenario::robust_gain));
    f.push_back(vector("adaptive_gain", "diagonal", &Scenario::adaptive_gain));
    f.push_back(real("gain_scale", "", &Scenario::gain_scale));
    f.push_back(vector("lambda_hat0", "V s", &Scenario::lambda_hat0));
    f.push_back(vector("theta_hat0", "", &Scenario::theta_hat0));
    f.push_back(vector("initial_flux", "V s", &Scenario::initial_flux));
    f.push_back(real("initial_flux_jitter", "relative", &Scenario::initial_flux_jitter));
    f.push_back(real("load", "N m", &Scenario::load));
    f.push_back(flag("error_models", &Scenario::error_models));
    f.push_back(real("error_model_start", "s", &Scenario::error_model_start));
    f.push_back(real("burn_in", "s", &Scenario::burn_in));
    f.push_back(real("pe_window", "s", &Scenario::pe_window));

    f.push_back(nested("pmsm.l_s", "H", &Scenario::pmsm, &PmsmParams::l_s));
    f.push_back(nested("pmsm.lambda_m", "V s", &Scenario::pmsm, &PmsmParams::lambda_m));
    f.push_back({"pmsm.n_p", "", [](const Scenario& s) { return std::to_string(s.pmsm.n_p); },
                 [](Scenario& s, const std::string& v, int line) {
                   const long long n = parse_int("pmsm.n_p", v, line);
                   if (n < 1 || n > 1000) fail("pmsm.n_p", line, "must be >= 1");
                   s.pmsm.n_p = static_cast<int>(n);
                 }});
    f.push_back(nested("pmsm.r_s", "Ohm", &Scenario::pmsm, &PmsmParams::r_s));
    f.push_back(nested("pmsm.inertia", "kg m^2", &Scenario::pmsm, &PmsmParams::inertia));
    f.push_back(nested("pmsm.friction", "N m s", &Scenario::pmsm, &PmsmParams::friction));
    f.push_back(nested("drive.amplitude", "V", &Scenario::drive, &PmsmDrive::amplitude));
    f.push_back(nested("drive.frequency", "rad/s", &Scenario::drive, &PmsmDrive::frequency));

    f.push_back(nested("maglev.inertia", "kg m^2", &Scenario::maglev, &MaglevParams::inertia));
    f.push_back(nested("maglev.k1", "H m", &Scenario::maglev, &MaglevParams::k1));
    f.push_back(nested("maglev.k2", "H m", &Scenario::maglev, &MaglevParams::k2));
    f.push_back(nested("maglev.r", "Ohm", &Scenario::maglev, &MaglevParams::r));
    f.push_back(nested("maglev.turns", "", &Scenario::maglev, &MaglevParams::turns));
    f.push_back(nested("maglev.c1", "", &Scenario::maglev, &MaglevParams::c1));
    f.push_back(nested("maglev.c2", "", &Scenario::maglev, &MaglevParams::c2));
    f.push_back(nested("maglev.gap", "m", &Scenario::maglev, &MaglevParams::gap));
    f.push_back(nested("maglev.arm", "m", &Scenario::maglev, &MaglevParams::arm));
    f.push_back(nested("maglev.friction", "N m s", &Scenario::maglev, &MaglevParams::friction));

    using C = MaglevControllerParams;
    f.push_back(nested("controller.alpha", "", &Scenario::controller, &C::alpha));
    f.push_back(nested("controller.beta", "", &Scenario::controller, &C::beta));
    f.push_back(nested("controller.r_a", "", &Scenario::controller, &C::r_a));
    f.push_back(nested("controller.gain", "", &Scenario::controller, &C::gain));
    f.push_back(nested("controller.lambda2_star", "V s", &Scenario::controller, &C::lambda2_star));
    f.push_back(nested("controller.q_star", "m", &Scenario::controller, &C::q_star));
    f.push_back(nested("controller.p_star", "kg m/s", &Scenario::controller, &C::p_star));
    f.push_back(nested("controller.reference_scale", "", &Scenario::controller, &C::reference_scale));
    f.push_back({"controller.coil_scaling", "",
                 [](const Scenario& s) { return std::string(s.controller.coil_scaling ? "true" : "false"); },
                 [](Scenario& s, const std::string& v, int line) {
                   s.controller.coil_scaling = parse_bool("controller.coil_scaling", v, line);
                 }});
    return f;
  }();
  return table;
}

// bias.segments = N, then bias.<k>.start / bias.<k>.delta_i / bias.<k>.delta_u.
bool apply_bias(Scenario& sc, const std::string& key, const std::string& value, int line) {
  if (key.rfind("bias.", 0) != 0) return false;
  const std::string rest = key.substr(5);
  auto& segs = sc.bias.schedule;
  if (rest == "segments") {
    const long long n = parse_int(key, value, line);
    if (n < 1 || n > 1000) fail(key, line, "must be between 1 and 1000");
    segs.resize(static_cast<std::size_t>(n));
    return true;
  }
  const auto dot = rest.find('.');
  if (dot == std::string::npos) fail(key, line, "unknown key");
  const std::string index = rest.substr(0, dot), field = rest.substr(dot + 1);
  if (index.empty() || index.find_first_not_of("0123456789") != std::string::npos) {
    fail(key, line, "unknown key");
  }
  const std::size_t k = std::stoul(index);
  if (k >= segs.size()) {
    fail(key, line, "segment index out of range (set bias.segments first)");
  }
  if (field == "start") segs[k].start = parse_double(key, value, line);
  else if (field == "delta_i") segs[k].delta_i = parse_vec(key, value, line);
  else if (field == "delta_u") segs[k].delta_u = parse_vec(key, value, line);
  else fail(key, line, "unknown key");
  return true;
}

// Segments created by bias.segments without explicit offsets get zeros.
void finalize(Scenario& sc) {
  const Dims d = sc.dims();
  for (auto& s : sc.bias.schedule) {
    if (s.delta_i.size() == 0) s.delta_i = Vec::Zero(d.n_e);
    if (s.delta_u.size() == 0) s.delta_u = Vec::Zero(d.m);
  }
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"pmsm-openloop", "maglev-paper"};
  return names;
}

Scenario preset(const std::string& name) {
  Scenario sc;
  sc.name = name;
  if (name == "maglev-paper") {
    sc.model = ModelKind::maglev;
    sc.horizon = 100.0;
    sc.step = 1.0e-5;
    sc.nu = 50.0;
    sc.decimation = 1000;
    Vec di0(2), du0(2), di1(2), du1(2);
    di0 << -0.003, 0.0025;
    du0 << 0.0, 0.0;
    di1 << 0.001, 0.0008;
    du1 << 0.002, 0.0002;
    sc.bias.schedule = {{0.0, di0, du0}, {50.0, di1, du1}};
    sc.robust = sc.adaptive = sc.pebo = true;
    sc.robust_gain = Vec::Constant(2, 1.0e4);
    sc.adaptive_gain.resize(7);
    sc.adaptive_gain << 1e20, 1e20, 1e20, 1e20, 2e13, 2e13, 20.0;
    return sc;
  }
  if (name == "pmsm-openloop") {
    sc.model = ModelKind::pmsm;
    sc.horizon = 10.0;
    sc.step = 1.0e-5;
    sc.nu = 50.0;
    sc.decimation = 100;
    Vec di(2), du(2);
    di << 0.02, -0.01;
    du << 0.05, -0.03;
    sc.bias = MeasurementBias::constant(di, du);
    sc.robust = sc.pebo = true;
    sc.robust_gain = Vec::Constant(2, 1.0);
    // The drive starts from standstill, so no filter rest state is consistent.
    sc.filter_init = FilterInit::zero;
    sc.burn_in = 0.5;
    return sc;
  }
  throw ScenarioNotFound(name);
}

void apply_setting(Scenario& sc, const std::string& key, const std::string& value, int line) {
  if (apply_bias(sc, key, value, line)) return;
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(sc, value, line);
      return;
    }
  }
  fail(key, line, "unknown key");
}

Scenario parse_scenario(std::istream& in) {
  Scenario sc;
  std::string raw;
  int line = 0;
  bool any = false;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(text, line, "expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) fail(key, line, "missing key");
    if (key == "preset") {
      if (any) fail(key, line, "preset must be the first setting");
      try {
        sc = preset(value);
      } catch (const ScenarioNotFound&) {
        fail(key, line, "unknown preset '" + value + "'");
      }
    } else {
      apply_setting(sc, key, value, line);
    }
    any = true;
  }
  finalize(sc);
  return sc;
}

Scenario parse_scenario_string(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

Scenario load_scenario(const std::string& path_or_preset) {
  std::ifstream in(path_or_preset);
  if (in) return parse_scenario(in);
  for (const auto& n : preset_names()) {
    if (n == path_or_preset) return preset(n);
  }
  throw ScenarioNotFound(path_or_preset);
}

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream out;
  for (const Field& f : fields()) {
    out << f.key << " = " << f.get(sc);
    if (!f.unit.empty()) out << "  # " << f.unit;
    out << '\n';
  }
  out << "bias.segments = " << sc.bias.schedule.size() << '\n';
  for (std::size_t k = 0; k < sc.bias.schedule.size(); ++k) {
    const auto& s = sc.bias.schedule[k];
    out << "bias." << k << ".start = " << fmt(s.start) << "  # s\n";
    out << "bias." << k << ".delta_i = " << fmt_vec(s.delta_i) << "  # A\n";
    out << "bias." << k << ".delta_u = " << fmt_vec(s.delta_u) << "  # V\n";
  }
  return out.str();
}

std::vector<std::string> scenario_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  keys.insert(keys.end(), {"bias.segments", "bias.0.start", "bias.0.delta_i", "bias.0.delta_u"});
  return keys;
}

}  // namespace fluxobs
