// Command-line front end: run, verify, sweep.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "fluxobs/scenario_io.hpp"
#include "fluxobs/trace_io.hpp"
#include "fluxobs/verify.hpp"
#include "fluxobs/version.hpp"

namespace {

using namespace fluxobs;

struct Overrides {
  std::optional<double> step, horizon, nu, gain_scale;
  std::vector<std::string> set;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--step", o.step, "integration step [s]");
  cmd->add_option("--horizon", o.horizon, "simulated time [s]");
  cmd->add_option("--nu", o.nu, "filter pole [1/s]");
  cmd->add_option("--gain-scale", o.gain_scale, "multiplies all observer gains");
  cmd->add_option("--set", o.set, "extra key=value setting (repeatable)");
}

// Preset < file < command line.
Scenario resolve(const std::string& source, const Overrides& o) {
  Scenario sc = load_scenario(source);
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(sc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.step) sc.step = *o.step;
  if (o.horizon) sc.horizon = *o.horizon;
  if (o.nu) sc.nu = *o.nu;
  if (o.gain_scale) sc.gain_scale = *o.gain_scale;
  sc.validate();
  return sc;
}

std::vector<double> parse_scales(const std::string& text) {
  std::vector<double> out;
  std::string t = text;
  for (char& c : t) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(t);
  std::string item;
  while (in >> item) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError("bad scale '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flux observers for electromechanical systems with biased measurements"};
  app.set_version_flag("--version", std::string(fluxobs::kVersion));
  app.require_subcommand(1);

  Overrides run_o, sweep_o;
  std::string run_src, run_out = "out";
  auto* run_cmd = app.add_subcommand("run", "simulate a scenario and write trace, metadata, summary");
  run_cmd->add_option("scenario", run_src, "scenario file or preset name")->required();
  run_cmd->add_option("--out", run_out, "output directory");
  add_overrides(run_cmd, run_o);

  std::string suite;
  double verify_horizon = 0.0;
  auto* verify_cmd = app.add_subcommand("verify", "run a built-in property suite");
  verify_cmd->add_option("suite", suite, "constraint | regression | appendix | observers | bounds")
      ->required();
  verify_cmd->add_option("--horizon", verify_horizon,
                         "shorten the long MagLev runs (default: preset horizon)");

  std::string sweep_src, scales_text = "0,0.5,1,2", sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "robust steady-state error versus bias scale");
  sweep_cmd->add_option("scenario", sweep_src, "scenario file or preset name")->required();
  sweep_cmd->add_option("--scales", scales_text, "comma-separated bias scale factors");
  sweep_cmd->add_option("--out", sweep_out, "CSV file (default: stdout)");
  add_overrides(sweep_cmd, sweep_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const Scenario sc = resolve(run_src, run_o);
      const RunResult res = run(sc);
      write_run_outputs(sc, res, run_out);
      std::cout << "wrote " << res.trace.records.size() << " records to " << run_out << '\n';
      write_summary(res.summary, std::cout);
      return 0;
    }
    if (*verify_cmd) {
      VerifyOptions opt;
      opt.horizon = verify_horizon;
      const SuiteReport rep = run_suite(suite, opt);
      print_report(rep, std::cout);
      return rep.passed() ? 0 : 1;
    }
    if (*sweep_cmd) {
      const Scenario sc = resolve(sweep_src, sweep_o);
      const auto rows = bias_sweep(sc, parse_scales(scales_text));
      if (sweep_out.empty()) {
        write_sweep_csv(rows, std::cout);
      } else {
        std::ofstream f(sweep_out);
        if (!f) throw std::runtime_error("cannot write " + sweep_out);
        write_sweep_csv(rows, f);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
