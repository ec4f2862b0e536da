#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fluxobs/scenario_io.hpp"
#include "fluxobs/trace_io.hpp"
#include "fluxobs/verify.hpp"
#include "fluxobs/version.hpp"

namespace py = pybind11;
using namespace fluxobs;

namespace {

Scenario make_scenario(const std::string& source, const py::dict& settings) {
  Scenario sc = load_scenario(source);
  for (const auto& [k, v] : settings) {
    apply_setting(sc, py::str(k), py::str(v));
  }
  sc.validate();
  return sc;
}

py::dict summary_dict(const Summary& s) {
  py::dict out;
  for (const auto& [key, value] : s.entries()) {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used == value.size()) {
        out[py::str(key)] = v;
        continue;
      }
    } catch (const std::exception&) {
    }
    out[py::str(key)] = value;
  }
  return out;
}

// Columns as numpy arrays, named as in trace.csv.
py::dict trace_dict(const Trace& trace) {
  std::stringstream ss;
  write_trace_csv(trace, ss);
  const CsvTable t = read_csv(ss);
  py::dict out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    py::array_t<double> col(static_cast<py::ssize_t>(t.rows.size()));
    auto m = col.mutable_unchecked<1>();
    for (std::size_t r = 0; r < t.rows.size(); ++r) m(r) = t.rows[r][c];
    out[py::str(t.header[c])] = col;
  }
  return out;
}

const char* status_name(Status s) {
  return s == Status::pass ? "pass" : s == Status::fail ? "fail" : "skip";
}

}  // namespace

PYBIND11_MODULE(_fluxobs, m) {
  m.doc() = "Flux observers for electromechanical systems with biased measurements";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("presets", &preset_names, "Names of the built-in scenarios.");

  m.def(
      "scenario_text",
      [](const std::string& source, const py::dict& settings) {
        return serialize_scenario(make_scenario(source, settings));
      },
      py::arg("source"), py::arg("settings") = py::dict(),
      "Resolved scenario in key = value form.");

  m.def(
      "run",
      [](const std::string& source, const py::dict& settings) {
        const Scenario sc = make_scenario(source, settings);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run(sc);
        }
        py::dict out;
        out["summary"] = summary_dict(r.summary);
        out["trace"] = trace_dict(r.trace);
        return out;
      },
      py::arg("source"), py::arg("settings") = py::dict(),
      "Simulate a preset or scenario file. `settings` maps scenario keys to values.\n"
      "Returns {'summary': dict, 'trace': dict of column arrays}.");

  m.def(
      "sweep",
      [](const std::string& source, const std::vector<double>& scales, const py::dict& settings) {
        const Scenario sc = make_scenario(source, settings);
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = bias_sweep(sc, scales);
        }
        std::vector<std::pair<double, double>> out;
        for (const auto& r : rows) out.emplace_back(r.scale, r.steady_error);
        return out;
      },
      py::arg("source"), py::arg("scales"), py::arg("settings") = py::dict(),
      "(scale, steady_error) pairs of the robust observer.");

  m.def(
      "verify",
      [](const std::string& suite, double horizon) {
        VerifyOptions opt;
        opt.horizon = horizon;
        SuiteReport rep;
        {
          py::gil_scoped_release release;
          rep = run_suite(suite, opt);
        }
        py::list checks;
        for (const auto& c : rep.checks) {
          py::dict d;
          d["name"] = c.name;
          d["status"] = status_name(c.status);
          d["detail"] = c.detail;
          checks.append(d);
        }
        py::dict out;
        out["suite"] = rep.suite;
        out["passed"] = rep.passed();
        out["checks"] = checks;
        return out;
      },
      py::arg("suite"), py::arg("horizon") = 0.0, "Run a built-in property suite.");
}
