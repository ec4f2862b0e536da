// Acceptance run: one PASS/FAIL line per criterion.
//
// Exit status is 0 once every criterion has been evaluated, whatever the
// verdicts; --strict makes any FAIL exit 1.

#include <chrono>
#include <cstring>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "fluxobs/scenario_io.hpp"
#include "fluxobs/verify.hpp"

namespace {

using namespace fluxobs;

// Tolerances.
constexpr int kConstraintSamples = 1000;
constexpr double kConstraintTol = 1e-12;
constexpr double kConstraintSeconds = 1.0;
constexpr double kLemma1Tol = 1e-6;
constexpr double kLemma1Horizon = 10.0;
constexpr double kLemma1Seconds = 120.0;
constexpr double kDerivativeTol = 1e-4;
constexpr double kDecayRateTol = 0.2;
constexpr double kZeroBiasTol = 1e-6;
constexpr double kAdaptiveFraction = 0.01;
constexpr double kAdaptiveSeconds = 1200.0;
constexpr double kErrorModelTol = 1e-6;
constexpr double kErrorModelHorizon = 10.0;
constexpr double kPeboTol = 0.01;
constexpr double kPeboFrom = 10.0, kPeboTo = 40.0;
constexpr double kRichardsonLo = 16.0 * 0.7, kRichardsonHi = 16.0 * 1.3;
const std::vector<double> kSweepScales{0.0, 0.5, 1.0, 2.0};

struct Outcome {
  bool pass = true;
  std::string detail;

  void add(const CheckResult& c) {
    pass = pass && c.status == Status::pass;
    if (!detail.empty()) detail += "\n      ";
    detail += c.name + (c.status == Status::pass ? " ok: " : " FAILED: ") + c.detail;
  }
  void add(const std::vector<CheckResult>& v) {
    for (const auto& c : v) add(c);
  }
  void runtime(double seconds, double limit) {
    const bool ok = seconds < limit;
    pass = pass && ok;
    detail += "\n      runtime " + std::to_string(seconds) + " s (limit " + std::to_string(limit) +
              " s)" + (ok ? "" : " EXCEEDED");
  }
};

Outcome constraint_identity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  o.add(checks::constraint_identity(ModelKind::pmsm, kConstraintSamples, 1, kConstraintTol));
  o.add(checks::constraint_identity(ModelKind::maglev, kConstraintSamples, 1, kConstraintTol));
  o.runtime(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
            kConstraintSeconds);
  return o;
}

Outcome lemma1() {
  Outcome o;
  Scenario sc = scenarios::maglev(false, false, false);
  sc.horizon = kLemma1Horizon;
  sc.burn_in = 0.1;
  const auto t0 = std::chrono::steady_clock::now();
  o.add(checks::lemma1_residual(sc, kLemma1Tol));
  o.runtime(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
            kLemma1Seconds);
  return o;
}

Outcome appendix_identities() {
  Outcome o;
  o.add(checks::appendix("pmsm", scenarios::pmsm_plain(), AppendixOptions{}, kDerivativeTol,
                         kDecayRateTol));
  AppendixOptions mo;
  mo.window_start = 2e-5;
  mo.window_end = 3e-4;
  o.add(checks::appendix("maglev", scenarios::maglev_transient(), mo, kDerivativeTol,
                         kDecayRateTol));
  return o;
}

Outcome robust_observer() {
  Outcome o;
  o.add(checks::robust_zero_bias(scenarios::maglev(true, false, false), kZeroBiasTol));
  o.add(checks::sweep_monotone(scenarios::maglev(true, false, false), kSweepScales, kZeroBiasTol));
  Scenario first = scenarios::maglev(true, false, true);
  first.horizon = 50.0;
  for (const auto& c : checks::pebo_drift(first, kPeboFrom, kPeboTo, kPeboTol)) {
    if (c.name == "robust_bounded_same_run") o.add(c);
  }
  return o;
}

Outcome envelope() {
  Outcome o;
  o.add(checks::prop1_envelope(scenarios::maglev(true, false, false)));
  return o;
}

Outcome adaptive_observer() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  o.add(checks::adaptive_convergence(scenarios::maglev(false, true, false), kAdaptiveFraction));
  o.runtime(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
            kAdaptiveSeconds);
  return o;
}

Outcome error_models() {
  Outcome o;
  Scenario sc = scenarios::maglev(true, true, false);
  sc.horizon = kErrorModelHorizon;
  sc.error_model_start = 0.1;
  o.add(checks::error_models(sc, kErrorModelTol));
  return o;
}

Outcome pebo_drift() {
  Outcome o;
  Scenario sc = scenarios::maglev(true, false, true);
  sc.horizon = 50.0;
  o.add(checks::pebo_drift(sc, kPeboFrom, kPeboTo, kPeboTol));
  return o;
}

Outcome integrator_order() {
  Outcome o;
  Scenario sc = scenarios::maglev(false, false, false);
  sc.horizon = 1.0;
  sc.decimation = 1;
  sc.initial_flux_jitter = 0.02;
  sc.seed = 7;
  o.add(checks::richardson(sc, kRichardsonLo, kRichardsonHi));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int k = 1; k < argc; ++k) {
    if (std::strcmp(argv[k], "--strict") == 0) {
      strict = true;
    } else {
      std::cerr << "usage: fluxobs_acceptance [--strict]\n";
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"constraint identity", constraint_identity},
      {"regression residual", lemma1},
      {"appendix identities", appendix_identities},
      {"robust observer", robust_observer},
      {"robust envelope", envelope},
      {"adaptive observer", adaptive_observer},
      {"error-equation cross-check", error_models},
      {"PEBO drift", pebo_drift},
      {"integrator order", integrator_order},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << k + 1 << " " << (o.pass ? "PASS" : "FAIL") << "  "
              << criteria[k].first << "\n      " << o.detail << std::endl;
  }
  std::cout << "acceptance complete: " << criteria.size() - failed << " of " << criteria.size()
            << " criteria pass" << std::endl;
  return strict && failed > 0 ? 1 : 0;
}
