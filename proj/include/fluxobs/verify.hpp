#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "fluxobs/appendix.hpp"
#include "fluxobs/harness.hpp"

namespace fluxobs {

enum class Status { pass, fail, skip };

struct CheckResult {
  std::string name;
  Status status = Status::fail;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;  // no check failed (skips allowed)
};

struct VerifyOptions {
  double horizon = 0.0;  // > 0 overrides the long MagLev runs (default 100 s)
  std::uint64_t seed = 1;
};

const std::vector<std::string>& suite_names();

/// Throws std::invalid_argument("unknown suite: ...") for other names.
SuiteReport run_suite(const std::string& name, const VerifyOptions& opt = {});

void print_report(const SuiteReport& report, std::ostream& out);

/// Scenarios used by the suites.
namespace scenarios {
/// maglev-paper with the given observers only.
Scenario maglev(bool robust, bool adaptive, bool pebo);
/// pmsm-openloop with observers off, filters from zero and a 0.5 s burn-in.
Scenario pmsm_plain();
/// MagLev start 2 % off the rest flux at h = 1e-7, for finite differences.
Scenario maglev_transient();
}  // namespace scenarios

/// Individual properties; each runs its own simulation(s).
namespace checks {

CheckResult constraint_identity(ModelKind model, int samples, std::uint64_t seed, double tol);
CheckResult trajectory_constraint(const Scenario& sc, double tol);
/// max |y - phi_lambda' lambda - phi_theta' theta| over t >= burn_in, relative to RMS(y).
CheckResult lemma1_residual(const Scenario& sc, double tol);
/// Residual column recomputed from a CSV round trip equals the stored one bit for bit.
CheckResult trace_self_consistency(const Scenario& sc);
/// Derivative and filtered-identity parts of the appendix check.
std::vector<CheckResult> appendix(const std::string& label, const Scenario& sc,
                                  const AppendixOptions& opt, double derivative_tol,
                                  double rate_tol);
/// |lambda_tilde(T)| <= tol * max |lambda| with biases removed.
CheckResult robust_zero_bias(const Scenario& sc, double tol);
/// Robust and adaptive lambda_hat derivatives agree along a zero-bias trace when theta_hat = 0.
CheckResult zero_bias_coincidence(const Scenario& sc);
/// Pipeline errors against directly integrated error models.
std::vector<CheckResult> error_models(const Scenario& sc, double tol);
/// PEBO error slope over [t0, t1] against |theta_m|. With the robust observer
/// enabled, also requires its error vector to drift by less than `tol` times
/// that slope on the same run.
std::vector<CheckResult> pebo_drift(const Scenario& sc, double t0, double t1, double tol);
/// Both adaptive errors fall below `fraction` of their segment peak inside every bias segment.
CheckResult adaptive_convergence(const Scenario& sc, double fraction);
CheckResult prop1_envelope(const Scenario& sc);
/// Bias sweep: monotone nondecreasing, and the scale-0 row within tol * max |lambda|.
CheckResult sweep_monotone(const Scenario& sc, const std::vector<double>& scales, double tol);
/// Ratio of sup-norm trace differences (h vs h/2) / (h/2 vs h/4) inside [lo, hi].
CheckResult richardson(const Scenario& sc, double lo, double hi);

}  // namespace checks

}  // namespace fluxobs
