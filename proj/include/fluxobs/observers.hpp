#pragma once

#include <span>
#include <vector>

#include "fluxobs/constraint.hpp"
#include "fluxobs/types.hpp"

namespace fluxobs {

/// Gradient flux observer that treats the bias parameters as disturbances.
struct RobustObserverState {
  Vec lambda_hat;
  Mat gain;  // symmetric positive definite

  void validate() const;
};

Vec robust_observer_derivative(const RobustObserverState& obs, const Vec& i_m, const Vec& u_m,
                               const RegressionSample& sample, const Mat& r_eff,
                               const Mat& input);

/// Adaptive observer over the stacked (lambda_hat, theta_hat) estimate.
///
/// `gain` is the diagonal of the adaptation gain, ordered like the stacked
/// state. With `reduced` set, theta_hat omits the theta_yb block (see
/// compress_reduced) and the regressor is compressed the same way.
struct AdaptiveObserverState {
  Vec lambda_hat;
  Vec theta_hat;
  Vec gain;
  bool reduced = false;

  void validate() const;
  /// Regressor matching the theta_hat layout.
  Vec psi(const RegressionSample& sample) const;
  Vec stacked() const;
};

struct AdaptiveDerivative {
  Vec lambda_hat;
  Vec theta_hat;
};

AdaptiveDerivative adaptive_observer_derivative(const AdaptiveObserverState& obs,
                                                const Vec& i_m, const Vec& u_m,
                                                const RegressionSample& sample,
                                                const Mat& r_eff, const Mat& input);

/// Error dynamics of the robust observer for e = lambda_hat - lambda with the
/// decaying filter transient neglected: e' = -G phi phi' e - b, where
/// b = theta_m - G phi phi_theta' theta (see disturbance_norm).
Vec robust_error_derivative(const Vec& error, const Mat& gain, const RegressionSample& sample,
                            const Vec& theta);

/// Error dynamics of the adaptive observer, chi' = -Gamma psi psi' chi + G_a chi,
/// in the observer's (possibly reduced) stacking.
Vec adaptive_error_derivative(const Vec& chi, const Vec& gain, const Vec& psi, int n_e);

/// Open-loop integrator xi' = -R i_m + B u_m with a frozen offset estimate.
struct PeboBaseline {
  Vec xi;
  Vec offset;  // calibrated at t = 0 as lambda(0) - xi(0)

  static PeboBaseline calibrated(const Vec& lambda0, const Vec& xi0);
  Vec estimate() const { return xi + offset; }
};

Vec pebo_derivative(const Vec& i_m, const Vec& u_m, const Mat& r_eff, const Mat& input);

struct PeEstimate {
  double window = 0.0;
  Eigen::MatrixXd gram;  // Gram matrix of the least-excited window
  double alpha = 0.0;    // min over window starts of lambda_min(gram)
  double sup_norm = 0.0;
  double worst_start = 0.0;  // start time of the least-excited window
};

/// Sliding-window trapezoidal Gram integral over uniformly sampled regressors.
/// Window starts are taken every `start_stride` samples. Throws
/// std::invalid_argument when the trace is shorter than the window.
PeEstimate pe_estimate(std::span<const Vec> samples, double dt, double window,
                       std::size_t start_stride = 1);

/// Smallest eigenvalue of a symmetric positive semi-definite matrix, accurate
/// relative to its own magnitude even when the diagonal spans many decades.
double min_eigenvalue_psd(const Eigen::MatrixXd& m);

/// Constants of |e(t)| <= m_r exp(-rho_r t) |e(0)| + ell for the robust observer.
struct Prop1Bound {
  double eta = 0.0;
  double m_r = 0.0;
  double rho_r = 0.0;
  double ell = 0.0;

  double envelope(double t, double initial_error) const;
};

Prop1Bound prop1_bound(const PeEstimate& pe, const Mat& gain, double b_sup);

/// |theta_m - G phi_lambda phi_theta' theta| for one sample.
double disturbance_norm(const Mat& gain, const RegressionSample& sample, const Vec& theta,
                        int n_e);

}  // namespace fluxobs
