#include "fluxobs/observers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fluxobs {

void RobustObserverState::validate() const {
  const auto n = lambda_hat.size();
  if (gain.rows() != n || gain.cols() != n) {
    throw DimensionError("robust observer: gain must be n_E x n_E");
  }
  if (!(gain - gain.transpose()).isZero(0.0)) {
    throw std::invalid_argument("robust observer: gain must be symmetric");
  }
  Eigen::LLT<Mat> llt(gain);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("robust observer: gain must be positive definite");
  }
}

Vec robust_observer_derivative(const RobustObserverState& obs, const Vec& i_m, const Vec& u_m,
                               const RegressionSample& sample, const Mat& r_eff,
                               const Mat& input) {
  const double err = sample.y - sample.phi_lambda.dot(obs.lambda_hat);
  return -r_eff * i_m + input * u_m + obs.gain * sample.phi_lambda * err;
}

void AdaptiveObserverState::validate() const {
  const int n = static_cast<int>(lambda_hat.size());
  const int expect = reduced ? reduced_theta_size(n) : theta_size(n);
  require_size(theta_hat, expect, "adaptive observer theta_hat");
  require_size(gain, n + expect, "adaptive observer gain");
  if ((gain.array() <= 0.0).any()) {
    throw std::invalid_argument("adaptive observer: gain entries must be positive");
  }
}

Vec AdaptiveObserverState::psi(const RegressionSample& sample) const {
  if (!reduced) return sample.psi;
  const int n = static_cast<int>(lambda_hat.size());
  const Vec phi_theta = compress_reduced(sample.phi_theta, n);
  Vec out(n + phi_theta.size());
  out.head(n) = sample.phi_lambda;
  out.tail(phi_theta.size()) = phi_theta;
  return out;
}

Vec AdaptiveObserverState::stacked() const {
  Vec out(lambda_hat.size() + theta_hat.size());
  out.head(lambda_hat.size()) = lambda_hat;
  out.tail(theta_hat.size()) = theta_hat;
  return out;
}

AdaptiveDerivative adaptive_observer_derivative(const AdaptiveObserverState& obs,
                                                const Vec& i_m, const Vec& u_m,
                                                const RegressionSample& sample,
                                                const Mat& r_eff, const Mat& input) {
  const int n = static_cast<int>(obs.lambda_hat.size());
  const Vec psi = obs.psi(sample);
  const double err = sample.y - psi.dot(obs.stacked());
  const Vec correction = obs.gain.cwiseProduct(psi) * err;

  AdaptiveDerivative d;
  d.lambda_hat = -r_eff * i_m + input * u_m + obs.theta_hat.head(n) + correction.head(n);
  d.theta_hat = correction.tail(obs.theta_hat.size());
  return d;
}

Vec robust_error_derivative(const Vec& error, const Mat& gain, const RegressionSample& sample,
                            const Vec& theta) {
  const int n = static_cast<int>(error.size());
  const Vec& phi = sample.phi_lambda;
  return -gain * phi * phi.dot(error) - theta.head(n) +
         gain * phi * sample.phi_theta.dot(theta);
}

Vec adaptive_error_derivative(const Vec& chi, const Vec& gain, const Vec& psi, int n_e) {
  Vec d = -gain.cwiseProduct(psi) * psi.dot(chi);
  d.head(n_e) += chi.segment(n_e, n_e);
  return d;
}

PeboBaseline PeboBaseline::calibrated(const Vec& lambda0, const Vec& xi0) {
  return {xi0, lambda0 - xi0};
}

Vec pebo_derivative(const Vec& i_m, const Vec& u_m, const Mat& r_eff, const Mat& input) {
  return -r_eff * i_m + input * u_m;
}

double min_eigenvalue_psd(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n == 0) return 0.0;
  Eigen::VectorXd diag = m.diagonal();
  if ((diag.array() <= 0.0).any()) return 0.0;
  // Jacobi scaling: m = D s D with unit-diagonal s.
  const Eigen::VectorXd d_inv = diag.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd s = d_inv.asDiagonal() * m * d_inv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_s(s);
  const double s_min = es_s.eigenvalues()(0);
  const double plain = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly)
                           .eigenvalues()(0);
  if (!(s_min > 1e3 * std::numeric_limits<double>::epsilon() * n)) {
    return std::max(0.0, plain);
  }
  // The largest eigenvalue of the inverse is well conditioned.
  const Eigen::MatrixXd inv = d_inv.asDiagonal() * s.inverse() * d_inv.asDiagonal();
  const Eigen::MatrixXd sym = 0.5 * (inv + inv.transpose());
  const double inv_max =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues()(n - 1);
  return 1.0 / inv_max;
}

PeEstimate pe_estimate(std::span<const Vec> samples, double dt, double window,
                       std::size_t start_stride) {
  if (!(dt > 0.0) || !(window > 0.0)) {
    throw std::invalid_argument("pe_estimate: dt and window must be positive");
  }
  const auto steps = static_cast<std::size_t>(std::llround(window / dt));
  if (steps == 0 || samples.size() < steps + 1) {
    throw std::invalid_argument("pe_estimate: trace shorter than window");
  }
  std::size_t stride = std::max<std::size_t>(1, start_stride);
  while (steps % stride != 0) --stride;  // window ends must land on stored prefixes
  const Eigen::Index n = samples.front().size();

  // Running trapezoid integral, kept at every `stride`-th sample.
  std::vector<Eigen::MatrixXd> prefix;
  prefix.reserve(samples.size() / stride + 1);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  PeEstimate pe;
  pe.window = static_cast<double>(steps) * dt;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    pe.sup_norm = std::max(pe.sup_norm, samples[k].norm());
    if (k > 0) {
      const Eigen::VectorXd a = samples[k - 1];
      const Eigen::VectorXd b = samples[k];
      acc.noalias() += 0.5 * dt * (a * a.transpose() + b * b.transpose());
    }
    if (k % stride == 0) prefix.push_back(acc);
  }

  const std::size_t span = steps / stride;
  pe.alpha = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s + span < prefix.size(); ++s) {
    Eigen::MatrixXd gram = prefix[s + span] - prefix[s];
    gram = 0.5 * (gram + gram.transpose());
    const double a = min_eigenvalue_psd(gram);
    if (a < pe.alpha) {
      pe.alpha = a;
      pe.gram = gram;
      pe.worst_start = static_cast<double>(s * stride) * dt;
    }
  }
  pe.alpha = std::max(0.0, pe.alpha);
  return pe;
}

double Prop1Bound::envelope(double t, double initial_error) const {
  return m_r * std::exp(-rho_r * t) * initial_error + ell;
}

Prop1Bound prop1_bound(const PeEstimate& pe, const Mat& gain, double b_sup) {
  if (!(pe.alpha > 0.0)) {
    throw NotExcitingError("prop1_bound: regressor is not persistently exciting (alpha = 0)");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(gain, Eigen::EigenvaluesOnly);
  const double g_min = es.eigenvalues()(0);
  const double g_max = es.eigenvalues()(gain.rows() - 1);
  const double t = pe.window;
  const double phi4 = std::pow(pe.sup_norm, 4);
  const double ratio = g_min * pe.alpha / (1.0 + g_max * g_max * t * t * phi4);
  if (!(ratio > 0.0) || !(ratio < 1.0)) {
    throw BoundDomainError("prop1_bound: log argument outside (0, 1)");
  }
  Prop1Bound b;
  // log1p keeps eta accurate when the excitation level is tiny.
  b.eta = -std::log1p(-ratio) / (2.0 * t);
  const double scale = std::exp(b.eta * t) / b.eta;
  b.m_r = scale * std::sqrt(g_max) * pe.sup_norm;
  b.rho_r = 0.5 * b.eta * std::exp(-2.0 * b.eta * t);
  b.ell = scale * b_sup;
  return b;
}

double disturbance_norm(const Mat& gain, const RegressionSample& sample, const Vec& theta,
                        int n_e) {
  return (theta.head(n_e) - gain * sample.phi_lambda * sample.phi_theta.dot(theta)).norm();
}

}  // namespace fluxobs
