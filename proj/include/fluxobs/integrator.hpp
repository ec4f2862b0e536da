#pragma once

#include <Eigen/Dense>

namespace fluxobs {

/// Scratch buffers for one classical Runge-Kutta step; reuse across steps to
/// avoid reallocating.
struct Rk4Workspace {
  Eigen::VectorXd k1, k2, k3, k4, stage;
  Eigen::VectorXd carry;  // low-order bits lost in x += dx (compensated summation)

  void resize(Eigen::Index n) {
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
    stage.resize(n);
    carry = Eigen::VectorXd::Zero(n);
  }
};

/// Advances x' = f(t, x) by one classical fourth-order step in place.
/// `f(t, x, dx)` writes the derivative into `dx`. The state update uses
/// Kahan summation so that rounding does not accumulate over long runs of
/// small steps; the carry lives in `w` and persists across calls.
template <typename Rhs>
void rk4_step(Rhs&& f, double t, double h, Eigen::VectorXd& x, Rk4Workspace& w) {
  if (w.k1.size() != x.size()) w.resize(x.size());
  f(t, x, w.k1);
  w.stage = x + 0.5 * h * w.k1;
  f(t + 0.5 * h, w.stage, w.k2);
  w.stage = x + 0.5 * h * w.k2;
  f(t + 0.5 * h, w.stage, w.k3);
  w.stage = x + h * w.k3;
  f(t + h, w.stage, w.k4);
  w.stage = (h / 6.0) * (w.k1 + 2.0 * w.k2 + 2.0 * w.k3 + w.k4) - w.carry;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double sum = x[j] + w.stage[j];
    w.carry[j] = (sum - x[j]) - w.stage[j];
    x[j] = sum;
  }
}

}  // namespace fluxobs
