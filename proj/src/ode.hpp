#ifndef HVF_ODE_HPP
#define HVF_ODE_HPP

#include "expr.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace hvf {

struct OdeOptions {
  double abstol = 1e-12;
  double h_init = 0.05;
  int max_steps = 500000;
};

// Dormand-Prince 5(4) with elementary step-size control. rhs(y, dy) must be
// autonomous; integrates from t=0 to t=1.
template <class RHS>
Eigen::VectorXd integrate_unit_time(RHS&& rhs, Eigen::VectorXd y, const OdeOptions& opt) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  const int n = static_cast<int>(y.size());
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
  double t = 0.0;
  double h = std::min(opt.h_init, 1.0);
  rhs(y, k1);
  for (int step = 0; step < opt.max_steps; ++step) {
    if (t >= 1.0) return y;
    h = std::min(h, 1.0 - t);
    if (h < 1e-14) throw EvalError("ODE step size underflow");

    ytmp = y + h * a21 * k1;
    rhs(ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double enorm = err.cwiseAbs().maxCoeff();
    if (enorm <= opt.abstol) {
      t += h;
      y.swap(ynew);
      k1.swap(k7);  // FSAL
      double f = enorm > 0 ? 0.9 * std::pow(opt.abstol / enorm, 0.2) : 5.0;
      h *= std::clamp(f, 0.2, 5.0);
    } else {
      double f = 0.9 * std::pow(opt.abstol / enorm, 0.2);
      h *= std::clamp(f, 0.1, 0.9);
    }
    (void)c2; (void)c3; (void)c4; (void)c5;
  }
  throw EvalError("ODE exceeded the step budget");
}

}  // namespace hvf

#endif
