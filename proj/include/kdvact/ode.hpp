#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "kdvact/numerics.hpp"

namespace kdvact {

template <int N>
using StateVec = Eigen::Matrix<double, N, 1>;

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
};

// One 5th-order step from (x, y) with derivative k1 already evaluated (FSAL).
// Produces the state increment rather than the state so the caller can accumulate
// with compensation. On return k1 holds the derivative at the end point and err the
// embedded estimate.
template <int N, class Rhs>
void dopri5_step(const Rhs& rhs, double x, double h, const StateVec<N>& y,
                 StateVec<N>& k1, StateVec<N>& incr, StateVec<N>& err) {
  using T = Dopri5;
  StateVec<N> k2, k3, k4, k5, k6, k7, t;
  t = y + h * T::a21 * k1;
  rhs(x + T::c2 * h, t, k2);
  t = y + h * (T::a31 * k1 + T::a32 * k2);
  rhs(x + T::c3 * h, t, k3);
  t = y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
  rhs(x + T::c4 * h, t, k4);
  t = y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
  rhs(x + T::c5 * h, t, k5);
  t = y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
  rhs(x + h, t, k6);
  incr = h * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
  t = y + incr;
  rhs(x + h, t, k7);
  err = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
  k1 = k7;
}

}  // namespace detail

/// Integrates y' = rhs(x, y) across [x0, x1] on a uniform grid of `steps` 5th-order
/// steps. The step sequence depends only on `steps`, so the result is a smooth
/// (piecewise-polynomial) function of any parameter of the right-hand side. State
/// updates are accumulated with a Neumaier carry to keep the roundoff walk flat.
template <int N, class Rhs>
StateVec<N> integrate_fixed(const Rhs& rhs, StateVec<N> y, double x0, double x1, int steps) {
  const double h = (x1 - x0) / steps;
  StateVec<N> k1, incr, err;
  StateVec<N> carry = StateVec<N>::Zero();
  rhs(x0, y, k1);
  for (int i = 0; i < steps; ++i) {
    detail::dopri5_step<N>(rhs, x0 + i * h, h, y, k1, incr, err);
    for (int c = 0; c < N; ++c) {
      const double inc = incr[c] + carry[c];
      const double next = y[c] + inc;
      carry[c] = (std::abs(y[c]) >= std::abs(inc)) ? (y[c] - next) + inc : (inc - next) + y[c];
      y[c] = next;
    }
  }
  return y;
}

/// Adaptive 5(4) integration with a PI-free step controller at mixed absolute/relative
/// local tolerance `tol`. Throws NumericalError when the step size underflows;
/// `context` is included in the message.
template <int N, class Rhs>
StateVec<N> integrate_adaptive(const Rhs& rhs, StateVec<N> y, double x0, double x1,
                               double tol, const std::string& context) {
  const double span = x1 - x0;
  double x = x0;
  double h = span / 16.0;
  StateVec<N> k1, incr, err;
  rhs(x, y, k1);
  int accepted = 0;
  while (x < x1) {
    bool last = false;
    if (x + h >= x1) {
      h = x1 - x;
      last = true;
    }
    if (std::abs(h) < 16.0 * std::numeric_limits<double>::epsilon() * std::abs(span) && !last) {
      throw NumericalError("adaptive integration: step-size underflow (" + context + ")");
    }
    detail::dopri5_step<N>(rhs, x, h, y, k1, incr, err);
    const StateVec<N> out = y + incr;
    double sq = 0.0;
    for (int i = 0; i < N; ++i) {
      const double scale = tol + tol * std::max(std::abs(y[i]), std::abs(out[i]));
      const double r = err[i] / scale;
      sq += r * r;
    }
    const double enorm = std::sqrt(sq / N);
    if (enorm <= 1.0) {
      y = out;
      if (last) return y;
      x += h;
      ++accepted;
      if (accepted > 100'000'000) {
        throw NumericalError("adaptive integration: step budget exhausted (" + context + ")");
      }
    } else {
      rhs(x, y, k1);  // restore FSAL derivative at the rejected point
    }
    const double fac = std::clamp(0.9 * std::pow(std::max(enorm, 1e-10), -0.2), 0.2, 5.0);
    h *= fac;
  }
  return y;
}

}  // namespace kdvact
