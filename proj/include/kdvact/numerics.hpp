#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace kdvact {

/// Violation of a structural guarantee of the pipeline (interlacing, bracketing,
/// sign patterns of the discriminant). Indicates corrupted upstream data, not bad input.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure of an iterative numerical process (step-size underflow, eigensolver breakdown).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Compensated (Kahan) accumulator. Summation order is fixed by the caller, so results
/// are independent of how the surrounding work is scheduled.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// arccosh(1 + d) for d >= 0 without cancellation: series sqrt(2d)(1 - d/12 + 3d^2/160)
/// below d = 1e-4, the log form above.
double acosh1p(double d);

/// sinh(arccosh(1 + d)) = sqrt(d (d + 2)) for d >= 0.
inline double sinh_acosh1p(double d) { return std::sqrt(d * (d + 2.0)); }

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  Eigen::ArrayXd nodes;
  Eigen::ArrayXd weights;
};

/// Nodes and weights for an n-point rule, computed by Newton iteration on the Legendre
/// recurrence and cached per n.
const GaussLegendre& gauss_legendre(int n);

struct RootResult {
  double x = 0;           ///< refined root
  double fx = 0;          ///< residual at x
  double slope = 0;       ///< |f| slope estimate near the root
  int iterations = 0;
};

/// Safeguarded secant/bisection on a bracketed sign change. Refines until the bracket
/// collapses to adjacent doubles, so the result is limited only by the smoothness of f.
/// Requires fa * fb <= 0.
RootResult find_root(const std::function<double(double)>& f, double a, double b,
                     double fa, double fb);

}  // namespace kdvact
