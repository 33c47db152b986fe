#include "kdvact/numerics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <utility>

namespace kdvact {

double acosh1p(double d) {
  if (d < 0) d = 0;
  if (d < 1e-4) {
    return std::sqrt(2.0 * d) * (1.0 - d / 12.0 + 3.0 * d * d / 160.0);
  }
  const double w = 1.0 + d;
  return std::log(w + std::sqrt(d * (d + 2.0)));
}

const GaussLegendre& gauss_legendre(int n) {
  static std::map<int, GaussLegendre> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussLegendre rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev-like initial guess, then Newton on the recurrence.
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = -p1 / pp;
      z += dz;
      if (std::abs(dz) < std::numeric_limits<double>::epsilon()) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  auto [pos, inserted] = cache.emplace(n, std::move(rule));
  return pos->second;
}

RootResult find_root(const std::function<double(double)>& f, double a, double b,
                     double fa, double fb) {
  if (a > b) {
    std::swap(a, b);
    std::swap(fa, fb);
  }
  if (fa == 0.0) return {a, 0.0, 0.0, 0};
  if (fb == 0.0) return {b, 0.0, 0.0, 0};
  if ((fa > 0) == (fb > 0)) {
    throw StructuralError("find_root: endpoints do not bracket a sign change");
  }

  RootResult res;
  double last_width = b - a;
  int stall = 0;
  for (int iter = 0; iter < 200; ++iter) {
    res.iterations = iter + 1;
    // Secant proposal, clamped into the open bracket; bisection when it stalls.
    double x = a - fa * (b - a) / (fb - fa);
    const double mid = 0.5 * (a + b);
    if (!(x > a && x < b) || stall >= 2) {
      x = mid;
      stall = 0;
    }
    if (x <= a || x >= b) break;  // bracket at adjacent doubles
    const double fx = f(x);
    if (fx == 0.0) {
      res.x = x;
      res.fx = 0.0;
      res.slope = std::abs(fb - fa) / (b - a);
      return res;
    }
    if ((fx > 0) == (fa > 0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
      fb = fx;
    }
    const double width = b - a;
    stall = (width > 0.5 * last_width) ? stall + 1 : 0;
    last_width = width;
  }
  res.slope = (b > a) ? std::abs(fb - fa) / (b - a) : 0.0;
  // Return the endpoint with the smaller residual.
  if (std::abs(fa) <= std::abs(fb)) {
    res.x = a;
    res.fx = fa;
  } else {
    res.x = b;
    res.fx = fb;
  }
  return res;
}

}  // namespace kdvact
