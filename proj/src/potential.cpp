#include "kdvact/potential.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "kdvact/numerics.hpp"

namespace kdvact {

namespace {

// Sums f(j) * cos(2 pi j x) + g(j) * sin(2 pi j x) terms through an angle-addition
// recurrence: one sincos for the base angle, multiplies for the harmonics.
template <class Term>
double harmonic_sum(int modes, double x, Term term) {
  const double phase = 2.0 * M_PI * (x - std::floor(x));
  const double c1 = std::cos(phase), s1 = std::sin(phase);
  double c = 1.0, s = 0.0;
  double sum = 0.0;
  for (int j = 1; j <= modes; ++j) {
    const double cn = c * c1 - s * s1;
    const double sn = s * c1 + c * s1;
    c = cn;
    s = sn;
    sum += term(j, c, s);
  }
  return sum;
}

}  // namespace

double Potential::operator()(double x) const {
  return harmonic_sum(modes(), x, [&](int j, double c, double s) {
    return cos_coeffs[j - 1] * c + sin_coeffs[j - 1] * s;
  });
}

double Potential::derivative(double x) const {
  return harmonic_sum(modes(), x, [&](int j, double c, double s) {
    const double w = 2.0 * M_PI * j;
    return w * (sin_coeffs[j - 1] * c - cos_coeffs[j - 1] * s);
  });
}

double Potential::second_derivative(double x) const {
  return harmonic_sum(modes(), x, [&](int j, double c, double s) {
    const double w2 = 4.0 * M_PI * M_PI * j * j;
    return -w2 * (cos_coeffs[j - 1] * c + sin_coeffs[j - 1] * s);
  });
}

Potential make_potential(const Eigen::VectorXd& cos_coeffs, const Eigen::VectorXd& sin_coeffs) {
  if (cos_coeffs.size() != sin_coeffs.size()) {
    throw std::invalid_argument("make_potential: cos/sin coefficient lists differ in length (" +
                                std::to_string(cos_coeffs.size()) + " vs " +
                                std::to_string(sin_coeffs.size()) + ")");
  }
  for (int j = 0; j < cos_coeffs.size(); ++j) {
    if (!std::isfinite(cos_coeffs[j])) {
      throw std::invalid_argument("make_potential: non-finite cos coefficient at mode " +
                                  std::to_string(j + 1));
    }
    if (!std::isfinite(sin_coeffs[j])) {
      throw std::invalid_argument("make_potential: non-finite sin coefficient at mode " +
                                  std::to_string(j + 1));
    }
  }
  int m = static_cast<int>(cos_coeffs.size());
  while (m > 0 && cos_coeffs[m - 1] == 0.0 && sin_coeffs[m - 1] == 0.0) --m;
  Potential q;
  q.cos_coeffs = cos_coeffs.head(m);
  q.sin_coeffs = sin_coeffs.head(m);
  return q;
}

Potential make_potential(std::initializer_list<double> cos_coeffs,
                         std::initializer_list<double> sin_coeffs) {
  Eigen::VectorXd a(static_cast<int>(cos_coeffs.size()));
  Eigen::VectorXd b(static_cast<int>(sin_coeffs.size()));
  int i = 0;
  for (double v : cos_coeffs) a[i++] = v;
  i = 0;
  for (double v : sin_coeffs) b[i++] = v;
  return make_potential(a, b);
}

Potential scaled(const Potential& q, double a) {
  return make_potential(a * q.cos_coeffs, a * q.sin_coeffs);
}

Potential combined(const Potential& qa, double a, const Potential& qb, double b) {
  const int m = std::max(qa.modes(), qb.modes());
  Eigen::VectorXd c = Eigen::VectorXd::Zero(m), s = Eigen::VectorXd::Zero(m);
  c.head(qa.modes()) = a * qa.cos_coeffs;
  s.head(qa.modes()) = a * qa.sin_coeffs;
  c.head(qb.modes()) += b * qb.cos_coeffs;
  s.head(qb.modes()) += b * qb.sin_coeffs;
  return make_potential(c, s);
}

Potential translated(const Potential& q, double shift) {
  const int m = q.modes();
  Eigen::VectorXd c(m), s(m);
  for (int j = 1; j <= m; ++j) {
    const double phase = 2.0 * M_PI * j * shift;
    const double cj = std::cos(phase), sj = std::sin(phase);
    c[j - 1] = q.cos_coeffs[j - 1] * cj + q.sin_coeffs[j - 1] * sj;
    s[j - 1] = q.sin_coeffs[j - 1] * cj - q.cos_coeffs[j - 1] * sj;
  }
  return make_potential(c, s);
}

std::vector<std::complex<double>> complex_modes(const Potential& q) {
  std::vector<std::complex<double>> modes(q.modes());
  for (int j = 0; j < q.modes(); ++j) {
    modes[j] = {0.5 * q.cos_coeffs[j], -0.5 * q.sin_coeffs[j]};
  }
  return modes;
}

namespace {

double quadratic_functional(const Potential& q, bool weight_by_frequency) {
  KahanSum sum;
  for (int j = 1; j <= q.modes(); ++j) {
    const double mag = q.cos_coeffs[j - 1] * q.cos_coeffs[j - 1] +
                       q.sin_coeffs[j - 1] * q.sin_coeffs[j - 1];
    const double w = weight_by_frequency ? (2.0 * M_PI * j) * (2.0 * M_PI * j) : 1.0;
    sum.add(0.5 * w * mag);
  }
  return sum.value();
}

// integral of q^3 over one period: sum of \hat q_j \hat q_k \hat q_l over j+k+l = 0.
double cubic_functional(const Potential& q) {
  const int m = q.modes();
  if (m == 0) return 0.0;
  const auto modes = complex_modes(q);
  auto mode_at = [&](int idx) -> std::complex<double> {
    if (idx > 0) return modes[idx - 1];
    return std::conj(modes[-idx - 1]);
  };
  KahanSum sum;
  for (int j = -m; j <= m; ++j) {
    if (j == 0) continue;
    for (int k = -m; k <= m; ++k) {
      if (k == 0) continue;
      const int l = -j - k;
      if (l == 0 || std::abs(l) > m) continue;
      sum.add((mode_at(j) * mode_at(k) * mode_at(l)).real());
    }
  }
  return sum.value();
}

double sup_norm(const Potential& q) {
  const int m = q.modes();
  if (m == 0) return 0.0;
  const int samples = std::max(256, 64 * m);
  double best = 0.0;
  std::vector<double> vals(samples);
  for (int i = 0; i < samples; ++i) vals[i] = q(static_cast<double>(i) / samples);
  for (int i = 0; i < samples; ++i) {
    const double prev = vals[(i + samples - 1) % samples];
    const double next = vals[(i + 1) % samples];
    const double here = vals[i];
    if (std::abs(here) < std::abs(prev) || std::abs(here) < std::abs(next)) continue;
    // Local peak of |q|: three Newton steps on q' toward the extremum.
    double z = static_cast<double>(i) / samples;
    for (int step = 0; step < 3; ++step) {
      const double d2 = q.second_derivative(z);
      if (std::abs(d2) < 1e-12) break;
      const double dz = -q.derivative(z) / d2;
      if (std::abs(dz) > 2.0 / samples) break;
      z += dz;
    }
    best = std::max({best, std::abs(here), std::abs(q(z))});
  }
  return best;
}

}  // namespace

DirectFunctionals direct_functionals(const Potential& q) {
  DirectFunctionals f;
  f.h1 = quadratic_functional(q, false);
  const double qprime_sq = quadratic_functional(q, true);
  f.h2 = 0.5 * (qprime_sq + 2.0 * cubic_functional(q));
  f.norm_q = std::sqrt(f.h1);
  f.norm_qprime = std::sqrt(qprime_sq);
  f.sup_q = sup_norm(q);
  return f;
}

double shifted_hamiltonian(const Potential& q, double c) {
  const double h1 = quadratic_functional(q, false);
  const double h2 = 0.5 * (quadratic_functional(q, true) + 2.0 * cubic_functional(q));
  return h2 + 3.0 * c * h1 + c * c * c;
}

double sobolev_minus1_norm(const Potential& q) {
  KahanSum sum;
  for (int j = 1; j <= q.modes(); ++j) {
    const double mag = q.cos_coeffs[j - 1] * q.cos_coeffs[j - 1] +
                       q.sin_coeffs[j - 1] * q.sin_coeffs[j - 1];
    const double w = 2.0 * M_PI * j;
    sum.add(mag / (w * w));
  }
  return std::sqrt(sum.value());
}

}  // namespace kdvact
