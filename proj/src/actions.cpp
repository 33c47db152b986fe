#include "kdvact/actions.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "kdvact/numerics.hpp"

namespace kdvact {

namespace {

double parity_sign(int n) { return (n % 2 == 0) ? 1.0 : -1.0; }

const GapDescriptor& checked_gap(const BandGapSpectrum& spec, int n) {
  if (n < 1 || n > spec.N) {
    throw std::invalid_argument("gap index " + std::to_string(n) + " out of range [1, " +
                                std::to_string(spec.N) + "]");
  }
  return spec.gaps[n - 1];
}

ActionCache& cache_of(const BandGapSpectrum& spec) {
  if (!spec.cache) spec.cache = std::make_shared<ActionCache>();
  return *spec.cache;
}

}  // namespace

const GapQuadrature& ActionCache::level(const BandGapSpectrum& spec, int n, int level_index) {
  const auto key = std::make_pair(n, level_index);
  auto it = sets_.find(key);
  if (it != sets_.end()) return it->second;

  const GapDescriptor& gap = spec.gaps[n - 1];
  const int count = level_nodes(level_index);
  const GaussLegendre& rule = gauss_legendre(count);
  const double mid = 0.5 * (gap.z_minus + gap.z_plus);
  const double rho = 0.5 * (gap.z_plus - gap.z_minus);
  const double sign = parity_sign(n);
  const double anchor = gap.lambda_minus + spec.mu0;
  const double mid_excursion =
      std::max(spec.session->eval_gap(mid * mid + spec.mu0, anchor, sign).excursion, 0.0);
  const double interior_tol = std::max(1e-13, 1e-3 * mid_excursion);

  GapQuadrature set;
  set.n = n;
  set.node_count = count;
  set.z.resize(count);
  set.v.resize(count);
  set.v_prime.resize(count);
  set.excursion.resize(count);
  set.dz_weight.resize(count);
  for (int i = 0; i < count; ++i) {
    const double theta = 0.5 * M_PI * rule.nodes[i];
    const double z = mid + rho * std::sin(theta);
    const MonodromySession::GapEval ev = spec.session->eval_gap(z * z + spec.mu0, anchor, sign);
    const double d = ev.excursion;
    if (d < -interior_tol && std::abs(rule.nodes[i]) < 0.9) {
      std::ostringstream msg;
      msg << "gap quadrature: (-1)^n Delta < 1 strictly inside gap " << n << " at z = " << z
          << " (edge mislocation)";
      throw StructuralError(msg.str());
    }
    const double dpos = std::max(d, 0.0);
    const double sinh_v = sinh_acosh1p(dpos);
    const double dslope = sign * 2.0 * z * ev.ddelta_dlambda;
    set.z[i] = z;
    set.v[i] = acosh1p(dpos);
    set.v_prime[i] = sinh_v > 0.0 ? dslope / sinh_v : std::numeric_limits<double>::quiet_NaN();
    set.excursion[i] = dpos;
    set.dz_weight[i] = rule.weights[i] * 0.5 * M_PI * rho * std::cos(theta);
  }
  auto [pos, inserted] = sets_.emplace(key, std::move(set));
  return pos->second;
}

double v_on_gap(const Potential& q, const BandGapSpectrum& spec, int n, double z) {
  (void)q;
  const GapDescriptor& gap = checked_gap(spec, n);
  if (gap.closed) {
    throw std::invalid_argument("v_on_gap: gap " + std::to_string(n) + " is closed");
  }
  if (!(z >= gap.z_minus && z <= gap.z_plus)) {
    throw std::invalid_argument("v_on_gap: z outside the gap");
  }
  if (z == gap.z_minus || z == gap.z_plus) return 0.0;
  const double sign = parity_sign(n);
  const double anchor = gap.lambda_minus + spec.mu0;
  const double d = spec.session->eval_gap(z * z + spec.mu0, anchor, sign).excursion;
  const double mislocation_tol = std::max(1e-13, 30.0 * spec.session->noise_estimate());
  const double edge_dist = std::min(z - gap.z_minus, gap.z_plus - z);
  if (d < -mislocation_tol && edge_dist > 0.05 * gap.g_len) {
    throw StructuralError("v_on_gap: (-1)^n Delta < 1 inside gap " + std::to_string(n) +
                          " (edge mislocation)");
  }
  return acosh1p(std::max(d, 0.0));
}

namespace {

enum class Integrand { moment, arnold };

// Node-doubling ladder over the cached quadrature sets. `p` and `m` describe
// z^p v^m for moments; the Arnold integrand is (z^2 - mid^2) v' (the constant shift is
// legal since the integral of v' over the gap vanishes, and it removes the
// large-symmetric-halves cancellation on narrow gaps).
//
// Each level also accumulates the sensitivity of the sum to the roundoff of the
// discriminant evaluation: d f / d excursion ~ f * fac / (2 excursion) with fac = m for
// the v^m integrands and 1 for the Arnold one. Once the level-to-level difference sits
// below eps * sensitivity, finer nodes only sample the roundoff skirt of v near the
// edges and drift away from the limit, so the coarser value is returned as the best
// available one.
MomentResult ladder(const BandGapSpectrum& spec, int n, Integrand kind, int p, int m,
                    int K) {
  ActionCache& cache = cache_of(spec);
  int start_level = 0;
  while (ActionCache::level_nodes(start_level) < K && start_level < ActionCache::kMaxLevel) {
    ++start_level;
  }
  const double quad_tol = spec.options.quad_tol;
  const GapDescriptor& gap = spec.gaps[n - 1];
  const double mid = 0.5 * (gap.z_minus + gap.z_plus);
  constexpr double kEps = 2.22e-16;
  const double sens_fac = (kind == Integrand::moment) ? static_cast<double>(m) : 1.0;

  MomentResult res;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int lev = start_level; lev <= ActionCache::kMaxLevel; ++lev) {
    const GapQuadrature& set = cache.level(spec, n, lev);
    KahanSum sum;
    double sens = 0.0;
    for (int i = 0; i < set.node_count; ++i) {
      double f;
      if (kind == Integrand::moment) {
        const double v = set.v[i];
        if (v == 0.0) continue;
        const double vm = (m == 1) ? v : v * v * v;
        f = std::pow(set.z[i], p) * vm;
      } else {
        const double vp = set.v_prime[i];
        if (std::isnan(vp)) {
          if (std::abs(set.z[i] - mid) < 0.4 * gap.g_len) {
            throw StructuralError("action_arnold: sinh v underflow away from the endpoints of gap " +
                                  std::to_string(n));
          }
          continue;
        }
        f = (set.z[i] * set.z[i] - mid * mid) * vp;
      }
      const double contribution = f * set.dz_weight[i];
      sum.add(contribution);
      sens += std::abs(contribution) * sens_fac / (2.0 * std::max(set.excursion[i], 0.25 * kEps));
    }
    const double value = sum.value();
    if (!std::isnan(prev)) {
      const double diff = std::abs(value - prev);
      if (diff <= quad_tol * std::max(std::abs(value), 1e-30)) {
        res.value = value;
        res.err_estimate = diff;
        res.converged = true;
        return res;
      }
      if (diff <= 2.0 * kEps * sens) {
        res.value = prev;  // noise-limited: the coarser level samples the skirt least
        res.err_estimate = diff;
        res.converged = true;
        return res;
      }
      res.err_estimate = diff;
    }
    prev = value;
    res.value = value;
  }
  res.converged = false;
  return res;
}

}  // namespace

MomentResult gap_moment_full(const Potential& q, const BandGapSpectrum& spec, int n, int p,
                             int m, int K) {
  (void)q;
  if (K < 16) throw std::invalid_argument("gap_moment: node count K must be >= 16");
  if (m != 1 && m != 3) throw std::invalid_argument("gap_moment: m must be 1 or 3");
  if (p < -1 || p > 4) throw std::invalid_argument("gap_moment: p must lie in {-1..4}");
  const GapDescriptor& gap = checked_gap(spec, n);
  if (gap.closed) return {0.0, 0.0, true};
  return ladder(spec, n, Integrand::moment, p, m, K);
}

double gap_moment(const Potential& q, const BandGapSpectrum& spec, int n, int p, int m, int K) {
  return gap_moment_full(q, spec, n, p, m, K).value;
}

double action(const Potential& q, const BandGapSpectrum& spec, int n) {
  const GapDescriptor& gap = checked_gap(spec, n);
  if (gap.closed) return 0.0;
  return (4.0 / M_PI) * gap_moment_full(q, spec, n, 1, 1, 16).value;
}

double action_arnold(const Potential& q, const BandGapSpectrum& spec, int n, int K) {
  (void)q;
  if (K < 16) K = 16;
  const GapDescriptor& gap = checked_gap(spec, n);
  if (gap.closed) return 0.0;
  const MomentResult r = ladder(spec, n, Integrand::arnold, 0, 0, K);
  return -(2.0 / M_PI) * r.value;
}

double v_term(const Potential& q, const BandGapSpectrum& spec, int n) {
  const GapDescriptor& gap = checked_gap(spec, n);
  if (gap.closed) return 0.0;
  return (8.0 / M_PI) * gap_moment_full(q, spec, n, 1, 3, 16).value;
}

ActionMomentSet moments(const Potential& q, const BandGapSpectrum& spec) {
  const int N = spec.N;
  ActionMomentSet out;
  out.I = Eigen::VectorXd::Zero(N);
  out.V_terms = Eigen::VectorXd::Zero(N);
  out.tail_rel = spec.tail_estimate;

  // Per-gap base moments; everything else is an ascending compensated reduction.
  KahanSum p1, p3, pm1, q0s, q2s, q4s, sm1, s1, w, h2sum, rho2sum, inorm;
  for (int n = 1; n <= N; ++n) {
    const GapDescriptor& gap = spec.gaps[n - 1];
    double m_p[6] = {0, 0, 0, 0, 0, 0};  // p = -1..4 of z^p v
    double m13 = 0;                      // z v^3
    if (!gap.closed && gap.delta_refined) {
      for (int p = -1; p <= 4; ++p) {
        const MomentResult r = gap_moment_full(q, spec, n, p, 1, 16);
        if (!r.converged && r.err_estimate > 1e-3 * std::max(std::abs(r.value), 1e-30)) {
          out.quality_warning = true;
        }
        m_p[p + 1] = r.value;
      }
      const MomentResult r3 = gap_moment_full(q, spec, n, 1, 3, 16);
      if (!r3.converged && r3.err_estimate > 1e-3 * std::max(std::abs(r3.value), 1e-30)) {
        out.quality_warning = true;
      }
      m13 = r3.value;
    } else if (!gap.closed) {
      // Locked gap: the height profile sits below the discriminant resolution.
      // Complete the sums with the semicircle asymptotic v ~ sqrt((z-z^-)(z^+-z)),
      // exact in the vanishing-gap limit.
      const double zm = 0.5 * (gap.z_minus + gap.z_plus);
      const double rho_half = 0.5 * gap.g_len;
      const double area = 0.5 * M_PI * rho_half * rho_half;  // integral of v
      for (int p = -1; p <= 4; ++p) m_p[p + 1] = std::pow(zm, p) * area;
      m13 = zm * (3.0 * M_PI / 8.0) * std::pow(rho_half, 4.0);
    }
    const double In = (4.0 / M_PI) * m_p[2];
    const double Vn = (8.0 / M_PI) * m13;
    out.I[n - 1] = In;
    out.V_terms[n - 1] = Vn;

    const double two_pi_n = 2.0 * M_PI * n;
    p1.add(two_pi_n * In);
    p3.add(two_pi_n * two_pi_n * two_pi_n * In);
    pm1.add(In / two_pi_n);
    w.add(4.0 * M_PI * n * Vn);
    q0s.add(m_p[1]);
    q2s.add(m_p[3]);
    q4s.add(m_p[5]);
    sm1.add(n * m_p[0]);
    s1.add(n * m_p[4]);
    inorm.add(In * In);
    h2sum.add(gap.h * gap.h);
    rho2sum.add(gap.rho * gap.rho);
    out.h_inf = std::max(out.h_inf, gap.h);
  }
  out.P_1 = p1.value();
  out.P_3 = p3.value();
  out.P_minus1 = pm1.value();
  out.W = w.value();
  out.Q0 = (2.0 / M_PI) * q0s.value();
  out.Q2 = (2.0 / M_PI) * q2s.value();
  out.Q4 = (2.0 / M_PI) * q4s.value();
  out.S_minus1 = 4.0 * sm1.value();
  out.S_0 = out.P_1 / 2.0;  // same weighted sum of the z v gap moments
  out.S_1 = 4.0 * s1.value();
  out.h_l2 = std::sqrt(h2sum.value());
  out.rho_l2 = std::sqrt(rho2sum.value());
  out.C0 = std::cosh(out.h_inf);
  out.C_I = 1.0 + std::sqrt(std::max(out.P_minus1, 0.0));
  out.C_minus = std::exp(std::sqrt(std::max(out.P_minus1, 0.0)));
  out.i_norm_sq = inorm.value();
  return out;
}

std::complex<double> quasimomentum_offaxis(const Potential& q, const BandGapSpectrum& spec,
                                           std::complex<double> z) {
  (void)q;
  if (!(z.imag() >= 1.0)) {
    throw std::invalid_argument("quasimomentum_offaxis: requires Im z >= 1");
  }
  if (!(spec.tail_estimate < 1e-6)) {
    throw std::invalid_argument("quasimomentum_offaxis: spectrum tail too large");
  }
  for (const auto& gap : spec.gaps) {
    for (double s : {1.0, -1.0}) {
      const double lo = s > 0 ? gap.z_minus : -gap.z_plus;
      const double hi = s > 0 ? gap.z_plus : -gap.z_minus;
      const double x = std::clamp(z.real(), lo, hi);
      if (std::abs(z - std::complex<double>(x, 0.0)) < 0.5) {
        throw std::invalid_argument("quasimomentum_offaxis: z within 0.5 of a gap");
      }
    }
  }

  ActionCache& cache = cache_of(spec);
  std::complex<double> correction(0.0, 0.0);
  for (int n = 1; n <= spec.N; ++n) {
    const GapDescriptor& gap = spec.gaps[n - 1];
    if (gap.closed || !gap.delta_refined) continue;
    std::complex<double> prev(std::numeric_limits<double>::quiet_NaN(), 0.0);
    for (int lev = 0; lev <= ActionCache::kMaxLevel; ++lev) {
      const GapQuadrature& set = cache.level(spec, n, lev);
      std::complex<double> sum(0.0, 0.0);
      for (int i = 0; i < set.node_count; ++i) {
        const double t = set.z[i];
        // fold of the mirrored gap: 1/(t - z) - 1/(t + z) = 2z/(t^2 - z^2)
        sum += set.dz_weight[i] * set.v[i] * (2.0 * z / (t * t - z * z));
      }
      if (!std::isnan(prev.real()) &&
          std::abs(sum - prev) <= spec.options.quad_tol * std::max(std::abs(sum), 1e-30)) {
        prev = sum;
        break;
      }
      prev = sum;
    }
    correction += prev;
  }
  return z + correction / M_PI;
}

OffaxisAsymptotics offaxis_asymptotics(const Potential& q, const BandGapSpectrum& spec,
                                       std::array<double, 3> heights) {
  OffaxisAsymptotics out;
  for (int i = 0; i < 3; ++i) {
    const double y = heights[i];
    const std::complex<double> k = quasimomentum_offaxis(q, spec, {0.0, y});
    out.f[i] = y * (k.imag() - y);
  }
  // Richardson assuming height doubling: eliminates 1/y^2 then 1/y^4.
  const double r1a = (4.0 * out.f[1] - out.f[0]) / 3.0;
  const double r1b = (4.0 * out.f[2] - out.f[1]) / 3.0;
  out.q0 = (16.0 * r1b - r1a) / 15.0;

  Eigen::Matrix3d vand;
  Eigen::Vector3d rhs;
  for (int i = 0; i < 3; ++i) {
    const double x = 1.0 / (heights[i] * heights[i]);
    vand(i, 0) = 1.0;
    vand(i, 1) = x;
    vand(i, 2) = x * x;
    rhs[i] = out.f[i];
  }
  const Eigen::Vector3d coef = vand.fullPivLu().solve(rhs);
  out.q2 = -coef[1];
  return out;
}

std::vector<ProfilePoint> gap_profile(const Potential& q, const BandGapSpectrum& spec,
                                      int samples_per_gap) {
  if (samples_per_gap < 3) samples_per_gap = 3;
  std::vector<ProfilePoint> points;
  for (int n = 1; n <= spec.N; ++n) {
    const GapDescriptor& gap = spec.gaps[n - 1];
    if (gap.closed) continue;
    const double mid = 0.5 * (gap.z_minus + gap.z_plus);
    const double rho = 0.5 * (gap.z_plus - gap.z_minus);
    for (int i = 0; i < samples_per_gap; ++i) {
      const double theta = -0.5 * M_PI + M_PI * i / (samples_per_gap - 1);
      ProfilePoint pt;
      pt.n = n;
      if (i == 0) {
        pt.z = gap.z_minus;
        pt.v = 0.0;
      } else if (i == samples_per_gap - 1) {
        pt.z = gap.z_plus;
        pt.v = 0.0;
      } else {
        pt.z = mid + rho * std::sin(theta);
        pt.v = v_on_gap(q, spec, n, pt.z);
      }
      points.push_back(pt);
    }
  }
  return points;
}

}  // namespace kdvact
