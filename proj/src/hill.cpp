#include "kdvact/hill.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "kdvact/numerics.hpp"
#include "kdvact/ode.hpp"

namespace kdvact {

namespace {

// theta, theta', phi, phi' and their lambda-derivatives for -y'' + q y = lambda y.
struct HillRhs {
  const Potential* q;
  double lambda;

  void operator()(double x, const StateVec<8>& y, StateVec<8>& dy) const {
    const double w = (*q)(x)-lambda;
    dy[0] = y[1];
    dy[1] = w * y[0];
    dy[2] = y[3];
    dy[3] = w * y[2];
    dy[4] = y[5];
    dy[5] = w * y[4] - y[0];
    dy[6] = y[7];
    dy[7] = w * y[6] - y[2];
  }
};

// Reference fundamental pair at the anchor (4), the difference to the pair at lambda
// (4), and the lambda-derivative of the full pair (4). The difference W satisfies
// W'' = (q - lambda) W + (anchor - lambda) Yref, so its size is O(lambda - anchor)
// and its integration roundoff is relative, not absolute.
struct GapDifferenceRhs {
  const Potential* q;
  double lambda;
  double anchor;

  void operator()(double x, const StateVec<12>& u, StateVec<12>& du) const {
    const double qx = (*q)(x);
    const double wref = qx - anchor;
    const double w = qx - lambda;
    const double shift = anchor - lambda;
    du[0] = u[1];
    du[1] = wref * u[0];
    du[2] = u[3];
    du[3] = wref * u[2];
    du[4] = u[5];
    du[5] = w * u[4] + shift * u[0];
    du[6] = u[7];
    du[7] = w * u[6] + shift * u[2];
    du[8] = u[9];
    du[9] = w * u[8] - (u[0] + u[4]);
    du[10] = u[11];
    du[11] = w * u[10] - (u[2] + u[6]);
  }
};

StateVec<8> monodromy_initial_state() {
  StateVec<8> y = StateVec<8>::Zero();
  y[0] = 1.0;  // theta(0) = 1
  y[3] = 1.0;  // phi'(0) = 1
  return y;
}

LyapunovEval extract(const StateVec<8>& y) {
  return {0.5 * (y[0] + y[3]), 0.5 * (y[4] + y[7])};
}

}  // namespace

LyapunovEval lyapunov(const Potential& q, double lambda_unshifted, double tol) {
  if (!(tol >= 1e-14 && tol <= 1e-6)) {
    throw std::invalid_argument("lyapunov: tol must lie in [1e-14, 1e-6]");
  }
  HillRhs rhs{&q, lambda_unshifted};
  std::ostringstream ctx;
  ctx << "lyapunov at lambda = " << lambda_unshifted;
  const StateVec<8> y =
      integrate_adaptive<8>(rhs, monodromy_initial_state(), 0.0, 1.0, tol, ctx.str());
  return extract(y);
}

MonodromySession::MonodromySession(Potential q, double lambda_abs_max, double tol)
    : q_(std::move(q)) {
  const double zmax = std::sqrt(std::max(lambda_abs_max, 1.0));
  double coeff_mass = 0.0;
  for (int j = 0; j < q_.modes(); ++j) {
    coeff_mass += std::abs(q_.cos_coeffs[j]) + std::abs(q_.sin_coeffs[j]);
  }
  const double probes[3] = {lambda_abs_max, 0.437 * lambda_abs_max, -(10.0 + coeff_mass)};
  const double target = std::max(tol, 5e-15);

  int steps = std::max(96, static_cast<int>(std::ceil(6.0 * zmax)));
  LyapunovEval prev[3];
  for (int i = 0; i < 3; ++i) {
    HillRhs rhs{&q_, probes[i]};
    prev[i] = extract(integrate_fixed<8>(rhs, monodromy_initial_state(), 0.0, 1.0, steps));
  }
  while (true) {
    const int finer = 2 * steps;
    double worst = 0.0;
    LyapunovEval cur[3];
    for (int i = 0; i < 3; ++i) {
      HillRhs rhs{&q_, probes[i]};
      cur[i] = extract(integrate_fixed<8>(rhs, monodromy_initial_state(), 0.0, 1.0, finer));
      worst = std::max(worst,
                       std::abs(cur[i].delta - prev[i].delta) / std::max(1.0, std::abs(cur[i].delta)));
    }
    if (worst <= target) {
      steps_ = finer;
      noise_ = std::max(worst, 5e-16);
      return;
    }
    steps = finer;
    for (int i = 0; i < 3; ++i) prev[i] = cur[i];
    if (steps > (1 << 18)) {
      throw NumericalError("monodromy session: step doubling did not stabilize");
    }
  }
}

LyapunovEval MonodromySession::eval(double lambda_unshifted) const {
  HillRhs rhs{&q_, lambda_unshifted};
  return extract(integrate_fixed<8>(rhs, monodromy_initial_state(), 0.0, 1.0, steps_));
}

MonodromySession::GapEval MonodromySession::eval_gap(double lambda_unshifted,
                                                     double anchor_unshifted,
                                                     double parity) const {
  GapDifferenceRhs rhs{&q_, lambda_unshifted, anchor_unshifted};
  StateVec<12> u = StateVec<12>::Zero();
  u[0] = 1.0;  // theta_ref(0) = 1
  u[3] = 1.0;  // phi_ref'(0) = 1
  u = integrate_fixed<12>(rhs, u, 0.0, 1.0, steps_);
  GapEval out;
  out.excursion = parity * 0.5 * (u[4] + u[7]);
  out.ddelta_dlambda = 0.5 * (u[8] + u[11]);
  return out;
}

Eigen::VectorXd hill_matrix_eigenvalues(const Potential& q, Periodicity parity, int K) {
  const int m = q.modes();
  if (K < std::max(1, 4 * m)) {
    throw std::invalid_argument("hill_matrix_eigenvalues: truncation K must be >= 4M");
  }
  const int dim = 2 * K + 1;
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const int k = i - K;
    const double freq = (parity == Periodicity::periodic) ? 2.0 * M_PI * k : (2.0 * k + 1.0) * M_PI;
    H(i, i) = freq * freq;
  }
  const auto modes = complex_modes(q);
  for (int d = 1; d <= m; ++d) {
    for (int i = 0; i + d < dim; ++i) {
      H(i + d, i) = modes[d - 1];         // row frequency - column frequency = +d
      H(i, i + d) = std::conj(modes[d - 1]);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(H, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("hill_matrix_eigenvalues: eigensolve failed");
  }
  return solver.eigenvalues();
}

LyapunovEval BandGapSpectrum::delta_shifted(double lambda_shifted) const {
  return session->eval(lambda_shifted + mu0);
}

namespace {

struct EdgeSeeds {
  double mu0 = 0;
  // unshifted eigenvalue pairs per gap, 1-based in `lo[n-1], hi[n-1]`
  std::vector<double> lo, hi;
};

EdgeSeeds edge_seeds(const Potential& q, int gaps_needed) {
  const int m = q.modes();
  const int K = std::max({4 * m, (gaps_needed + 5) / 2 + 8, 16});
  const Eigen::VectorXd per = hill_matrix_eigenvalues(q, Periodicity::periodic, K);
  const Eigen::VectorXd anti = hill_matrix_eigenvalues(q, Periodicity::antiperiodic, K);
  EdgeSeeds s;
  s.mu0 = per[0];
  s.lo.resize(gaps_needed);
  s.hi.resize(gaps_needed);
  for (int n = 1; n <= gaps_needed; ++n) {
    if (n % 2 == 1) {
      const int k = (n - 1) / 2;
      s.lo[n - 1] = anti[2 * k];
      s.hi[n - 1] = anti[2 * k + 1];
    } else {
      const int k = n / 2;
      s.lo[n - 1] = per[2 * k - 1];
      s.hi[n - 1] = per[2 * k];
    }
  }
  return s;
}

double parity_sign(int n) { return (n % 2 == 0) ? 1.0 : -1.0; }

// P3 share of gap j from the small-gap action asymptotic I_j ~ |gamma_j|^2/(8 pi j).
double p3_share(int j, double gamma) {
  const double w = 2.0 * M_PI * j;
  return w * w * w * gamma * gamma / (8.0 * M_PI * j);
}

struct EdgeRefiner {
  const MonodromySession* session;

  double F(int n, double lambda) const {
    return parity_sign(n) * session->eval(lambda).delta - 1.0;
  }

  // Refines one edge of gap n on the bracket [outer (band side), inner (gap side)].
  double refine_edge(int n, double seed, double inner, double f_inner, double outer_start,
                     double max_span, bool left) {
    double d = std::abs(outer_start - seed);
    double outer = outer_start;
    double f_outer = F(n, outer);
    int tries = 0;
    while (f_outer >= 0.0 && tries < 6) {
      d = std::min(4.0 * d, max_span);
      outer = left ? seed - d : seed + d;
      f_outer = F(n, outer);
      ++tries;
    }
    if (f_outer >= 0.0) {
      std::ostringstream msg;
      msg << "band_edges: root not bracketed for gap " << n << " (" << (left ? "left" : "right")
          << " edge, seed " << seed << ", residual " << f_outer << ")";
      throw StructuralError(msg.str());
    }
    return find_root([&](double lam) { return F(n, lam); }, std::min(outer, inner),
                     std::max(outer, inner), left ? f_outer : f_inner,
                     left ? f_inner : f_outer)
        .x;
  }
};

}  // namespace

BandGapSpectrum band_edges(const Potential& q, const SpectrumOptions& options) {
  if (options.gap_count == 0 || options.gap_count < -1) {
    throw std::invalid_argument("band_edges: gap count must be >= 1 (or -1 for adaptive)");
  }
  const int m = q.modes();
  const bool adaptive = options.gap_count < 0;
  const int cap = adaptive ? options.max_gaps : options.gap_count;
  const int window = std::max(2, m);
  const int seeds_needed = cap + window + 1;

  const EdgeSeeds seeds = edge_seeds(q, seeds_needed);

  // Gap count selection: grow N until `window` consecutive upcoming gaps have a
  // negligible estimated P3 share.
  std::vector<double> share(seeds_needed + 1, 0.0);
  for (int j = 1; j <= seeds_needed; ++j) share[j] = p3_share(j, seeds.hi[j - 1] - seeds.lo[j - 1]);
  int N = adaptive ? std::min(cap, std::max({2 * m, 4, 1})) : cap;
  KahanSum p3_running;
  for (int j = 1; j <= N; ++j) p3_running.add(share[j]);
  if (adaptive) {
    while (N < cap) {
      bool tail_small = p3_running.value() > 0.0;
      for (int w = 1; w <= window && tail_small; ++w) {
        if (share[N + w] >= options.tail_rel_tol * p3_running.value()) tail_small = false;
      }
      if (tail_small || p3_running.value() == 0.0) break;
      ++N;
      p3_running.add(share[N]);
    }
  }

  // Frozen-grid session covering every lambda the refinement and the downstream gap
  // quadratures will request.
  const double lam_top = seeds.hi[N] + std::max(1.0, seeds.hi[N] - seeds.hi[N - 1 >= 0 ? N - 1 : 0]);
  auto session = std::make_shared<MonodromySession>(q, lam_top, options.ode_tol);
  EdgeRefiner refiner{session.get()};
  // Locked-gap threshold on the mid-gap excursion (-1)^n Delta - 1. Below ~5e6 eps
  // the excursion no longer supports the full dual-route quadrature precision (the
  // height profile carries v^2 ~ 2*excursion, so the roundoff of the difference
  // monodromy enters at the 1e-8 level), and near the evaluation noise the edge
  // roots cannot be bracketed at all. Such gaps keep the matrix-seed edges and are
  // handled by the small-gap asymptotics downstream.
  const double resolve_floor = std::max(1e-9, 30.0 * session->noise_estimate());

  // Ground periodic eigenvalue: Delta(mu0) = 1 with dDelta/dlambda != 0.
  double mu0 = seeds.mu0;
  {
    const double spacing = seeds.lo[0] - seeds.mu0;
    auto f0 = [&](double lam) { return session->eval(lam).delta - 1.0; };
    double d = 0.01 * spacing;
    double a = mu0 - d, b = mu0 + d;
    double fa = f0(a), fb = f0(b);
    int tries = 0;
    while ((fa <= 0.0 || fb >= 0.0) && tries < 6) {
      d = std::min(4.0 * d, 0.45 * spacing);
      a = mu0 - d;
      b = mu0 + d;
      fa = f0(a);
      fb = f0(b);
      ++tries;
    }
    if (fa > 0.0 && fb < 0.0) {
      const auto root = find_root(f0, a, b, fa, fb);
      const double predicted = session->noise_estimate() / std::max(root.slope, 1e-300);
      if (predicted <= 1e-11 * std::max(1.0, std::abs(root.x))) mu0 = root.x;
    }
    if (std::abs(mu0) < 1e-12) mu0 = 0.0;  // free-operator ground level
  }

  BandGapSpectrum spec;
  spec.q0 = std::max(0.0, -mu0);
  spec.mu0 = -spec.q0;
  spec.N = N;
  spec.options = options;
  spec.session = session;

  double prev_hi_unshifted = mu0;
  double prev_z_plus = 0.0;
  KahanSum locked_share;
  for (int n = 1; n <= N; ++n) {
    const double lo_seed = seeds.lo[n - 1];
    const double hi_seed = seeds.hi[n - 1];
    const double spacing_lo = lo_seed - prev_hi_unshifted;
    const double spacing_hi = seeds.lo[n] - hi_seed;
    const double gamma_seed = hi_seed - lo_seed;

    GapDescriptor gap;
    gap.n = n;
    double lo = lo_seed, hi = hi_seed;

    if (gamma_seed < options.closure_tol * std::max(1.0, std::abs(lo_seed))) {
      gap.closed = true;
      // Double eigenvalue: refine through the extremum of the discriminant.
      const double mid = 0.5 * (lo_seed + hi_seed);
      auto g = [&](double lam) { return parity_sign(n) * session->eval(lam).ddelta_dlambda; };
      double d = std::max(4.0 * gamma_seed, 1e-3 * std::min(spacing_lo, spacing_hi));
      double a = mid - d, b = mid + d;
      double ga = g(a), gb = g(b);
      int tries = 0;
      while ((ga <= 0.0 || gb >= 0.0) && tries < 6) {
        d = std::min(4.0 * d, 0.45 * std::min(spacing_lo, spacing_hi));
        a = mid - d;
        b = mid + d;
        ga = g(a);
        gb = g(b);
        ++tries;
      }
      if (ga > 0.0 && gb < 0.0) {
        const double root = find_root(g, a, b, ga, gb).x;
        lo = hi = root;
      } else {
        lo = hi = mid;
      }
    } else {
      const double mid = 0.5 * (lo_seed + hi_seed);
      const double f_mid = refiner.F(n, mid);
      if (f_mid <= resolve_floor) {
        // The gap is open by the eigenvalue splitting but below the discriminant's
        // resolution; the matrix seeds are the best available edges.
        gap.delta_refined = false;
        locked_share.add(share[n]);
      } else {
        const double left = refiner.refine_edge(n, lo_seed, mid, f_mid,
                                                lo_seed - 0.01 * spacing_lo, 0.45 * spacing_lo,
                                                /*left=*/true);
        double right = refiner.refine_edge(n, hi_seed, mid, f_mid,
                                           hi_seed + 0.01 * spacing_hi, 0.45 * spacing_hi,
                                           /*left=*/false);
        // Re-root the right edge on the difference excursion anchored at the left
        // edge: the height profile then vanishes at both substitution endpoints to
        // machine precision (the left endpoint is exact by construction).
        {
          const double parity = parity_sign(n);
          auto g = [&](double lam) {
            return session->eval_gap(lam, left, parity).excursion;
          };
          const double g_mid = g(mid);
          if (g_mid > 0.0) {
            double d = std::max(16.0 * (right - left) * 1e-8, 1e-4 * spacing_hi);
            double b = right + d;
            double gb = g(b);
            int tries = 0;
            while (gb >= 0.0 && tries < 6) {
              d = std::min(4.0 * d, 0.45 * spacing_hi);
              b = right + d;
              gb = g(b);
              ++tries;
            }
            if (gb < 0.0) right = find_root(g, mid, b, g_mid, gb).x;
          }
        }
        if (left > right) {
          std::ostringstream msg;
          msg << "band_edges: refined edges of gap " << n << " crossed (" << left << " > " << right
              << ")";
          throw StructuralError(msg.str());
        }
        lo = left;
        hi = right;
      }
    }

    gap.lambda_minus = lo - mu0;
    gap.lambda_plus = hi - mu0;
    if (gap.lambda_minus <= 0.0) {
      throw StructuralError("band_edges: first band collapsed after normalization");
    }
    gap.z_minus = std::sqrt(gap.lambda_minus);
    gap.z_plus = std::sqrt(gap.lambda_plus);
    gap.gamma_len = gap.lambda_plus - gap.lambda_minus;
    gap.g_len = gap.z_plus - gap.z_minus;
    gap.sigma_len = gap.z_minus - prev_z_plus;
    gap.rho = M_PI - gap.sigma_len;
    if (gap.rho < -1e-9) {
      std::ostringstream msg;
      msg << "band_edges: band " << n << " longer than pi in momentum (rho = " << gap.rho << ")";
      throw StructuralError(msg.str());
    }

    prev_hi_unshifted = hi;
    prev_z_plus = gap.z_plus;
    spec.edges.emplace_back(gap.lambda_minus, gap.lambda_plus);
    spec.gaps.push_back(gap);
  }

  // Interlacing and discriminant-value assertions on the emitted spectrum.
  for (int n = 1; n <= N; ++n) {
    const auto& g = spec.gaps[n - 1];
    if (g.lambda_minus > g.lambda_plus) {
      throw StructuralError("band_edges: interlacing violated inside gap " + std::to_string(n));
    }
    if (n > 1 && !(spec.gaps[n - 2].lambda_plus < g.lambda_minus)) {
      std::ostringstream msg;
      msg << "band_edges: interlacing violated between gaps " << n - 1 << " and " << n;
      throw StructuralError(msg.str());
    }
    const double tol_delta =
        std::max(1e-9, 100.0 * std::max(options.root_tol, session->noise_estimate()));
    for (const double lam : {g.lambda_minus, g.lambda_plus}) {
      const double f = parity_sign(n) * session->eval(lam + mu0).delta - 1.0;
      if (std::abs(f) > tol_delta) {
        std::ostringstream msg;
        msg << "band_edges: |Delta -+ 1| = " << std::abs(f) << " at an edge of gap " << n;
        throw StructuralError(msg.str());
      }
    }
  }

  // Critical points and heights. Locked gaps take the small-gap asymptotics
  // (semicircle profile): z_crit at the midpoint, h = |g|/2.
  for (auto& gap : spec.gaps) {
    if (gap.closed) {
      gap.z_crit = gap.z_minus;
      gap.h = 0.0;
      continue;
    }
    if (!gap.delta_refined) {
      gap.z_crit = 0.5 * (gap.z_minus + gap.z_plus);
      gap.h = 0.5 * gap.g_len;
      continue;
    }
    const auto [zc, h] = gap_critical_point(q, spec, gap.n);
    gap.z_crit = zc;
    gap.h = h;
  }

  // Gaps beyond N are missing outright; locked gaps inside N are completed by the
  // semicircle asymptotics downstream, so only their model error (conservatively
  // 1e-3 relative) contributes to the P3 uncertainty.
  const double denom = p3_running.value();
  spec.tail_estimate =
      denom > 0.0 ? (share[N + 1] + 1e-3 * locked_share.value()) / denom : 0.0;
  return spec;
}

BandGapSpectrum band_edges(const Potential& q, int gap_count, double tol) {
  SpectrumOptions opt;
  opt.gap_count = gap_count;
  opt.root_tol = tol;
  return band_edges(q, opt);
}

std::pair<double, double> gap_critical_point([[maybe_unused]] const Potential& q,
                                              const BandGapSpectrum& spec, int n) {
  if (n < 1 || n > spec.N) {
    throw std::invalid_argument("gap_critical_point: gap index out of range");
  }
  const GapDescriptor& gap = spec.gaps[n - 1];
  if (gap.closed) {
    throw std::invalid_argument("gap_critical_point: gap " + std::to_string(n) + " is closed");
  }
  const double sign = parity_sign(n);
  const double anchor = gap.lambda_minus + spec.mu0;
  auto slope = [&](double z) {
    return sign * 2.0 * z * spec.session->eval_gap(z * z + spec.mu0, anchor, sign).ddelta_dlambda;
  };
  auto height_at = [&](double z) {
    const double f = spec.session->eval_gap(z * z + spec.mu0, anchor, sign).excursion;
    return acosh1p(std::max(f, 0.0));
  };

  // dDelta/dz changes sign exactly once on an intact gap; more than one sign change
  // signals an edge-refinement error upstream. The scan reaches close to both edges
  // so a strongly off-center critical point is still bracketed.
  constexpr double kFractions[] = {0.002, 0.01, 0.05, 0.15, 0.3, 0.42, 0.5,
                                   0.58,  0.7,  0.85, 0.95, 0.99, 0.998};
  constexpr int kScan = static_cast<int>(std::size(kFractions));
  double zs[kScan], gs[kScan];
  int changes = 0;
  int change_at = -1;
  for (int i = 0; i < kScan; ++i) {
    zs[i] = gap.z_minus + kFractions[i] * (gap.z_plus - gap.z_minus);
    gs[i] = slope(zs[i]);
    if (i > 0 && (gs[i - 1] > 0.0) != (gs[i] > 0.0)) {
      ++changes;
      if (gs[i - 1] > 0.0) change_at = i;
    }
  }
  if (changes > 1) {
    throw StructuralError("gap_critical_point: multiple sign changes of dDelta/dz in gap " +
                          std::to_string(n) + " (edge refinement suspect)");
  }
  if (changes == 0 || change_at < 0) {
    if (!gap.delta_refined) {
      const double zc = 0.5 * (gap.z_minus + gap.z_plus);
      return {zc, height_at(zc)};
    }
    throw StructuralError("gap_critical_point: no interior critical point found in gap " +
                          std::to_string(n));
  }
  const auto root = find_root(slope, zs[change_at - 1], zs[change_at], gs[change_at - 1],
                              gs[change_at]);
  return {root.x, height_at(root.x)};
}

}  // namespace kdvact
