#include "kdvact/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "kdvact/numerics.hpp"

namespace kdvact {

namespace {

double rel_residual(double lhs, double rhs) {
  return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-14});
}

constexpr double kMarginSlack = 1e-10;

struct GapMargins {
  std::vector<double> margin;
  std::vector<double> scale;
};

}  // namespace

IdentityReport identity_report(const Potential& q, const VerifyOptions& options) {
  const DirectFunctionals df = direct_functionals(q);
  const BandGapSpectrum spec = band_edges(q, options.spectrum);
  const ActionMomentSet mom = moments(q, spec);

  IdentityReport rep;
  rep.tail_rel = spec.tail_estimate;
  rep.reliable = spec.tail_estimate <= options.tail_tol && !mom.quality_warning;

  auto add = [&](const std::string& name, double lhs, double rhs, double tol) {
    IdentityEntry e;
    e.name = name;
    e.lhs = lhs;
    e.rhs = rhs;
    e.rel_residual = rel_residual(lhs, rhs);
    e.tol = tol;
    e.pass = e.rel_residual < tol;
    e.tail_rel = spec.tail_estimate;
    rep.all_pass = rep.all_pass && e.pass;
    rep.entries.push_back(e);
  };

  add("H2=P3-W", df.h2, mom.P_3 - mom.W, 1e-6);
  add("P1=H1/2", mom.P_1, 0.5 * df.h1, 1e-6);
  add("q0=S-1", spec.q0, mom.S_minus1, 1e-5);
  add("q0=2Q0", spec.q0, 2.0 * mom.Q0, 1e-5);
  add("H1=8Q2-4Q0^2", df.h1, 8.0 * mom.Q2 - 4.0 * mom.Q0 * mom.Q0, 1e-5);
  add("2P1=4S0", 2.0 * mom.P_1, 4.0 * mom.S_0, 1e-5);
  add("H2=8(S1-S-1*S0)", df.h2, 8.0 * (mom.S_1 - mom.S_minus1 * mom.S_0), 1e-4);
  add("8Q2=H1+q0^2", 8.0 * mom.Q2, df.h1 + spec.q0 * spec.q0, 1e-5);
  add("16Q4=H2(q+q0)", 16.0 * mom.Q4, shifted_hamiltonian(q, spec.q0), 1e-4);
  add("S1+2Q0Q2=2Q4", mom.S_1 + 2.0 * mom.Q0 * mom.Q2, 2.0 * mom.Q4, 1e-4);
  return rep;
}

InequalityReport inequality_report(const Potential& q, const VerifyOptions& options) {
  const DirectFunctionals df = direct_functionals(q);
  const BandGapSpectrum spec = band_edges(q, options.spectrum);
  const ActionMomentSet mom = moments(q, spec);
  const int N = spec.N;

  InequalityReport rep;
  auto add_global = [&](const std::string& name, double lhs, double rhs,
                        bool advisory = false) {
    InequalityEntry e;
    e.name = name;
    e.margin = rhs - lhs;
    e.scale = std::max(std::abs(lhs), std::abs(rhs));
    // absolute floor forgives roundoff residue in comparisons that are 0 <= 0 exactly
    e.pass = e.margin >= -(kMarginSlack * e.scale + 1e-20);
    e.argmin_gap = 0;
    if (!advisory) rep.all_pass = rep.all_pass && e.pass;
    rep.entries.push_back(e);
  };

  std::map<std::string, GapMargins> per_gap;
  auto gap_bound = [&](const std::string& name, int n, double lhs, double rhs) {
    auto& gm = per_gap[name];
    if (gm.margin.empty()) {
      gm.margin.assign(N, std::numeric_limits<double>::quiet_NaN());
      gm.scale.assign(N, 1.0);
    }
    gm.margin[n - 1] = rhs - lhs;
    gm.scale[n - 1] = std::max(std::abs(lhs), std::abs(rhs));
  };

  const double i_l2 = std::sqrt(mom.i_norm_sq);

  // Global two-sided bounds on the nonlinear part.
  add_global("1.12.lower", 0.0, mom.W);
  add_global("1.12.upper", mom.W, 8.0 * mom.P_1 * mom.P_minus1);
  add_global("1.13.lower", (M_PI / 10.0) * mom.i_norm_sq / mom.C_I, mom.W);
  const double upper_core = 2048.0 * std::sqrt(mom.C_I) * mom.P_minus1 * mom.P_minus1;
  add_global("1.13.upper.verbatim", mom.W, (upper_core + 6.0 * M_PI * mom.C_minus * i_l2) * i_l2,
             /*advisory=*/true);
  const double c_safe = std::exp(std::sqrt(std::max(2.0 * mom.P_minus1, 0.0)));
  add_global("1.13.upper.safe", mom.W, (upper_core + 6.0 * M_PI * c_safe * i_l2) * i_l2);

  // Height and band-sum bounds.
  add_global("2.31.lower", (M_PI / 4.0) * mom.Q0, mom.h_l2 * mom.h_l2);
  add_global("2.31.upper", mom.h_l2 * mom.h_l2,
             0.5 * M_PI * M_PI * (1.0 + (std::sqrt(2.0) / M_PI) * std::sqrt(mom.Q0)) * mom.Q0);
  add_global("2.32", mom.rho_l2 * mom.rho_l2, 256.0 * mom.Q0);
  add_global("2.33.lower", 0.5 * mom.h_inf * mom.h_inf, mom.Q0);
  add_global("2.33.upper", mom.Q0, mom.P_minus1);
  {
    KahanSum weighted_gamma;
    for (const auto& gap : spec.gaps) weighted_gamma.add(gap.gamma_len / (2.0 * M_PI * gap.n));
    add_global("2.34", mom.h_inf, (4.0 / M_PI) * weighted_gamma.value());
  }
  {
    const double x = sobolev_minus1_norm(q);
    add_global("2.27.upper", mom.h_l2, 3.0 * x * (1.0 + 2.0 * x) * (1.0 + 2.0 * x));
  }

  // Gradient-norm bounds.
  const double qp2 = df.norm_qprime * df.norm_qprime;
  add_global("4.18", qp2, 4.0 * (mom.P_3 + 2.0 * mom.P_1 * mom.P_1));
  add_global("4.19", mom.P_3,
             0.5 * qp2 + (df.norm_qprime / std::sqrt(2.0)) * df.h1 +
                 2.0 * M_PI * std::pow(df.norm_q, 3.0) * (1.0 + std::cbrt(df.norm_q)));

  // Per-gap local estimates over open, discriminant-resolved gaps.
  KahanSum g_running;
  for (int n = 1; n <= N; ++n) {
    const GapDescriptor& gap = spec.gaps[n - 1];
    g_running.add(gap.g_len);
    if (gap.closed) continue;
    if (!gap.delta_refined) {
      rep.skipped_gaps.push_back(n);
      continue;
    }
    const double In = mom.I[n - 1];
    const double Vn = mom.V_terms[n - 1];
    const double h = gap.h;
    const double gamma = gap.gamma_len;
    const double glen = gap.g_len;
    const double zc = gap.z_crit;
    const double z0 = 0.5 * (gap.z_plus + gap.z_minus);
    const double pin = M_PI * n;

    gap_bound("2.11", n, glen, 2.0 * h);
    gap_bound("3.2.a", n, (2.0 / (3.0 * M_PI)) * h * gamma,
              (2.0 / (3.0 * M_PI)) * h * glen * (zc + gap.z_minus + gap.z_plus));
    gap_bound("3.2.b", n, (2.0 / (3.0 * M_PI)) * h * glen * (zc + gap.z_minus + gap.z_plus), In);
    gap_bound("3.2.c", n, In, (2.0 / M_PI) * h * gamma);
    gap_bound("3.3", n, gap.z_plus, pin + g_running.value());
    gap_bound("3.4", n, pin, 2.0 * gap.z_minus + mom.rho_l2 * mom.rho_l2 / M_PI);
    gap_bound("3.5.a", n, 2.0 * n, mom.C0 * gap.z_minus);
    gap_bound("3.5.b", n, h, 0.5 * std::sqrt(mom.C0) * glen);
    gap_bound("3.6", n, 2.0 * pin * h * h,
              std::sqrt(mom.C0) * 1.5 * M_PI * In + 2.0 * h * h * mom.rho_l2 * mom.rho_l2 / M_PI);
    gap_bound("3.7.lower", n, gamma / (4.0 * pin * mom.C_I), h);
    gap_bound("3.7.upper", n, h, std::pow(mom.C0, 1.5) * gamma / (8.0 * n));
    gap_bound("3.8.lower", n, gamma * gamma / (3.0 * M_PI * mom.C_I * 2.0 * pin), In);
    gap_bound("3.8.upper", n, In, std::pow(mom.C0, 1.5) * gamma * gamma / (4.0 * pin));
    gap_bound("3.9.lower", n, (8.0 / (3.0 * M_PI * M_PI)) * std::pow(mom.C0, -1.5) * 2.0 * pin * h * h,
              In);
    gap_bound("3.9.upper", n, In, 8.0 * n * mom.C_I * h * h);
    gap_bound("3.17.a", n, 0.2 * h * h * In, (2.0 / (5.0 * M_PI)) * h * h * h * gamma);
    gap_bound("3.17.b", n, (2.0 / (5.0 * M_PI)) * h * h * h * gamma,
              (2.0 / (5.0 * M_PI)) * h * h * h * glen * (3.0 * zc + 2.0 * z0));
    gap_bound("3.17.c", n, (2.0 / (5.0 * M_PI)) * h * h * h * glen * (3.0 * zc + 2.0 * z0), Vn);
    gap_bound("3.17.d", n, Vn, 2.0 * h * h * In);

    // Pointwise comparison profile: v >= sqrt((z - z^-)(z^+ - z)) at the nodes,
    // tested one-sided since the two sides coincide to rounding on small gaps.
    {
      if (!spec.cache) spec.cache = std::make_shared<ActionCache>();
      const GapQuadrature& set = spec.cache->level(spec, n, 2);
      double worst = std::numeric_limits<double>::infinity();
      for (int i = 0; i < set.node_count; ++i) {
        const double vband =
            std::sqrt(std::max((set.z[i] - gap.z_minus) * (gap.z_plus - set.z[i]), 0.0));
        worst = std::min(worst, set.v[i] - vband);
      }
      auto& gm = per_gap["2.10"];
      if (gm.margin.empty()) {
        gm.margin.assign(N, std::numeric_limits<double>::quiet_NaN());
        gm.scale.assign(N, 1.0);
      }
      gm.margin[n - 1] = worst;
      gm.scale[n - 1] = std::max(h, 1e-30);
    }
  }

  for (auto& [name, gm] : per_gap) {
    InequalityEntry e;
    e.name = name;
    e.pass = true;
    double worst_norm = std::numeric_limits<double>::infinity();
    bool any = false;
    for (int i = 0; i < N; ++i) {
      if (std::isnan(gm.margin[i])) continue;
      any = true;
      const double scale = std::max(gm.scale[i], 1e-30);
      if (gm.margin[i] < -(kMarginSlack * scale + 1e-20)) e.pass = false;
      const double norm = gm.margin[i] / scale;
      if (norm < worst_norm) {
        worst_norm = norm;
        e.margin = gm.margin[i];
        e.scale = gm.scale[i];
        e.argmin_gap = i + 1;
      }
    }
    if (!any) {
      e.margin = 0.0;
      e.scale = 1.0;
      e.argmin_gap = 0;
    }
    rep.all_pass = rep.all_pass && e.pass;
    rep.entries.push_back(e);
    rep.per_gap[name] = gm.margin;
  }
  std::sort(rep.entries.begin(), rep.entries.end(),
            [](const InequalityEntry& a, const InequalityEntry& b) { return a.name < b.name; });
  return rep;
}

std::vector<ConvexityRow> quadratic_scan(const Potential& family,
                                         const std::vector<double>& amplitudes,
                                         const VerifyOptions& options) {
  if (amplitudes.empty()) throw std::invalid_argument("quadratic_scan: no amplitudes");
  for (size_t i = 0; i < amplitudes.size(); ++i) {
    if (!(amplitudes[i] > 0.0)) {
      throw std::invalid_argument("quadratic_scan: amplitudes must be positive");
    }
    if (i > 0 && !(amplitudes[i] < amplitudes[i - 1])) {
      throw std::invalid_argument("quadratic_scan: amplitudes must be descending");
    }
  }
  std::vector<ConvexityRow> rows;
  for (const double a : amplitudes) {
    const Potential qa = scaled(family, a);
    const BandGapSpectrum spec = band_edges(qa, options.spectrum);
    const ActionMomentSet mom = moments(qa, spec);
    ConvexityRow row;
    row.amplitude = a;
    row.i_norm_sq = mom.i_norm_sq;
    row.V = mom.W;
    row.ratio = mom.i_norm_sq > 0.0 ? mom.W / (3.0 * mom.i_norm_sq) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

HessianEstimate hessian_check(const Potential& family_a, const Potential& family_b, double a0,
                              double b0, double step, const VerifyOptions& options) {
  if (!(step > 0.0)) throw std::invalid_argument("hessian_check: step must be positive");

  double W[3][3], I1[3][3], I2[3][3];
  double tail_fraction = 0.0;
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      const Potential q = combined(family_a, a0 + i * step, family_b, b0 + j * step);
      const BandGapSpectrum spec = band_edges(q, options.spectrum);
      const ActionMomentSet mom = moments(q, spec);
      W[i + 1][j + 1] = mom.W;
      I1[i + 1][j + 1] = mom.I.size() >= 1 ? mom.I[0] : 0.0;
      I2[i + 1][j + 1] = mom.I.size() >= 2 ? mom.I[1] : 0.0;
      if (i == 0 && j == 0) {
        const double total = mom.I.sum();
        const double head = I1[1][1] + I2[1][1];
        tail_fraction = total > 0.0 ? std::max(0.0, (total - head) / total) : 0.0;
      }
    }
  }

  auto d_a = [&](double f[3][3]) { return (f[2][1] - f[0][1]) / (2.0 * step); };
  auto d_b = [&](double f[3][3]) { return (f[1][2] - f[1][0]) / (2.0 * step); };
  auto d_aa = [&](double f[3][3]) { return (f[2][1] - 2.0 * f[1][1] + f[0][1]) / (step * step); };
  auto d_bb = [&](double f[3][3]) { return (f[1][2] - 2.0 * f[1][1] + f[1][0]) / (step * step); };
  auto d_ab = [&](double f[3][3]) {
    return (f[2][2] - f[2][0] - f[0][2] + f[0][0]) / (4.0 * step * step);
  };

  Eigen::Matrix2d J;
  J << d_a(I1), d_b(I1), d_a(I2), d_b(I2);
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(J);
  const double cond = svd.singularValues()(0) / std::max(svd.singularValues()(1), 1e-300);
  if (cond > 1e6) {
    std::ostringstream msg;
    msg << "hessian_check: (a,b) -> (I1,I2) Jacobian condition number " << cond << " exceeds 1e6";
    throw NumericalError(msg.str());
  }

  Eigen::Matrix2d Hw, H1, H2;
  Hw << d_aa(W), d_ab(W), d_ab(W), d_bb(W);
  H1 << d_aa(I1), d_ab(I1), d_ab(I1), d_bb(I1);
  H2 << d_aa(I2), d_ab(I2), d_ab(I2), d_bb(I2);

  const Eigen::Matrix2d Jinv = J.inverse();
  const Eigen::Vector2d grad_w(d_a(W), d_b(W));
  const Eigen::Vector2d g = Jinv.transpose() * grad_w;  // dV/dI on the dominant block
  const Eigen::Matrix2d core = Hw - g(0) * H1 - g(1) * H2;
  const Eigen::Matrix2d raw = Jinv.transpose() * core * Jinv;

  HessianEstimate est;
  est.hessian = 0.5 * (raw + raw.transpose());
  est.asymmetry = std::abs(raw(0, 1) - raw(1, 0)) /
                  std::max({std::abs(raw(0, 1)), std::abs(raw(1, 0)), 1e-30});
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(est.hessian);
  est.eigenvalues = es.eigenvalues();
  est.positive_definite = est.eigenvalues.minCoeff() > 0.0;
  est.jacobian_cond = cond;
  est.tail_fraction = tail_fraction;
  return est;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<Potential> corpus_potentials(std::uint64_t seed, int count, int max_modes,
                                         double coeff_range) {
  if (count < 1 || max_modes < 1 || !(coeff_range > 0.0)) {
    throw std::invalid_argument("corpus_potentials: bad corpus parameters");
  }
  std::uint64_t state = seed;
  std::vector<Potential> corpus;
  corpus.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int m = 1 + static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(max_modes));
    Eigen::VectorXd a(m), b(m);
    for (int j = 0; j < m; ++j) {
      a[j] = (2.0 * uniform01(state) - 1.0) * coeff_range;
      b[j] = (2.0 * uniform01(state) - 1.0) * coeff_range;
    }
    corpus.push_back(make_potential(a, b));
  }
  return corpus;
}

}  // namespace kdvact
