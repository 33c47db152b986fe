#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <map>
#include <vector>

#include "kdvact/hill.hpp"
#include "kdvact/potential.hpp"

namespace kdvact {

/// Quasimomentum height v(z + i0) profile of one gap under the substitution
/// z = m + rho sin(theta) with Gauss-Legendre nodes in theta. The cos(theta) Jacobian
/// absorbs the square-root vanishing of v at the edges and the inverse-square-root
/// blowup of v' in the Arnold integrand.
struct GapQuadrature {
  int n = 0;
  int node_count = 0;
  Eigen::ArrayXd z;          ///< node positions inside (z_n^-, z_n^+)
  Eigen::ArrayXd v;          ///< v(z + i0) >= 0
  Eigen::ArrayXd v_prime;    ///< v'(z) = (-1)^n Delta'(z) / sinh v (NaN where sinh v = 0)
  Eigen::ArrayXd excursion;  ///< (-1)^n Delta - 1 >= 0 at the nodes (clamped)
  Eigen::ArrayXd dz_weight;  ///< theta weight times rho cos(theta)
};

/// Node-set cache per (gap, doubling level), shared through BandGapSpectrum so the
/// per-gap discriminant evaluations are paid once across all moments. Not
/// synchronized: concurrent use of one spectrum needs external locking or
/// per-thread spectrum copies with distinct caches.
class ActionCache {
 public:
  const GapQuadrature& level(const BandGapSpectrum& spec, int n, int level_index);
  static int level_nodes(int level_index) { return 16 << level_index; }
  static constexpr int kMaxLevel = 6;  // 16 .. 1024 nodes

 private:
  std::map<std::pair<int, int>, GapQuadrature> sets_;
};

/// v(z + i0) = arccosh((-1)^n Delta(z^2)) on gap n; exactly 0 at the endpoints.
double v_on_gap(const Potential& q, const BandGapSpectrum& spec, int n, double z);

struct MomentResult {
  double value = 0;
  double err_estimate = 0;  ///< last node-doubling difference
  bool converged = true;
};

/// integral over gap n of z^p v(z)^m dz, p in {-1..4}, m in {1,3}, by theta-substitution
/// Gauss-Legendre with node doubling from K until successive values differ by less than
/// the spectrum's quad tolerance (cap 1024 nodes). Closed gap: 0.
MomentResult gap_moment_full(const Potential& q, const BandGapSpectrum& spec, int n, int p,
                             int m, int K);
double gap_moment(const Potential& q, const BandGapSpectrum& spec, int n, int p, int m, int K);

/// Action of gap n: I_n = (4/pi) integral of z v dz >= 0; 0 for closed gaps.
double action(const Potential& q, const BandGapSpectrum& spec, int n);

/// Independent action route: I_n = -(2/pi) integral of z^2 v'(z) dz with
/// v' = (-1)^n Delta'(z)/sinh v. Closed gap: 0 by convention.
double action_arnold(const Potential& q, const BandGapSpectrum& spec, int n, int K = 16);

/// V_n = (8/pi) integral of z v^3 dz >= 0; 0 for closed gaps.
double v_term(const Potential& q, const BandGapSpectrum& spec, int n);

/// Gap-integral moments and derived constants assembled with deterministic
/// compensated summation in ascending n.
struct ActionMomentSet {
  Eigen::VectorXd I;        ///< actions I_1..I_N
  Eigen::VectorXd V_terms;  ///< V_1..V_N
  double W = 0;             ///< sum (4 pi n) V_n
  double P_minus1 = 0, P_1 = 0, P_3 = 0;
  double Q0 = 0, Q2 = 0, Q4 = 0;
  double S_minus1 = 0, S_0 = 0, S_1 = 0;
  double h_inf = 0;   ///< max_n h_n
  double h_l2 = 0;    ///< (sum h_n^2)^{1/2}
  double rho_l2 = 0;  ///< (sum rho_n^2)^{1/2}
  double C0 = 1;      ///< cosh ||h||_inf
  double C_I = 1;     ///< 1 + sqrt(P_{-1})
  double C_minus = 1; ///< exp(sqrt(P_{-1}))
  double tail_rel = 0;
  bool quality_warning = false;  ///< some gap quadrature hit the node cap unconverged
  double i_norm_sq = 0;          ///< sum I_n^2
};

ActionMomentSet moments(const Potential& q, const BandGapSpectrum& spec);

/// k(z) for Im z >= 1 via the Cauchy representation over the gaps, with the symmetric
/// negative gaps folded in (v(-t) = v(t)). Rejects z within distance 0.5 of a gap and
/// spectra with tail_estimate >= 1e-6.
std::complex<double> quasimomentum_offaxis(const Potential& q, const BandGapSpectrum& spec,
                                           std::complex<double> z);

/// Large-height asymptotics along the imaginary axis: f(y) = y Im(k(iy) - iy)
/// = Q0 - Q2/y^2 + Q4/y^4 - ..., evaluated cancellation-free. Q0 by two-level
/// Richardson over the three heights, Q2 from the exactly determined fit
/// {1, 1/y^2, 1/y^4}.
struct OffaxisAsymptotics {
  double q0 = 0;
  double q2 = 0;
  std::array<double, 3> f = {0, 0, 0};
};

OffaxisAsymptotics offaxis_asymptotics(const Potential& q, const BandGapSpectrum& spec,
                                       std::array<double, 3> heights = {50.0, 100.0, 200.0});

/// (z, v) samples across all open gaps (plot data for the height profile); endpoints
/// included with v = 0 exactly.
struct ProfilePoint {
  int n = 0;
  double z = 0;
  double v = 0;
};

std::vector<ProfilePoint> gap_profile(const Potential& q, const BandGapSpectrum& spec,
                                      int samples_per_gap = 129);

}  // namespace kdvact
