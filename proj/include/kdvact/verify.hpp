#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kdvact/actions.hpp"
#include "kdvact/hill.hpp"
#include "kdvact/potential.hpp"

namespace kdvact {

struct VerifyOptions {
  SpectrumOptions spectrum;
  double tail_tol = 1e-6;  ///< reliability gate on the spectrum tail estimate
};

struct IdentityEntry {
  std::string name;
  double lhs = 0;
  double rhs = 0;
  double rel_residual = 0;  ///< |lhs - rhs| / max(|lhs|, |rhs|, 1e-14)
  double tol = 0;
  bool pass = false;
  double tail_rel = 0;
};

struct IdentityReport {
  std::vector<IdentityEntry> entries;
  bool all_pass = true;
  bool reliable = true;  ///< false when the tail estimate exceeds the requested gate
  double tail_rel = 0;
};

/// Named identities between the direct Fourier-side functionals and the spectral
/// gap-sum side: the flagship H2 = P3 - W, the Parseval moment, the shift/momentum
/// chain and the shifted-Hamiltonian forms.
IdentityReport identity_report(const Potential& q, const VerifyOptions& options);

struct InequalityEntry {
  std::string name;
  double margin = 0;  ///< min over gaps for per-gap entries; rhs - lhs
  double scale = 1;   ///< size of the compared quantities at the minimum
  bool pass = false;
  int argmin_gap = 0;  ///< 0 for global entries
};

struct InequalityReport {
  std::vector<InequalityEntry> entries;
  std::map<std::string, std::vector<double>> per_gap;  ///< NaN where a gap is skipped
  std::vector<int> skipped_gaps;  ///< open gaps below the discriminant resolution
  bool all_pass = true;
};

/// Two-sided estimate battery over the computed spectrum: global bounds, the per-gap
/// local estimates, the height/band-sum bounds and the gradient-norm bounds. A margin
/// passes when it is >= -1e-10 times the scale of the compared quantities.
InequalityReport inequality_report(const Potential& q, const VerifyOptions& options);

struct ConvexityRow {
  double amplitude = 0;
  double i_norm_sq = 0;  ///< sum I_n^2
  double V = 0;          ///< W at this amplitude
  double ratio = 0;      ///< V / (3 sum I_n^2)
};

/// Scans a -> a * family and records the quadratic-normal-form ratio per amplitude.
/// Amplitudes must be positive and descending.
std::vector<ConvexityRow> quadratic_scan(const Potential& family,
                                         const std::vector<double>& amplitudes,
                                         const VerifyOptions& options);

struct HessianEstimate {
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
  Eigen::Vector2d eigenvalues = Eigen::Vector2d::Zero();
  bool positive_definite = false;
  double jacobian_cond = 0;
  double tail_fraction = 0;  ///< sum_{n>2} I_n / sum I_n at the stencil center
  double asymmetry = 0;      ///< relative asymmetry of the raw estimate
};

/// Central finite differences of W over a 3x3 stencil in the two family amplitudes,
/// pulled back through the (a,b) -> (I1,I2) Jacobian onto the dominant 2x2 action
/// block (with the gradient-times-curvature correction so the pullback is exact for
/// smooth compositions). Rejects Jacobians with condition number above 1e6.
HessianEstimate hessian_check(const Potential& family_a, const Potential& family_b, double a0,
                              double b0, double step, const VerifyOptions& options);

/// Fixed-seed pseudorandom corpus: trigonometric polynomials with mode count drawn
/// from {1..max_modes} and coefficients uniform in [-coeff_range, coeff_range]. The
/// generator is hand-rolled from splitmix64 so the corpus is identical across
/// platforms and standard libraries.
std::vector<Potential> corpus_potentials(std::uint64_t seed, int count = 10, int max_modes = 4,
                                         double coeff_range = 2.0);

/// The recorded corpus seed used by the acceptance battery.
inline constexpr std::uint64_t kCorpusSeed = 20170711u;

}  // namespace kdvact
