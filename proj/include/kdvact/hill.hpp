#pragma once

#include <Eigen/Dense>

#include <memory>
#include <utility>
#include <vector>

#include "kdvact/potential.hpp"

namespace kdvact {

/// Lyapunov function Delta(lambda) = (theta(1) + phi'(1))/2 of -y'' + q y = lambda y
/// together with its lambda-derivative from the variational components.
struct LyapunovEval {
  double delta = 0;
  double ddelta_dlambda = 0;
};

/// Integrates the 8-component system (theta, theta', phi, phi' and their
/// lambda-derivatives) across [0, 1] with adaptive 5(4) stepping at local error `tol`.
/// tol must lie in [1e-14, 1e-6].
LyapunovEval lyapunov(const Potential& q, double lambda_unshifted, double tol);

enum class Periodicity { periodic, antiperiodic };

/// Eigenvalues (ascending) of the (2K+1)-dimensional Fourier truncation of
/// -d^2/dx^2 + q on integer (periodic) or half-integer (antiperiodic) modes.
/// Requires K >= 4M.
Eigen::VectorXd hill_matrix_eigenvalues(const Potential& q, Periodicity parity, int K);

/// Fixed-grid monodromy evaluator calibrated once per spectrum computation: the step
/// count is frozen for every lambda below the cap, so Delta is an analytic function of
/// lambda (no step-acceptance micro-jumps). Edge refinement and the gap quadratures all
/// read Delta through one session.
class MonodromySession {
 public:
  MonodromySession(Potential q, double lambda_abs_max, double tol);

  LyapunovEval eval(double lambda_unshifted) const;

  /// Gap-interior evaluation of the discriminant excursion (-1)^n Delta(lambda) - 1
  /// through a difference monodromy: the reference solution at `anchor` (a refined
  /// edge, where the excursion vanishes) is integrated alongside the difference,
  /// which is O(lambda - anchor) with relative-level roundoff. This sidesteps the
  /// catastrophic cancellation of forming Delta -+ 1 near +-1, so narrow-gap height
  /// profiles stay meaningful far below the absolute resolution of Delta.
  struct GapEval {
    double excursion = 0;        ///< (-1)^n Delta(lambda) - 1, anchored to 0 at `anchor`
    double ddelta_dlambda = 0;   ///< dDelta/dlambda at lambda
  };
  GapEval eval_gap(double lambda_unshifted, double anchor_unshifted, double parity) const;

  int step_count() const { return steps_; }
  /// Stabilization residual observed during calibration (upper bound on the
  /// evaluation noise of delta).
  double noise_estimate() const { return noise_; }

 private:
  Potential q_;
  int steps_ = 0;
  double noise_ = 0;
};

struct GapDescriptor {
  int n = 0;
  bool closed = false;
  double lambda_minus = 0;  ///< shifted gap endpoints (lambda_0^+ = 0 convention)
  double lambda_plus = 0;
  double z_minus = 0;  ///< sqrt of the shifted endpoints (momentum gap)
  double z_plus = 0;
  double gamma_len = 0;  ///< lambda_plus - lambda_minus
  double g_len = 0;      ///< z_plus - z_minus
  double z_crit = 0;     ///< maximizer of (-1)^n Delta(z^2) inside the gap
  double h = 0;          ///< v(z_crit + i0) = arccosh((-1)^n Delta(z_crit^2))
  double sigma_len = 0;  ///< length of band n in z: z_n^- - z_{n-1}^+
  double rho = 0;        ///< pi - sigma_len (>= 0)
  bool delta_refined = true;  ///< false when the edges are locked to the matrix seeds
};

struct SpectrumOptions {
  int gap_count = -1;         ///< -1: adaptive via the tail rule
  double tail_rel_tol = 1e-8;
  double closure_tol = 1e-12;
  double ode_tol = 1e-12;
  double root_tol = 1e-12;
  double quad_tol = 1e-11;    ///< node-doubling tolerance for downstream gap quadratures
  int max_gaps = 40;
};

class ActionCache;

/// Normalized band/gap spectrum: q0 = -mu0 shifts the lowest periodic eigenvalue to 0.
struct BandGapSpectrum {
  double q0 = 0;
  double mu0 = 0;  ///< unshifted ground periodic eigenvalue (= -q0)
  std::vector<std::pair<double, double>> edges;  ///< (lambda_n^-, lambda_n^+), shifted
  std::vector<GapDescriptor> gaps;
  int N = 0;
  double tail_estimate = 0;  ///< estimated relative contribution of gaps > N to P3
  SpectrumOptions options;
  std::shared_ptr<const MonodromySession> session;
  /// Lazily filled by the action quadratures; shared across copies so the per-gap
  /// discriminant evaluations are paid once.
  mutable std::shared_ptr<ActionCache> cache;

  /// Delta and dDelta/dlambda at a point of the shifted spectral axis.
  LyapunovEval delta_shifted(double lambda_shifted) const;
};

/// Seeds every edge from the Hill-matrix eigenvalues, refines by bracketed
/// root-finding on Delta -+ 1 through a frozen-grid session, normalizes so that
/// lambda_0^+ = 0 and classifies/describes the first N gaps.
BandGapSpectrum band_edges(const Potential& q, const SpectrumOptions& options);
BandGapSpectrum band_edges(const Potential& q, int gap_count, double tol);

/// Critical point of gap n: the unique interior maximizer of (-1)^n Delta(z^2) and
/// the height h at it. Precondition: the gap is open.
std::pair<double, double> gap_critical_point(const Potential& q, const BandGapSpectrum& spec,
                                             int n);

}  // namespace kdvact
