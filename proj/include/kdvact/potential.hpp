#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace kdvact {

/// Real 1-periodic zero-mean trigonometric polynomial
///   q(x) = sum_{j=1}^{M} a_j cos(2 pi j x) + b_j sin(2 pi j x).
/// Zero mean is structural: there is no constant term in the representation.
struct Potential {
  Eigen::VectorXd cos_coeffs;  ///< a_1 .. a_M
  Eigen::VectorXd sin_coeffs;  ///< b_1 .. b_M

  int modes() const { return static_cast<int>(cos_coeffs.size()); }

  double operator()(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;
};

/// Validates and normalizes the coefficient lists: both lists must have equal length
/// and finite entries (a non-finite entry is rejected naming its index); trailing
/// all-zero modes are trimmed.
Potential make_potential(const Eigen::VectorXd& cos_coeffs, const Eigen::VectorXd& sin_coeffs);
Potential make_potential(std::initializer_list<double> cos_coeffs,
                         std::initializer_list<double> sin_coeffs);

/// a * q
Potential scaled(const Potential& q, double a);
/// a * qa + b * qb
Potential combined(const Potential& qa, double a, const Potential& qb, double b);
/// q(. + shift), as an exact coefficient rotation
Potential translated(const Potential& q, double shift);

/// Complex Fourier modes \hat q_m = (a_m - i b_m)/2 for m = 1..M
/// (so q(x) = sum_{m != 0} \hat q_m e^{2 pi i m x} with \hat q_{-m} = conj).
std::vector<std::complex<double>> complex_modes(const Potential& q);

/// Direct (non-spectral) functionals of the potential. h1 and h2 come from exact
/// Fourier-coefficient algebra (Parseval for q^2, mode convolution for q^3), sup_q
/// from dense sampling refined by Newton steps on q'.
struct DirectFunctionals {
  double h1 = 0;           ///< integral of q^2 over one period
  double h2 = 0;           ///< (1/2) integral of q'^2 + 2 q^3
  double norm_q = 0;       ///< sqrt(h1)
  double norm_qprime = 0;  ///< L2 norm of q'
  double sup_q = 0;        ///< max |q(x)|
};

DirectFunctionals direct_functionals(const Potential& q);

/// H2 of the constant-shifted potential q + c: the derivative is unchanged and the
/// cubic picks up 3 c h1 + c^3 (the q^2 cross term integrates against zero mean).
double shifted_hamiltonian(const Potential& q, double c);

/// (sum_j (a_j^2 + b_j^2) / (2 pi j)^2)^{1/2}, the negative-order Sobolev proxy used
/// by the inequality battery.
double sobolev_minus1_norm(const Potential& q);

}  // namespace kdvact
