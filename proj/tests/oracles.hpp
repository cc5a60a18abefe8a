#pragma once

// Test-only reference computations, independent of the library's
// implementation paths. Kept deliberately simple and slow.

#include <Eigen/Dense>

namespace oracles {

// K_nu(x) via the integral representation
//   K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt,
// evaluated with the trapezoidal rule (exponentially convergent for this
// integrand). Accurate to ~1e-13 relative for nu in [0, 10], x >= 1e-3.
double bessel_k_integral(double nu, double x);

// Smallest angle minimizing ||K g - lambda g|| / (|lambda| ||g||) over a
// lambda grid plus golden-section refinement; used as the independent
// oracle for the one-dimensional principal-angle identity.
double min_relative_residual(const Eigen::MatrixXd& G,
                             const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& L,
                             const Eigen::VectorXd& g);

// Exact projection errors ||K^m g - Psi K^m g|| for the orthonormal shift
// construction, obtained by embedding the width-N system into a width-N'
// shift large enough that nothing leaves it over the horizon. Entry m-1
// holds the error at horizon m.
Eigen::VectorXd shift_exact_errors(int half_width, Eigen::Index g_index, int horizon);

} // namespace oracles
