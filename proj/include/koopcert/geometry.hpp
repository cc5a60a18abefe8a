#pragma once

#include "koopcert/galerkin.hpp"

#include <Eigen/Dense>

#include <vector>

namespace koopcert {

/// Principal angles (ascending) and principal-vector matrices between the
/// column spans of C1 and C2. Orthonormalizes each block, takes the SVD of
/// the cross-product, and switches to a sine-based evaluation for angles
/// below pi/4 so that tiny angles keep full relative accuracy. The phase
/// convention makes <U1(:,j), U2(:,j)> real nonnegative.
struct SubspaceAngles {
    Eigen::VectorXd angles;
    Eigen::MatrixXd U1;
    Eigen::MatrixXd U2;
};
SubspaceAngles subspace_angles(const Eigen::MatrixXd& C1, const Eigen::MatrixXd& C2);

/// Principal angles between V = span(Psi B) and its Koopman image, with
/// principal observables expressed in the concatenated family
/// [Psi B, (K Psi) B] (coefficient matrices U_hat, V_hat of size 2n x q).
struct PrincipalAngleResult {
    Eigen::VectorXd angles; // ascending, in [0, pi/2]
    Eigen::MatrixXd U_hat;
    Eigen::MatrixXd V_hat;
    std::vector<Eigen::Index> retained; // eigenvalue indices kept in J_V
    double cutoff = 0.0;                // epsilon_c actually used
};

/// Pass cutoff < 0 to use the default epsilon_c = 1e-10 * lambda_max(J_V).
PrincipalAngleResult principal_angles(const GalerkinSystem& sys,
                                      const Eigen::MatrixXd& B, double cutoff = -1.0);

/// Principal angle decomposition: the r smallest-angle principal
/// observables, re-orthonormalized against G so that U^* G U = I_r, with
/// the compressed matrices A_pad = K_pad and L_pad.
struct PadReduction {
    GalerkinSystem system;  // r x r, G = I, A = K
    Eigen::MatrixXd basis;  // N x r coefficients in the original dictionary
    Eigen::VectorXd angles; // all q computed angles
};
PadReduction pad_truncate(const GalerkinSystem& sys, double cutoff, Eigen::Index r);

/// Angle spectrum plus relative one-step prediction error of each
/// principal observable (B = I_N).
struct AngleErrorTable {
    Eigen::VectorXd angles;
    Eigen::VectorXd one_step_errors;
    Eigen::MatrixXd coeffs; // N x q, observables in the original dictionary
};
AngleErrorTable principal_observable_errors(const GalerkinSystem& sys,
                                            double cutoff = -1.0);

/// Least-squares single-breakpoint piecewise-linear fit of y against x;
/// returns the breakpoint abscissa. When the hinge does not improve on a
/// straight line the fit is flagged degenerate and the breakpoint is the
/// nearest boundary sample.
struct BreakpointFit {
    double breakpoint = 0.0;
    double sse = 0.0;
    bool degenerate = false;
};
BreakpointFit breakpoint_threshold(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

} // namespace koopcert
