#pragma once

#include "koopcert/observables.hpp"
#include "koopcert/snapshots.hpp"

#include <Eigen/Dense>

#include <complex>
#include <string>

namespace koopcert {

enum class FunctionSpace { L2, RKHS };

/// The finite-dimensional Galerkin matrices for one approximation
/// subspace. In the L2 setting G = Psi_X* W Psi_X, A = Psi_X* W Psi_Y,
/// L = Psi_Y* W Psi_Y; in the RKHS setting G, A and L are the kernel
/// Gram matrices (L plays the role of R) and the system approximates
/// the adjoint. K is always the regularized solve of G K = A.
struct GalerkinSystem {
    Eigen::MatrixXd G;
    Eigen::MatrixXd A;
    Eigen::MatrixXd L;
    Eigen::MatrixXd K;
    FunctionSpace space = FunctionSpace::L2;

    Eigen::Index rank = 0;      // numerical rank of G at assembly
    bool rank_deficient = false;

    std::string basis;          // JSON descriptor of the basis (may be empty)

    // Snapshot states/images backing the system; required for RKHS queries
    // and observable fitting, optional otherwise.
    Eigen::MatrixXd data_X;
    Eigen::MatrixXd data_Y;
    Eigen::VectorXd data_w;

    // For reduced systems: columns express the retained basis in the
    // coordinates of the system the reduction was applied to.
    Eigen::MatrixXd basis_map;

    Eigen::Index size() const { return G.rows(); }
};

/// Eigendecomposition of a Hermitian PSD matrix with a relative eigenvalue
/// cutoff; backs every regularized pseudoinverse and square root.
struct SymmetricDecomposition {
    Eigen::MatrixXd vectors; // N x r, eigenvalues descending
    Eigen::VectorXd values;  // length r, all > cutoff
    double lambda_max = 0.0;
    Eigen::Index rank = 0;

    Eigen::MatrixXd pinv() const;
    Eigen::MatrixXd sqrt() const;
    Eigen::MatrixXd inv_sqrt() const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const; // pinv * rhs
};

/// Relative cutoff defaults to 1e-12 * lambda_max(G); eigenvalues at or
/// below the cutoff are dropped.
SymmetricDecomposition decompose_psd(const Eigen::MatrixXd& G,
                                     double rel_cutoff = 1e-12);

/// EDMD Galerkin assembly on L2 from a dictionary and weighted snapshots.
GalerkinSystem build_edmd(const Dictionary& dict, const SnapshotSet& snapshots);

/// Kernelized EDMD assembly: G_{jk} = K(x^{(k)}, x^{(j)}),
/// A_{jk} = K(y^{(k)}, x^{(j)}), R_{jk} = K(y^{(k)}, y^{(j)}).
GalerkinSystem build_kedmd(const KernelSpec& kernel, const SnapshotSet& snapshots);

/// Projects onto the span of the r eigenvectors of G with the largest
/// eigenvalues; the reduced basis is orthonormal (G' = I_r, K' = A').
GalerkinSystem svd_truncate(const GalerkinSystem& sys, Eigen::Index r);

/// Relative residual sqrt(g^* (L - lambda A^* - conj(lambda) A + |lambda|^2 G) g)
/// normalized by sqrt(g^* G g); quadratic forms are clipped at zero.
double residual(const GalerkinSystem& sys, std::complex<double> lambda,
                const Eigen::VectorXcd& g);

} // namespace koopcert
