#include "koopcert/galerkin.hpp"
#include "koopcert/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace koopcert {

Eigen::MatrixXd SymmetricDecomposition::pinv() const {
    return vectors * values.cwiseInverse().asDiagonal() * vectors.transpose();
}

Eigen::MatrixXd SymmetricDecomposition::sqrt() const {
    return vectors * values.cwiseSqrt().asDiagonal() * vectors.transpose();
}

Eigen::MatrixXd SymmetricDecomposition::inv_sqrt() const {
    return vectors * values.cwiseSqrt().cwiseInverse().asDiagonal() * vectors.transpose();
}

Eigen::MatrixXd SymmetricDecomposition::solve(const Eigen::MatrixXd& rhs) const {
    return vectors * (values.cwiseInverse().asDiagonal() * (vectors.transpose() * rhs));
}

SymmetricDecomposition decompose_psd(const Eigen::MatrixXd& G, double rel_cutoff) {
    if (G.rows() != G.cols() || G.rows() == 0) {
        throw_error(ErrorCode::InvalidArgument, "decompose_psd: square matrix required");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    if (eig.info() != Eigen::Success) {
        throw_error(ErrorCode::DegenerateData, "decompose_psd: eigensolver failed");
    }
    const Eigen::Index n = G.rows();
    const Eigen::VectorXd vals = eig.eigenvalues(); // ascending
    const double lambda_max = std::max(vals(n - 1), 0.0);
    const double cutoff = rel_cutoff * lambda_max;

    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (vals(i) > cutoff) ++r;
    }
    if (r == 0) {
        throw_error(ErrorCode::DegenerateData, "decompose_psd: matrix numerically zero");
    }

    SymmetricDecomposition out;
    out.values.resize(r);
    out.vectors.resize(n, r);
    for (Eigen::Index i = 0; i < r; ++i) { // descending
        out.values(i) = vals(n - 1 - i);
        out.vectors.col(i) = eig.eigenvectors().col(n - 1 - i);
    }
    out.lambda_max = lambda_max;
    out.rank = r;
    return out;
}

namespace {

GalerkinSystem assemble(Eigen::MatrixXd G, Eigen::MatrixXd A, Eigen::MatrixXd L,
                        FunctionSpace space) {
    GalerkinSystem sys;
    sys.G = 0.5 * (G + G.transpose());
    sys.A = std::move(A);
    sys.L = 0.5 * (L + L.transpose());
    sys.space = space;

    const auto dec = decompose_psd(sys.G);
    sys.K = dec.solve(sys.A);
    sys.rank = dec.rank;
    sys.rank_deficient = dec.rank < sys.G.rows();
    return sys;
}

} // namespace

GalerkinSystem build_edmd(const Dictionary& dict, const SnapshotSet& snapshots) {
    snapshots.validate();
    if (dict.dim() != snapshots.dim()) {
        throw_error(ErrorCode::DimensionMismatch, "build_edmd: dictionary dimension");
    }
    const Eigen::MatrixXd psi_x = dict.evaluate(snapshots.X);
    const Eigen::MatrixXd psi_y = dict.evaluate(snapshots.Y);
    const Eigen::MatrixXd wpsi_x = snapshots.w.asDiagonal() * psi_x;

    GalerkinSystem sys = assemble(psi_x.transpose() * wpsi_x,
                                  psi_x.transpose() * (snapshots.w.asDiagonal() * psi_y),
                                  psi_y.transpose() * (snapshots.w.asDiagonal() * psi_y),
                                  FunctionSpace::L2);
    sys.data_X = snapshots.X;
    sys.data_Y = snapshots.Y;
    sys.data_w = snapshots.w;
    return sys;
}

GalerkinSystem build_kedmd(const KernelSpec& kernel, const SnapshotSet& snapshots) {
    snapshots.validate();
    // N = M: the dictionary is the kernel sections at the snapshot states.
    GalerkinSystem sys = assemble(eval_kernel_matrix(kernel, snapshots.X, snapshots.X),
                                  eval_kernel_matrix(kernel, snapshots.X, snapshots.Y),
                                  eval_kernel_matrix(kernel, snapshots.Y, snapshots.Y),
                                  FunctionSpace::RKHS);
    sys.data_X = snapshots.X;
    sys.data_Y = snapshots.Y;
    sys.data_w = snapshots.w;
    return sys;
}

GalerkinSystem svd_truncate(const GalerkinSystem& sys, Eigen::Index r) {
    if (r < 1) throw_error(ErrorCode::InvalidArgument, "svd_truncate: r >= 1");
    const auto dec = decompose_psd(sys.G);
    if (r > dec.rank) {
        throw_error(ErrorCode::InvalidArgument,
                    "svd_truncate: r exceeds the numerical rank of G");
    }
    // Retained basis: leading eigenvectors of G scaled to orthonormality.
    Eigen::MatrixXd U = dec.vectors.leftCols(r) *
                        dec.values.head(r).cwiseSqrt().cwiseInverse().asDiagonal();

    GalerkinSystem red;
    red.G = Eigen::MatrixXd::Identity(r, r);
    red.A = U.transpose() * sys.A * U;
    red.L = U.transpose() * sys.L * U;
    red.K = red.A;
    red.space = sys.space;
    red.rank = r;
    red.basis = sys.basis;
    // The stored map always targets the underlying evaluable basis, so
    // chained reductions compose.
    red.basis_map = sys.basis_map.size() > 0 ? (sys.basis_map * U).eval() : U;
    red.data_X = sys.data_X;
    red.data_Y = sys.data_Y;
    red.data_w = sys.data_w;
    return red;
}

double residual(const GalerkinSystem& sys, std::complex<double> lambda,
                const Eigen::VectorXcd& g) {
    if (g.size() != sys.size()) {
        throw_error(ErrorCode::DimensionMismatch, "residual: coefficient size");
    }
    if (g.norm() == 0.0) throw_error(ErrorCode::ZeroVector, "residual: g = 0");

    const std::complex<double> gLg = g.dot(sys.L * g);
    const std::complex<double> gAg = g.dot(sys.A * g);
    const std::complex<double> gAtg = g.dot(sys.A.adjoint() * g);
    const std::complex<double> gGg = g.dot(sys.G * g);

    const double norm2 = gGg.real();
    if (!(norm2 > 0.0)) {
        throw_error(ErrorCode::ZeroVector, "residual: g has zero Galerkin norm");
    }
    const double q = (gLg - lambda * gAtg - std::conj(lambda) * gAg +
                      std::norm(lambda) * gGg)
                         .real();
    return std::sqrt(std::max(0.0, q)) / std::sqrt(norm2);
}

} // namespace koopcert
