#include "koopcert/geometry.hpp"
#include "koopcert/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace koopcert {

namespace {

// Orthonormal basis of the column span, with an SVD rank cutoff.
Eigen::MatrixXd orth(const Eigen::MatrixXd& C) {
    if (C.size() == 0 || C.norm() == 0.0) {
        throw_error(ErrorCode::ZeroSubspace, "subspace_angles: zero subspace");
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tol = static_cast<double>(std::max(C.rows(), C.cols())) *
                       std::numeric_limits<double>::epsilon() * sv(0);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > tol) ++rank;
    return svd.matrixU().leftCols(rank);
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

} // namespace

SubspaceAngles subspace_angles(const Eigen::MatrixXd& C1, const Eigen::MatrixXd& C2) {
    if (C1.rows() != C2.rows()) {
        throw_error(ErrorCode::DimensionMismatch, "subspace_angles: ambient dimensions");
    }
    const Eigen::MatrixXd Q1 = orth(C1);
    const Eigen::MatrixXd Q2 = orth(C2);
    const Eigen::Index q = std::min(Q1.cols(), Q2.cols());

    Eigen::BDCSVD<Eigen::MatrixXd> svd(Q1.transpose() * Q2,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd cosines = svd.singularValues().head(q); // descending

    SubspaceAngles out;
    out.U1 = Q1 * svd.matrixU().leftCols(q);
    out.U2 = Q2 * svd.matrixV().leftCols(q);
    out.angles.resize(q);
    for (Eigen::Index j = 0; j < q; ++j) out.angles(j) = std::acos(clamp01(cosines(j)));

    // Cosines lose all digits for tiny angles; redo the leading block
    // (theta < pi/4) from sines of the orthogonal residual.
    Eigen::Index ns = 0;
    while (ns < q && cosines(ns) * cosines(ns) >= 0.5) ++ns;
    if (ns > 0) {
        const Eigen::MatrixXd V2 = out.U2.leftCols(ns);
        const Eigen::MatrixXd R = V2 - Q1 * (Q1.transpose() * V2);
        Eigen::BDCSVD<Eigen::MatrixXd> svds(R, Eigen::ComputeThinV);
        const Eigen::VectorXd& mu = svds.singularValues(); // sines, descending
        const Eigen::MatrixXd& Z = svds.matrixV();
        for (Eigen::Index j = 0; j < ns; ++j) {
            const Eigen::Index src = ns - 1 - j; // ascending sine order
            const Eigen::VectorXd v = V2 * Z.col(src);
            Eigen::VectorXd u = Q1 * (Q1.transpose() * v);
            const double c = u.norm();
            out.angles(j) = std::asin(clamp01(mu(src)));
            out.U2.col(j) = v;
            out.U1.col(j) = u / c;
        }
    }

    // Stable ascending order across the two branches.
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(q));
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index b) {
        return out.angles(a) < out.angles(b);
    });
    SubspaceAngles sorted;
    sorted.angles.resize(q);
    sorted.U1.resize(out.U1.rows(), q);
    sorted.U2.resize(out.U2.rows(), q);
    for (Eigen::Index j = 0; j < q; ++j) {
        sorted.angles(j) = out.angles(perm[static_cast<std::size_t>(j)]);
        sorted.U1.col(j) = out.U1.col(perm[static_cast<std::size_t>(j)]);
        sorted.U2.col(j) = out.U2.col(perm[static_cast<std::size_t>(j)]);
    }
    return sorted;
}

PrincipalAngleResult principal_angles(const GalerkinSystem& sys, const Eigen::MatrixXd& B,
                                      double cutoff) {
    const Eigen::Index N = sys.size();
    const Eigen::Index n = B.cols();
    if (B.rows() != N || n < 1 || n > N) {
        throw_error(ErrorCode::DimensionMismatch,
                    "principal_angles: B must be N x n with 1 <= n <= N");
    }

    const Eigen::MatrixXd G_V = B.transpose() * sys.G * B;
    const Eigen::MatrixXd A_V = B.transpose() * sys.A * B;
    const Eigen::MatrixXd L_V = B.transpose() * sys.L * B;

    Eigen::MatrixXd J(2 * n, 2 * n);
    J.topLeftCorner(n, n) = G_V;
    J.topRightCorner(n, n) = A_V;
    J.bottomLeftCorner(n, n) = A_V.transpose();
    J.bottomRightCorner(n, n) = L_V;
    J = 0.5 * (J + J.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    if (eig.info() != Eigen::Success) {
        throw_error(ErrorCode::DegenerateData, "principal_angles: eigensolver failed");
    }
    const Eigen::VectorXd& D = eig.eigenvalues(); // ascending
    const double eps_c = cutoff < 0.0 ? 1e-10 * std::max(D(2 * n - 1), 0.0) : cutoff;

    std::vector<Eigen::Index> retained;
    for (Eigen::Index j = 0; j < 2 * n; ++j) {
        if (D(j) > eps_c) retained.push_back(j);
    }
    if (retained.empty()) {
        throw_error(ErrorCode::EmptySubspace,
                    "principal_angles: no eigenvalue above the cutoff");
    }
    const Eigen::Index k = static_cast<Eigen::Index>(retained.size());

    Eigen::MatrixXd U_I(2 * n, k);
    Eigen::VectorXd d_I(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        U_I.col(j) = eig.eigenvectors().col(retained[static_cast<std::size_t>(j)]);
        d_I(j) = D(retained[static_cast<std::size_t>(j)]);
    }
    const Eigen::VectorXd d_sqrt = d_I.cwiseSqrt();

    // Coordinates of {g_i} and {K g_i} in the orthonormalized eigenbasis.
    const Eigen::MatrixXd C1 = d_sqrt.asDiagonal() * U_I.topRows(n).transpose();
    const Eigen::MatrixXd C2 = d_sqrt.asDiagonal() * U_I.bottomRows(n).transpose();

    const SubspaceAngles sub = subspace_angles(C1, C2);

    PrincipalAngleResult out;
    out.angles = sub.angles;
    const Eigen::MatrixXd back = U_I * d_sqrt.cwiseInverse().asDiagonal();
    out.U_hat = back * sub.U1;
    out.V_hat = back * sub.U2;
    out.retained = retained;
    out.cutoff = eps_c;

    // Vectors within a block of equal angles are only determined up to a
    // joint rotation. Fix them by diagonalizing the one-step residual form
    // on each block (residual ascending), which keeps every angle and
    // pairing identity and makes the angle/error tables reproducible.
    const Eigen::Index q = out.angles.size();
    Eigen::Index lo = 0;
    while (lo < q) {
        Eigen::Index hi = lo + 1;
        while (hi < q && out.angles(hi) - out.angles(lo) <= 1e-8) ++hi;
        if (hi - lo > 1) {
            const Eigen::Index k = hi - lo;
            const Eigen::MatrixXd coeff =
                out.U_hat.block(0, lo, n, k) + sys.K * out.U_hat.block(n, lo, n, k);
            Eigen::MatrixXd S = sys.L - sys.K.transpose() * sys.G * sys.K;
            S = 0.5 * (S + S.transpose()).eval();
            Eigen::MatrixXd form = coeff.transpose() * S * coeff;
            form = 0.5 * (form + form.transpose()).eval();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> block_eig(form);
            const Eigen::MatrixXd& Z = block_eig.eigenvectors(); // ascending
            out.U_hat.middleCols(lo, k) = (out.U_hat.middleCols(lo, k) * Z).eval();
            out.V_hat.middleCols(lo, k) = (out.V_hat.middleCols(lo, k) * Z).eval();
        }
        lo = hi;
    }
    return out;
}

PadReduction pad_truncate(const GalerkinSystem& sys, double cutoff, Eigen::Index r) {
    const Eigen::Index N = sys.size();
    const PrincipalAngleResult par =
        principal_angles(sys, Eigen::MatrixXd::Identity(N, N), cutoff);
    const Eigen::Index q = par.angles.size();
    if (r < 1 || r > q) {
        throw_error(ErrorCode::InvalidArgument,
                    "pad_truncate: r must satisfy 1 <= r <= q = " + std::to_string(q));
    }

    // Principal observables expressed purely in the dictionary: the K psi
    // block is pulled back through the approximate operator.
    const Eigen::MatrixXd U1p = par.U_hat.topRows(N) + sys.K * par.U_hat.bottomRows(N);
    Eigen::MatrixXd U = U1p.leftCols(r);

    // Re-orthonormalize against G (Gram-Schmidt via Cholesky keeps the
    // nesting of the leading columns).
    const Eigen::MatrixXd M = U.transpose() * sys.G * U;
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (M + M.transpose()));
    if (llt.info() != Eigen::Success) {
        throw_error(ErrorCode::DegenerateData,
                    "pad_truncate: retained observables numerically dependent");
    }
    U = llt.matrixL().solve(U.transpose()).transpose();

    PadReduction out;
    out.basis = U;
    out.angles = par.angles;
    out.system.G = Eigen::MatrixXd::Identity(r, r);
    out.system.A = U.transpose() * sys.A * U;
    Eigen::MatrixXd Lp = U.transpose() * sys.L * U;
    out.system.L = 0.5 * (Lp + Lp.transpose());
    out.system.K = out.system.A;
    out.system.space = sys.space;
    out.system.rank = r;
    out.system.basis = sys.basis;
    out.system.basis_map = sys.basis_map.size() > 0 ? (sys.basis_map * U).eval() : U;
    out.system.data_X = sys.data_X;
    out.system.data_Y = sys.data_Y;
    out.system.data_w = sys.data_w;
    return out;
}

AngleErrorTable principal_observable_errors(const GalerkinSystem& sys, double cutoff) {
    const Eigen::Index N = sys.size();
    const PrincipalAngleResult par =
        principal_angles(sys, Eigen::MatrixXd::Identity(N, N), cutoff);
    const Eigen::Index q = par.angles.size();
    const Eigen::MatrixXd U1p = par.U_hat.topRows(N) + sys.K * par.U_hat.bottomRows(N);

    AngleErrorTable out;
    out.angles = par.angles;
    out.coeffs = U1p;
    out.one_step_errors.resize(q);
    for (Eigen::Index j = 0; j < q; ++j) {
        const Eigen::VectorXd a = U1p.col(j);
        const Eigen::VectorXd Ka = sys.K * a;
        const double norm2 = a.dot(sys.G * a);
        const double q0 = std::max(0.0, a.dot(sys.L * a) - Ka.dot(sys.G * Ka));
        out.one_step_errors(j) = norm2 > 0.0 ? std::sqrt(q0 / norm2) : 0.0;
    }
    return out;
}

namespace {

// SSE of the least-squares hinge fit y ~ b0 + b1 x + b2 max(0, x - t).
double hinge_sse(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double t) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd design(n, 3);
    design.col(0).setOnes();
    design.col(1) = x;
    design.col(2) = (x.array() - t).cwiseMax(0.0);
    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y);
    return (y - design * beta).squaredNorm();
}

} // namespace

BreakpointFit breakpoint_threshold(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index n = x.size();
    if (n != y.size() || n < 4) {
        throw_error(ErrorCode::InsufficientData,
                    "breakpoint_threshold: need >= 4 samples of equal length");
    }
    const double xmin = x.minCoeff();
    const double xmax = x.maxCoeff();
    if (!(xmax > xmin)) {
        throw_error(ErrorCode::InsufficientData, "breakpoint_threshold: degenerate x");
    }

    const int grid = 512;
    double best_t = xmin;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid; ++k) {
        const double t = xmin + (k + 0.5) * (xmax - xmin) / grid;
        const double s = hinge_sse(x, y, t);
        if (s < best_sse) {
            best_sse = s;
            best_t = t;
        }
    }

    // Golden-section refinement of SSE(t) around the best grid cell.
    double lo = std::max(xmin, best_t - (xmax - xmin) / grid);
    double hi = std::min(xmax, best_t + (xmax - xmin) / grid);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double t1 = hi - gr * (hi - lo);
    double t2 = lo + gr * (hi - lo);
    double f1 = hinge_sse(x, y, t1);
    double f2 = hinge_sse(x, y, t2);
    while (hi - lo > 1e-9 * (xmax - xmin)) {
        if (f1 < f2) {
            hi = t2;
            t2 = t1;
            f2 = f1;
            t1 = hi - gr * (hi - lo);
            f1 = hinge_sse(x, y, t1);
        } else {
            lo = t1;
            t1 = t2;
            f1 = f2;
            t2 = lo + gr * (hi - lo);
            f2 = hinge_sse(x, y, t2);
        }
    }
    BreakpointFit out;
    out.breakpoint = 0.5 * (lo + hi);
    out.sse = std::min(f1, f2);

    // Compare with the pure line: no hinge gain means the breakpoint is
    // unidentifiable; report the nearest boundary sample.
    Eigen::MatrixXd line(n, 2);
    line.col(0).setOnes();
    line.col(1) = x;
    const Eigen::VectorXd beta = line.colPivHouseholderQr().solve(y);
    const double sse_line = (y - line * beta).squaredNorm();
    const double y_scale = y.squaredNorm() + 1e-300;
    if (sse_line - out.sse <= 1e-12 * y_scale) {
        out.degenerate = true;
        out.breakpoint = (out.breakpoint - xmin < xmax - out.breakpoint) ? xmin : xmax;
    }
    return out;
}

} // namespace koopcert
