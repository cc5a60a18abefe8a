#include "koopcert/observables.hpp"
#include "koopcert/bessel.hpp"
#include "koopcert/errors.hpp"

#include <cmath>
#include <random>

namespace koopcert {

double matern_radial(double scale, double order, double r) {
    if (!(scale > 0.0) || !(order > 0.0)) {
        throw_error(ErrorCode::DomainError, "matern_radial: scale and order > 0");
    }
    if (r < 0.0) throw_error(ErrorCode::DomainError, "matern_radial: r >= 0");
    const double z = scale * r;
    // Limit value 2^{nu-1} Gamma(nu); the correction is O(z^2 log z).
    if (z < 1e-30) {
        return std::pow(2.0, order - 1.0) * std::tgamma(order);
    }
    return std::pow(z, order) * bessel_k(order, z);
}

Dictionary Dictionary::chebyshev_tensor(const std::vector<int>& degrees,
                                        const Eigen::MatrixXd& domain) {
    if (degrees.empty()) {
        throw_error(ErrorCode::InvalidArgument, "chebyshev_tensor: empty degree list");
    }
    const Eigen::Index d = static_cast<Eigen::Index>(degrees.size());
    if (domain.rows() != 2 || domain.cols() != d) {
        throw_error(ErrorCode::DimensionMismatch, "chebyshev_tensor: domain must be 2 x d");
    }
    Eigen::Index n = 1;
    for (int deg : degrees) {
        if (deg < 0) throw_error(ErrorCode::InvalidArgument, "chebyshev_tensor: degree >= 0");
        n *= deg + 1;
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(domain(1, i) > domain(0, i))) {
            throw_error(ErrorCode::InvalidArgument, "chebyshev_tensor: box not well-ordered");
        }
    }
    Dictionary dict;
    dict.kind_ = Kind::ChebyshevTensor;
    dict.size_ = n;
    dict.dim_ = d;
    dict.degrees_ = degrees;
    dict.domain_ = domain;
    return dict;
}

Dictionary Dictionary::exponential_rbf(const Eigen::MatrixXd& centers, double scale) {
    if (centers.rows() == 0) {
        throw_error(ErrorCode::InvalidArgument, "exponential_rbf: no centers");
    }
    if (!(scale > 0.0)) {
        throw_error(ErrorCode::InvalidArgument, "exponential_rbf: scale > 0");
    }
    Dictionary dict;
    dict.kind_ = Kind::ExponentialRBF;
    dict.size_ = centers.rows();
    dict.dim_ = centers.cols();
    dict.centers_ = centers;
    dict.scale_ = scale;
    return dict;
}

Dictionary Dictionary::matern_bessel_rbf(const Eigen::MatrixXd& centers, double scale,
                                         double order) {
    if (centers.rows() == 0) {
        throw_error(ErrorCode::InvalidArgument, "matern_bessel_rbf: no centers");
    }
    if (!(scale > 0.0) || !(order > 0.0)) {
        throw_error(ErrorCode::InvalidArgument, "matern_bessel_rbf: scale, order > 0");
    }
    Dictionary dict;
    dict.kind_ = Kind::MaternBesselRBF;
    dict.size_ = centers.rows();
    dict.dim_ = centers.cols();
    dict.centers_ = centers;
    dict.scale_ = scale;
    dict.order_ = order;
    return dict;
}

Eigen::MatrixXd Dictionary::evaluate(const Eigen::MatrixXd& points) const {
    if (points.cols() != dim_) {
        throw_error(ErrorCode::DimensionMismatch, "Dictionary::evaluate: point dimension");
    }
    if (!points.allFinite()) {
        throw_error(ErrorCode::NonFinite, "Dictionary::evaluate: non-finite points");
    }
    const Eigen::Index M = points.rows();
    Eigen::MatrixXd out(M, size_);

    if (kind_ == Kind::ChebyshevTensor) {
        // Per-axis Chebyshev values up to the axis degree, then tensor
        // products in lexicographic multi-index order (last axis fastest).
        std::vector<Eigen::MatrixXd> axis_vals(static_cast<std::size_t>(dim_));
        for (Eigen::Index ax = 0; ax < dim_; ++ax) {
            const int deg = degrees_[static_cast<std::size_t>(ax)];
            Eigen::MatrixXd T(M, deg + 1);
            const double a = domain_(0, ax), b = domain_(1, ax);
            for (Eigen::Index m = 0; m < M; ++m) {
                const double t = (2.0 * points(m, ax) - (a + b)) / (b - a);
                T(m, 0) = 1.0;
                if (deg >= 1) T(m, 1) = t;
                for (int k = 2; k <= deg; ++k) T(m, k) = 2.0 * t * T(m, k - 1) - T(m, k - 2);
            }
            axis_vals[static_cast<std::size_t>(ax)] = std::move(T);
        }
        std::vector<int> idx(static_cast<std::size_t>(dim_), 0);
        for (Eigen::Index j = 0; j < size_; ++j) {
            Eigen::VectorXd col = axis_vals[0].col(idx[0]);
            for (Eigen::Index ax = 1; ax < dim_; ++ax) {
                col.array() *= axis_vals[static_cast<std::size_t>(ax)]
                                   .col(idx[static_cast<std::size_t>(ax)]).array();
            }
            out.col(j) = col;
            for (Eigen::Index ax = dim_ - 1; ax >= 0; --ax) {
                auto& k = idx[static_cast<std::size_t>(ax)];
                if (++k <= degrees_[static_cast<std::size_t>(ax)]) break;
                k = 0;
            }
        }
        return out;
    }

    for (Eigen::Index j = 0; j < size_; ++j) {
        for (Eigen::Index m = 0; m < M; ++m) {
            const double r = (points.row(m) - centers_.row(j)).norm();
            out(m, j) = (kind_ == Kind::ExponentialRBF)
                            ? std::exp(-scale_ * r)
                            : matern_radial(scale_, order_, r);
        }
    }
    return out;
}

double KernelSpec::diagonal_value() const {
    return std::pow(2.0, order - 1.0) * std::tgamma(order);
}

double KernelSpec::operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    if (x.size() != y.size()) {
        throw_error(ErrorCode::DimensionMismatch, "KernelSpec: point dimensions differ");
    }
    return matern_radial(scale, order, (x - y).norm());
}

Eigen::MatrixXd eval_kernel_matrix(const KernelSpec& kernel, const Eigen::MatrixXd& P,
                                   const Eigen::MatrixXd& Q) {
    if (P.cols() != Q.cols()) {
        throw_error(ErrorCode::DimensionMismatch, "eval_kernel_matrix: dimensions differ");
    }
    if (!P.allFinite() || !Q.allFinite()) {
        throw_error(ErrorCode::NonFinite, "eval_kernel_matrix: non-finite points");
    }
    Eigen::MatrixXd out(P.rows(), Q.rows());
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        for (Eigen::Index j = 0; j < Q.rows(); ++j) {
            const double r = (Q.row(j) - P.row(i)).norm();
            out(i, j) = matern_radial(kernel.scale, kernel.order, r);
        }
    }
    return out;
}

double default_kernel_scale(const SnapshotSet& snapshots) {
    snapshots.validate();
    if (snapshots.size() < 2) {
        throw_error(ErrorCode::InvalidArgument, "default_kernel_scale: need M >= 2");
    }
    const Eigen::MatrixXd& X = snapshots.X;
    const Eigen::RowVectorXd mean = X.colwise().mean();
    const Eigen::RowVectorXd var =
        (X.rowwise() - mean).array().square().colwise().mean();
    const double mean_std = var.array().sqrt().mean();
    if (!(mean_std > 0.0)) {
        throw_error(ErrorCode::DegenerateData, "default_kernel_scale: identical states");
    }
    return 1.0 / mean_std;
}

Eigen::MatrixXd sample_centers_from_box(const Eigen::MatrixXd& X, Eigen::Index count,
                                        std::uint64_t seed) {
    if (X.rows() == 0 || count < 1) {
        throw_error(ErrorCode::InvalidArgument, "sample_centers_from_box: empty input");
    }
    const Eigen::RowVectorXd lo = X.colwise().minCoeff();
    const Eigen::RowVectorXd hi = X.colwise().maxCoeff();
    std::mt19937_64 rng(seed);
    auto unif = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    Eigen::MatrixXd C(count, X.cols());
    for (Eigen::Index m = 0; m < count; ++m) {
        for (Eigen::Index i = 0; i < X.cols(); ++i) {
            C(m, i) = lo(i) + (hi(i) - lo(i)) * unif();
        }
    }
    return C;
}

} // namespace koopcert
