#pragma once

#include "koopcert/snapshots.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace koopcert {

/// Matern-Bessel radial profile f^{(s,nu)}(r) = (s r)^nu K_nu(s r), with
/// continuity value 2^{nu-1} Gamma(nu) at r = 0.
double matern_radial(double scale, double order, double r);

/// An evaluable family of observables spanning the approximation subspace.
class Dictionary {
public:
    enum class Kind { ChebyshevTensor, ExponentialRBF, MaternBesselRBF };

    // Tensor-product Chebyshev polynomials with per-axis maximum degrees,
    // mapped to the domain box (row 0 = lower corner, row 1 = upper).
    // Basis ordering is lexicographic in the per-axis degree multi-index.
    static Dictionary chebyshev_tensor(const std::vector<int>& degrees,
                                       const Eigen::MatrixXd& domain);

    // psi_i(x) = exp(-s ||x - c_i||), centers as rows of C.
    static Dictionary exponential_rbf(const Eigen::MatrixXd& centers, double scale);

    // psi_i(x) = f^{(s,nu)}(||x - c_i||).
    static Dictionary matern_bessel_rbf(const Eigen::MatrixXd& centers, double scale,
                                        double order);

    Kind kind() const { return kind_; }
    Eigen::Index size() const { return size_; }
    Eigen::Index dim() const { return dim_; }

    /// Entry (m, j) of the result is psi_j evaluated at row m of points.
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& points) const;

    const std::vector<int>& degrees() const { return degrees_; }
    const Eigen::MatrixXd& domain() const { return domain_; }
    const Eigen::MatrixXd& centers() const { return centers_; }
    double scale() const { return scale_; }
    double order() const { return order_; }

private:
    Dictionary() = default;

    Kind kind_ = Kind::ChebyshevTensor;
    Eigen::Index size_ = 0;
    Eigen::Index dim_ = 0;
    std::vector<int> degrees_;
    Eigen::MatrixXd domain_;
    Eigen::MatrixXd centers_;
    double scale_ = 1.0;
    double order_ = 1.0;
};

/// Matern-Bessel reproducing kernel K(x, y) = f^{(sigma,nu)}(||x - y||).
struct KernelSpec {
    double scale = 1.0; // sigma
    double order = 2.0; // nu

    double diagonal_value() const; // 2^{nu-1} Gamma(nu)
    double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
};

/// Entry (i, j) of the result is K(Q.row(j), P.row(i)), matching the
/// Gram-matrix index convention G_{jk} = K(x^{(k)}, x^{(j)}).
Eigen::MatrixXd eval_kernel_matrix(const KernelSpec& kernel, const Eigen::MatrixXd& P,
                                   const Eigen::MatrixXd& Q);

/// sigma = 1 / (mean over coordinates of the per-coordinate population
/// standard deviation of the states X). Throws DegenerateData when all
/// states coincide.
double default_kernel_scale(const SnapshotSet& snapshots);

/// RBF centers sampled uniformly at random from the bounding box of the
/// rows of X, using the given seed.
Eigen::MatrixXd sample_centers_from_box(const Eigen::MatrixXd& X, Eigen::Index count,
                                        std::uint64_t seed);

} // namespace koopcert
