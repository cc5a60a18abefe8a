#pragma once

#include "koopcert/galerkin.hpp"

#include <Eigen/Dense>

#include <vector>

namespace koopcert {

enum class BoundVariant { FirstOrderMin, FullOrder, Expected };

/// Per-horizon error bounds (or expected errors) with their component
/// breakdown. steps[i] is the horizon of values[i]; bounds that include a
/// step-0 entry (PFMD) start at 0, the L2 KMD bounds start at 1.
struct ErrorSeries {
    std::vector<int> steps;
    Eigen::VectorXd values;
    Eigen::VectorXd init_components;
    Eigen::VectorXd proj_components;
    BoundVariant variant = BoundVariant::FirstOrderMin;
    std::vector<int> chosen_form; // FirstOrderMin: 1 or 2 per step
    Eigen::VectorXd form1, form2; // the sqrt- and sum-aggregated bounds
    Eigen::VectorXd stds;         // Expected only
};

/// Spectral norm of G^{1/2} K^j G^{-1/2}, the computable surrogate for
/// ||K^j|| restricted to the subspace; j = 0 returns 1.
double op_norm_power(const GalerkinSystem& sys, int j);

/// First-order multi-step bounds: per horizon m the minimum of
///   E_m^(1) = sqrt(sum_j ||G^.5 K G^-.5||^{2j} q_{m-j-1})
///   E_m^(2) = sum_j ||G^.5 K^j G^-.5|| sqrt(q_{m-j-1})
/// with q_i = (K^i g)^* (L - K^* G K) (K^i g) clipped at zero.
ErrorSeries kmd_error_bounds(const GalerkinSystem& sys, const Eigen::VectorXd& g,
                             int n);

/// Full-order bounds: the out-of-subspace terms are expanded recursively,
/// keeping all orders, so the result upper-bounds the projected error
/// (modulo quadrature); again the minimum of the two aggregation forms.
ErrorSeries kmd_error_bounds_full(const GalerkinSystem& sys, const Eigen::VectorXd& g,
                                  int n);

/// Least-squares fit of an observable onto a sampled basis under the
/// quadrature inner product; error is the quadrature norm of the residual.
struct LeastSquaresFit {
    Eigen::VectorXd coeffs;
    double error = 0.0;
};
LeastSquaresFit initialization_error(const Eigen::MatrixXd& basis_samples,
                                     const Eigen::VectorXd& w,
                                     const Eigen::VectorXd& g_samples);
LeastSquaresFit initialization_error(const Dictionary& dict, const SnapshotSet& snapshots,
                                     const Eigen::VectorXd& g_samples);

/// Kernel-section query for pointwise forecasts from a start state x0:
/// b_j = K(x0, x^{(j)}), c = pinv(G) b, and the initialization residual
/// delta^2 = K(x0, x0) - c^* b (clipped at zero).
struct PfmdQuery {
    Eigen::VectorXd x0;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    double delta = 0.0;
    double g_norm = 1.0;          // RKHS norm of the target observable
    bool g_norm_estimated = false; // true when fitted rather than supplied
};

/// g_norm < 0 requests the least-squares estimate from the samples
/// g(x^{(j)}); the result is then tagged non-rigorous.
PfmdQuery make_pfmd_query(const KernelSpec& kernel, const GalerkinSystem& sys,
                          const Eigen::VectorXd& x0, double g_norm = -1.0,
                          const Eigen::VectorXd& g_samples = Eigen::VectorXd());

/// RKHS-norm bounds (steps 0..n) per
///   E_m = ||(K^*)^m|| delta + sum_j ||G^.5 K^j G^-.5|| sqrt(qc_{m-j-1}),
/// and the pointwise bounds g_norm * E_m.
struct PfmdBounds {
    ErrorSeries norm_bounds;
    ErrorSeries pointwise_bounds;
    bool rigorous = true; // false when g_norm was estimated
};
PfmdBounds pfmd_pointwise_bounds(const GalerkinSystem& sys, const PfmdQuery& query,
                                 int n);

} // namespace koopcert
