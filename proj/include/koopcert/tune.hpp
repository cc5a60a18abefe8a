#pragma once

#include "koopcert/galerkin.hpp"
#include "koopcert/snapshots.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace koopcert {

/// Dictionary hyperparameter learning for the Matern-Bessel RBF family:
/// minimize the averaged multi-step error bound of the coordinate
/// observables g_i(x) = [x]_i over (s, nu). Centers stay fixed for the
/// whole optimization.
struct TuningProblem {
    SnapshotSet train;
    Eigen::MatrixXd centers;
    Eigen::Index rank = 50; // SVD reduction rank r
    int horizon = 21;       // bounds averaged over n = 0..horizon-1

    double s_min = 1e-3, s_max = 1e2;
    double nu_min = 0.25, nu_max = 8.0;

    // Optional held-out trajectories (rows are consecutive states) used
    // only to report exact test errors per epoch; never fed to the loss.
    std::vector<Eigen::MatrixXd> test_trajectories;
};

/// The loss L(s, nu): build the RBF dictionary at (s, nu), assemble EDMD,
/// reduce to rank r (so G = I, A = K), and average
///   E_n(g_i) = ||K^n|| ||g_i - Psi g_i|| +
///              sum_{j<n} ||K^j|| sqrt((K^{n-j-1} g_i)^*(L - K^*K)(K^{n-j-1} g_i))
/// over n = 0..H-1 and the d coordinates. Throws NonFinite on overflow
/// (treated as +inf by the optimizer).
double tuning_loss(const TuningProblem& problem, double s, double nu);

struct AdamConfig {
    double lr = 1e-2;
    int epochs = 500;
    double fd_step = 1e-4; // central-difference step on (log s, log nu)
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Average of the multi-step bounds over horizons 0..H-1 and the columns
/// of coeffs, for an already-reduced orthonormal system (G = I).
double averaged_error_bound(const GalerkinSystem& reduced, const Eigen::MatrixXd& coeffs,
                            const Eigen::VectorXd& init_errors, int horizon);

/// Two-parameter Adam with central finite-difference gradients, box
/// clamping and best-point tracking; the workhorse behind optimize().
struct AdamTrace {
    Eigen::Vector2d best = Eigen::Vector2d::Zero();
    double best_value = 0.0;
    Eigen::VectorXd history; // objective at the iterate, per epoch
};
AdamTrace adam_minimize(const std::function<double(double, double)>& objective,
                        const Eigen::Vector2d& init, const Eigen::Vector2d& lo,
                        const Eigen::Vector2d& hi, const AdamConfig& config,
                        const std::function<void(int, double, double)>& on_epoch = {});

struct TuningResult {
    double best_s = 0.0;
    double best_nu = 0.0;
    double best_loss = 0.0;
    Eigen::VectorXd loss_history; // loss at the iterate, one entry per epoch
    Eigen::VectorXd test_l2_history;        // empty without a test set
    Eigen::VectorXd test_pointwise_history; // empty without a test set
};

/// Adam on (log s, log nu) with central finite-difference gradients;
/// parameters are clamped to the box, and the best evaluated point is
/// tracked and returned. Throws AllEvaluationsFailed if the loss is
/// non-finite at the initial point.
TuningResult optimize(const TuningProblem& problem, double s0, double nu0,
                      const AdamConfig& config = AdamConfig());

/// Exact multi-step forecast errors of the (s, nu) model on the problem's
/// test trajectories: RMS and mean-absolute pointwise errors over all
/// starts, horizons 1..H-1 and coordinates.
struct TestErrors {
    double l2 = 0.0;
    double pointwise = 0.0;
};
TestErrors exact_test_errors(const TuningProblem& problem, double s, double nu);

} // namespace koopcert
