#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "koopcert/certify.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/errors.hpp"
#include "koopcert/galerkin.hpp"
#include "koopcert/tune.hpp"

#include <cmath>
#include <random>

using namespace koopcert;

namespace {

// 4-d stable linear benchmark: two damped rotations.
Eigen::MatrixXd benchmark_map() {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(4, 4);
    const double a = 0.4, b = 0.9;
    M.topLeftCorner(2, 2) << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    M.bottomRightCorner(2, 2) << std::cos(b), -std::sin(b), std::sin(b), std::cos(b);
    M.topLeftCorner(2, 2) *= 0.96;
    M.bottomRightCorner(2, 2) *= 0.92;
    return M;
}

TuningProblem make_problem(Eigen::Index samples, Eigen::Index centers, Eigen::Index rank,
                           int horizon, int test_trajectories) {
    const auto sys = DynamicalSystem::linear_map(benchmark_map());
    RandomBoxSampling sampling;
    sampling.lo = Eigen::VectorXd::Constant(4, -1.0);
    sampling.hi = Eigen::VectorXd::Constant(4, 1.0);
    sampling.count = samples;
    sampling.seed = 42;

    TuningProblem problem;
    problem.train = generate_snapshots(sys, sampling);
    problem.centers = sample_centers_from_box(problem.train.X, centers, 7);
    problem.rank = rank;
    problem.horizon = horizon;

    std::mt19937_64 rng(11);
    auto unif = [&rng]() { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; };
    for (int t = 0; t < test_trajectories; ++t) {
        Eigen::VectorXd x0(4);
        for (int i = 0; i < 4; ++i) x0(i) = unif();
        problem.test_trajectories.push_back(integrate(sys, x0, horizon));
    }
    return problem;
}

} // namespace

TEST_CASE("H = 1 reduces the loss to the mean initialization error") {
    TuningProblem problem = make_problem(200, 24, 12, 1, 0);
    const double loss = tuning_loss(problem, 0.8, 2.0);

    const auto dict = Dictionary::matern_bessel_rbf(problem.centers, 0.8, 2.0);
    const GalerkinSystem red = svd_truncate(build_edmd(dict, problem.train), 12);
    const Eigen::MatrixXd psi_red =
        dict.evaluate(problem.train.X) * red.basis_map;
    double mean_init = 0.0;
    for (int i = 0; i < 4; ++i) {
        mean_init +=
            initialization_error(psi_red, problem.train.w, problem.train.X.col(i)).error;
    }
    mean_init /= 4.0;
    CHECK(loss == doctest::Approx(mean_init).epsilon(1e-12));
}

TEST_CASE("invariant coordinates leave only the initialization term") {
    // Dictionary {1, x} on the halving map: coordinates evolve inside the
    // span, so every projection form vanishes.
    Eigen::MatrixXd M(1, 1);
    M << 0.5;
    const auto flow = DynamicalSystem::linear_map(M);
    RandomBoxSampling sampling;
    sampling.lo = Eigen::VectorXd::Constant(1, -1.0);
    sampling.hi = Eigen::VectorXd::Constant(1, 1.0);
    sampling.count = 60;
    sampling.seed = 3;
    const SnapshotSet set = generate_snapshots(flow, sampling);
    Eigen::MatrixXd domain(2, 1);
    domain << -1.0, 1.0;
    const auto dict = Dictionary::chebyshev_tensor({1}, domain);
    const GalerkinSystem red = svd_truncate(build_edmd(dict, set), 2);
    const Eigen::MatrixXd psi_red = dict.evaluate(set.X) * red.basis_map;
    const LeastSquaresFit fit = initialization_error(psi_red, set.w, set.X.col(0));

    Eigen::MatrixXd coeffs(2, 1);
    coeffs.col(0) = fit.coeffs;
    Eigen::VectorXd init(1);
    init << fit.error;
    const int H = 8;
    const double loss = averaged_error_bound(red, coeffs, init, H);

    // Projection terms vanish; p(n) = ||K^n|| multiplies init = ~0.
    CHECK(fit.error <= 1e-10);
    CHECK(loss <= 1e-8);

    // With a synthetic nonzero init error the loss is exactly the average
    // of p(n) * init over horizons.
    init << 1.0;
    const double loss2 = averaged_error_bound(red, coeffs, init, H);
    double expected = 0.0;
    for (int n = 0; n < H; ++n) expected += op_norm_power(red, n);
    expected /= H;
    CHECK(loss2 == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("loss is invariant under center permutation") {
    TuningProblem problem = make_problem(150, 20, 10, 5, 0);
    const double base = tuning_loss(problem, 0.7, 1.5);

    TuningProblem permuted = problem;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(problem.centers.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
    for (Eigen::Index i = 0; i < problem.centers.rows(); ++i) {
        permuted.centers.row(i) = problem.centers.row(perm[static_cast<std::size_t>(i)]);
    }
    const double shuffled = tuning_loss(permuted, 0.7, 1.5);
    CHECK(std::abs(base - shuffled) <= 1e-10 * std::max(1.0, base));
}

TEST_CASE("loss rejects parameters outside the box") {
    TuningProblem problem = make_problem(100, 16, 8, 3, 0);
    CHECK_THROWS_AS(tuning_loss(problem, 1e9, 1.0), Error);
    CHECK_THROWS_AS(tuning_loss(problem, 1.0, 1e9), Error);
}

TEST_CASE("adam sanity harness: quadratic objective") {
    const double a = -0.7, b = 0.9;
    auto objective = [&](double x, double y) {
        return (x - a) * (x - a) + (y - b) * (y - b);
    };
    AdamConfig config;
    config.epochs = 500;
    const AdamTrace trace =
        adam_minimize(objective, Eigen::Vector2d(0.5, -0.5), Eigen::Vector2d(-5.0, -5.0),
                      Eigen::Vector2d(5.0, 5.0), config);
    CHECK(std::abs(trace.best(0) - a) <= 1e-3);
    CHECK(std::abs(trace.best(1) - b) <= 1e-3);
}

TEST_CASE("adam rejects bad configurations") {
    AdamConfig config;
    config.epochs = 0;
    auto objective = [](double, double) { return 1.0; };
    CHECK_THROWS_AS(adam_minimize(objective, Eigen::Vector2d::Zero(),
                                  -Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones(), config),
                    Error);

    config.epochs = 3;
    auto bad = [](double, double) { return std::numeric_limits<double>::quiet_NaN(); };
    CHECK_THROWS_AS(adam_minimize(bad, Eigen::Vector2d::Zero(), -Eigen::Vector2d::Ones(),
                                  Eigen::Vector2d::Ones(), config),
                    Error);
}

TEST_CASE("short optimization run improves the synthetic benchmark") {
    TuningProblem problem = make_problem(200, 30, 15, 8, 6);
    AdamConfig config;
    config.epochs = 60;
    const double initial = tuning_loss(problem, 0.2, 1.0);
    const TuningResult result = optimize(problem, 0.2, 1.0, config);

    CHECK(result.best_loss < initial);
    CHECK(result.loss_history.size() == 60);
    CHECK(result.test_l2_history.size() == 60);
    CHECK(result.loss_history(0) == doctest::Approx(initial).epsilon(1e-12));
    // Best-so-far history is nonincreasing and ends at the reported best.
    double running = std::numeric_limits<double>::infinity();
    for (int e = 0; e < 60; ++e) running = std::min(running, result.loss_history(e));
    CHECK(result.best_loss <= running);
    // The reported best point reproduces the reported best loss.
    CHECK(tuning_loss(problem, result.best_s, result.best_nu) ==
          doctest::Approx(result.best_loss).epsilon(1e-12));
}
