#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "koopcert/dynamics.hpp"
#include "koopcert/errors.hpp"
#include "koopcert/geometry.hpp"
#include "koopcert/observables.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace koopcert;

namespace {

// Random Gram-consistent Galerkin data: J = [[G,A],[A^T,L]] is a genuine
// Gram matrix of 2n random vectors, so every PSD invariant holds exactly.
GalerkinSystem random_consistent_system(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd T(4 * n + 7, 2 * n);
    for (Eigen::Index i = 0; i < T.rows(); ++i)
        for (Eigen::Index j = 0; j < T.cols(); ++j) T(i, j) = normal(rng);
    const Eigen::MatrixXd J = T.transpose() * T / static_cast<double>(T.rows());

    GalerkinSystem sys;
    sys.G = J.topLeftCorner(n, n);
    sys.A = J.topRightCorner(n, n);
    sys.L = J.bottomRightCorner(n, n);
    sys.K = decompose_psd(sys.G).solve(sys.A);
    sys.rank = n;
    return sys;
}

Eigen::MatrixXd block_J(const GalerkinSystem& sys) {
    const Eigen::Index n = sys.size();
    Eigen::MatrixXd J(2 * n, 2 * n);
    J.topLeftCorner(n, n) = sys.G;
    J.topRightCorner(n, n) = sys.A;
    J.bottomLeftCorner(n, n) = sys.A.transpose();
    J.bottomRightCorner(n, n) = sys.L;
    return 0.5 * (J + J.transpose());
}

SnapshotSet duffing_snapshots(std::uint64_t seed, Eigen::Index count) {
    const auto sys = DynamicalSystem::duffing();
    RandomBoxSampling sampling;
    sampling.lo = Eigen::VectorXd::Constant(2, -2.0);
    sampling.hi = Eigen::VectorXd::Constant(2, 2.0);
    sampling.count = count;
    sampling.seed = seed;
    return generate_snapshots(sys, sampling);
}

} // namespace

TEST_CASE("subspace angles: coordinate planes") {
    Eigen::MatrixXd C1(3, 2), C2(3, 2);
    C1 << 1, 0, 0, 1, 0, 0; // span{e1, e2}
    C2 << 1, 0, 0, 0, 0, 1; // span{e1, e3}
    const SubspaceAngles out = subspace_angles(C1, C2);
    REQUIRE(out.angles.size() == 2);
    CHECK(out.angles(0) <= 1e-12);
    CHECK(std::abs(out.angles(1) - M_PI / 2.0) <= 1e-12);
}

TEST_CASE("subspace angles: identical subspaces") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd C(6, 3);
    for (Eigen::Index i = 0; i < C.size(); ++i) C(i / 3, i % 3) = normal(rng);
    Eigen::MatrixXd T(3, 3);
    for (Eigen::Index i = 0; i < T.size(); ++i) T(i / 3, i % 3) = normal(rng);
    const SubspaceAngles out = subspace_angles(C, C * T);
    CHECK(out.angles.maxCoeff() <= 1e-12);
}

TEST_CASE("subspace angles: tiny rotation keeps full relative accuracy") {
    for (double alpha : {1e-7, 1e-9, 1e-4}) {
        Eigen::MatrixXd C1(2, 1), C2(2, 1);
        C1 << 1, 0;
        C2 << std::cos(alpha), std::sin(alpha);
        const SubspaceAngles out = subspace_angles(C1, C2);
        CHECK(std::abs(out.angles(0) - alpha) <= 1e-13 * alpha);
        // Phase convention: <u, v> >= 0.
        CHECK(out.U1.col(0).dot(out.U2.col(0)) >= 0.0);
    }
}

TEST_CASE("subspace angles: zero subspace rejected") {
    CHECK_THROWS_AS(subspace_angles(Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Ones(3, 1)),
                    Error);
}

TEST_CASE("principal angles: constants are invariant") {
    GalerkinSystem sys;
    sys.G = Eigen::MatrixXd::Ones(1, 1);
    sys.A = Eigen::MatrixXd::Ones(1, 1);
    sys.L = Eigen::MatrixXd::Ones(1, 1);
    sys.K = Eigen::MatrixXd::Ones(1, 1);
    const auto out = principal_angles(sys, Eigen::MatrixXd::Identity(1, 1));
    REQUIRE(out.angles.size() == 1);
    CHECK(out.angles(0) <= 1e-10);
}

TEST_CASE("principal angles: gram normalization and cosine pairing") {
    const GalerkinSystem sys = random_consistent_system(6, 31);
    const auto out = principal_angles(sys, Eigen::MatrixXd::Identity(6, 6));
    const Eigen::MatrixXd J = block_J(sys);
    for (Eigen::Index j = 0; j < out.angles.size(); ++j) {
        const double nu = out.U_hat.col(j).dot(J * out.U_hat.col(j));
        const double nv = out.V_hat.col(j).dot(J * out.V_hat.col(j));
        CHECK(std::abs(nu - 1.0) <= 1e-8);
        CHECK(std::abs(nv - 1.0) <= 1e-8);
        const double cosv = out.U_hat.col(j).dot(J * out.V_hat.col(j));
        CHECK(cosv >= -1e-12);
        CHECK(std::abs(cosv - std::cos(out.angles(j))) <= 1e-8);
    }
}

TEST_CASE("one-dimensional subspace: sine of angle is the minimal relative residual") {
    const GalerkinSystem sys = random_consistent_system(5, 77);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    Eigen::VectorXd g(5);
    for (Eigen::Index i = 0; i < 5; ++i) g(i) = normal(rng);

    const auto out = principal_angles(sys, g); // B is a single column
    REQUIRE(out.angles.size() == 1);
    const double oracle = oracles::min_relative_residual(sys.G, sys.A, sys.L, g);
    CHECK(std::abs(std::sin(out.angles(0)) - oracle) <= 1e-6);
}

TEST_CASE("lemma 3.2 identities through the quadratic forms") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const int n = 6;
        const GalerkinSystem sys = random_consistent_system(n, seed);
        const auto out = principal_angles(sys, Eigen::MatrixXd::Identity(n, n));
        const Eigen::MatrixXd J = block_J(sys);
        const auto decG = decompose_psd(sys.G);

        for (Eigen::Index j = 0; j < out.angles.size(); ++j) {
            // Coefficients of P*P v_j in the dictionary.
            const Eigen::VectorXd b = J.topRows(n) * out.V_hat.col(j);
            const Eigen::VectorXd c = decG.solve(b);
            Eigen::VectorXd w = Eigen::VectorXd::Zero(2 * n);
            w.head(n) = c;

            const Eigen::VectorXd diff_u = w - std::cos(out.angles(j)) * out.U_hat.col(j);
            const double dist_u = std::sqrt(std::max(0.0, diff_u.dot(J * diff_u)));
            CHECK(dist_u <= 1e-6);

            const Eigen::VectorXd diff_v = w - out.V_hat.col(j);
            const double dist_v = std::sqrt(std::max(0.0, diff_v.dot(J * diff_v)));
            CHECK(std::abs(dist_v - std::sin(out.angles(j))) <= 1e-6);
        }
    }
}

TEST_CASE("angles are a subspace property") {
    const int n = 5;
    const GalerkinSystem sys = random_consistent_system(n, 13);
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n).leftCols(3);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd T(3, 3);
    do {
        for (Eigen::Index i = 0; i < T.size(); ++i) T(i / 3, i % 3) = normal(rng);
    } while (std::abs(T.determinant()) < 1e-3);

    const auto a = principal_angles(sys, B);
    const auto b = principal_angles(sys, B * T);
    REQUIRE(a.angles.size() == b.angles.size());
    CHECK((a.angles - b.angles).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("one-step error bound via angles") {
    const int n = 6;
    for (std::uint64_t seed : {11ULL, 12ULL}) {
        const GalerkinSystem sys = random_consistent_system(n, seed);
        const auto out = principal_angles(sys, Eigen::MatrixXd::Identity(n, n));
        const Eigen::MatrixXd J = block_J(sys);

        std::mt19937_64 rng(seed + 100);
        std::normal_distribution<double> normal;
        Eigen::VectorXd g(n);
        for (Eigen::Index i = 0; i < n; ++i) g(i) = normal(rng);

        const Eigen::VectorXd Kg = sys.K * g;
        const double lhs =
            std::sqrt(std::max(0.0, g.dot(sys.L * g) - Kg.dot(sys.G * Kg)));

        double rhs = 0.0;
        for (Eigen::Index i = 0; i < out.angles.size(); ++i) {
            Eigen::VectorXd kg2n = Eigen::VectorXd::Zero(2 * n);
            kg2n.tail(n) = g;
            const double coef = kg2n.dot(J * out.V_hat.col(i));
            rhs += std::abs(coef) * std::sin(out.angles(i));
        }
        CHECK(lhs <= rhs + 1e-8);
    }
}

TEST_CASE("krylov trajectory dictionary: all angles except the largest vanish") {
    const auto lorenz = DynamicalSystem::lorenz63();
    ErgodicTrajectorySampling sampling;
    sampling.x0 = Eigen::Vector3d(3.0, 4.0, 20.0);
    sampling.count = 12;
    sampling.burn_in = 300;
    const SnapshotSet set = generate_snapshots(lorenz, sampling);
    KernelSpec kernel{default_kernel_scale(set), 2.0};
    const GalerkinSystem sys = build_kedmd(kernel, set);
    const auto out = principal_angles(sys, Eigen::MatrixXd::Identity(12, 12));
    REQUIRE(out.angles.size() >= 2);
    for (Eigen::Index j = 0; j + 1 < out.angles.size(); ++j) {
        CHECK(out.angles(j) <= 1e-8);
    }
    CHECK(out.angles(out.angles.size() - 1) > 1e-6);
}

TEST_CASE("pad on an exactly invariant subspace loses nothing") {
    Eigen::MatrixXd M(1, 1);
    M << 0.5;
    const auto flow = DynamicalSystem::linear_map(M);
    RandomBoxSampling sampling;
    sampling.lo = Eigen::VectorXd::Constant(1, -1.0);
    sampling.hi = Eigen::VectorXd::Constant(1, 1.0);
    sampling.count = 50;
    sampling.seed = 15;
    const SnapshotSet set = generate_snapshots(flow, sampling);
    Eigen::MatrixXd domain(2, 1);
    domain << -1.0, 1.0;
    const auto dict = Dictionary::chebyshev_tensor({1}, domain); // {1, x}
    const GalerkinSystem sys = build_edmd(dict, set);

    const PadReduction pad = pad_truncate(sys, -1.0, 2);
    CHECK(pad.angles.maxCoeff() <= 1e-7);
    CHECK((pad.basis.transpose() * sys.G * pad.basis - Eigen::MatrixXd::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() <= 1e-8);
    CHECK((pad.system.A - pad.system.K).norm() == 0.0);

    // Predictions of g(x) = x agree with the full system.
    Eigen::VectorXd g(2);
    g << 0.0, 1.0;
    Eigen::VectorXd g_pad = pad.basis.transpose() * sys.G * g;
    Eigen::VectorXd full = g, red = g_pad;
    for (int step = 0; step < 6; ++step) {
        full = sys.K * full;
        red = pad.system.K * red;
    }
    const Eigen::VectorXd diff = pad.basis * red - full;
    CHECK(std::sqrt(std::max(0.0, diff.dot(sys.G * diff))) <= 1e-10);
}

TEST_CASE("pad rejects r beyond the computed angles") {
    const GalerkinSystem sys = random_consistent_system(4, 9);
    CHECK_THROWS_AS(pad_truncate(sys, -1.0, 10), Error);
}

TEST_CASE("an oversized cutoff empties the retained set") {
    const GalerkinSystem sys = random_consistent_system(4, 10);
    const double huge = 1e3 * sys.G.norm();
    CHECK_THROWS_AS(principal_angles(sys, Eigen::MatrixXd::Identity(4, 4), huge), Error);
}

TEST_CASE("angle convergence is cauchy-like in the data size") {
    Eigen::MatrixXd domain(2, 2);
    domain << -2.5, -2.5, 2.5, 2.5;
    const auto dict = Dictionary::chebyshev_tensor({4, 4}, domain);
    const GalerkinSystem s1 = build_edmd(dict, duffing_snapshots(101, 250));
    const GalerkinSystem s2 = build_edmd(dict, duffing_snapshots(102, 500));
    const GalerkinSystem s3 = build_edmd(dict, duffing_snapshots(103, 1000));
    const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(25, 25);
    const auto a1 = principal_angles(s1, B);
    const auto a2 = principal_angles(s2, B);
    const auto a3 = principal_angles(s3, B);
    REQUIRE(a1.angles.size() == 25);
    REQUIRE(a2.angles.size() == 25);
    REQUIRE(a3.angles.size() == 25);
    CHECK((a2.angles - a3.angles).norm() <= (a1.angles - a2.angles).norm() + 0.05);
}

TEST_CASE("breakpoint fitting") {
    SUBCASE("perfect hinge") {
        const int n = 101;
        Eigen::VectorXd x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x(i) = static_cast<double>(i) / (n - 1);
            y(i) = std::max(0.0, x(i) - 0.5);
        }
        const BreakpointFit fit = breakpoint_threshold(x, y);
        CHECK(!fit.degenerate);
        CHECK(std::abs(fit.breakpoint - 0.5) <= 1e-6);
    }

    SUBCASE("pure line is degenerate") {
        const int n = 40;
        Eigen::VectorXd x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x(i) = static_cast<double>(i);
            y(i) = 3.0 - 2.0 * x(i);
        }
        const BreakpointFit fit = breakpoint_threshold(x, y);
        CHECK(fit.degenerate);
        CHECK((fit.breakpoint == x(0) || fit.breakpoint == x(n - 1)));
    }

    SUBCASE("too few samples") {
        Eigen::VectorXd x(3), y(3);
        x << 0, 1, 2;
        y << 0, 1, 2;
        CHECK_THROWS_AS(breakpoint_threshold(x, y), Error);
    }
}
