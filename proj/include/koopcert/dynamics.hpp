#pragma once

#include "koopcert/galerkin.hpp"
#include "koopcert/snapshots.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>

namespace koopcert {

enum class SystemKind { DuffingUnforced, Lorenz63, LinearMap, CustomFlow };

/// A discrete-time evolution map F. Continuous-time kinds define F as the
/// flow over one sampling interval, integrated with an embedded
/// Dormand-Prince 5(4) scheme at tolerance 1e-10; integration is
/// deterministic, so evaluating F twice from the same state is
/// bitwise-identical.
struct DynamicalSystem {
    SystemKind kind = SystemKind::LinearMap;
    Eigen::Index dimension = 0;
    double flow_time = 0.0; // sampling interval for continuous kinds

    Eigen::MatrixXd map; // LinearMap only
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> rhs; // flows

    // u'' + 0.05 u' - u + u^3 = 0, state (u, u').
    static DynamicalSystem duffing(double dt = 0.25);
    // Classic parameters (10, 28, 8/3).
    static DynamicalSystem lorenz63(double dt = 0.1);
    static DynamicalSystem linear_map(const Eigen::MatrixXd& M);
    static DynamicalSystem custom_flow(
        Eigen::Index dimension, double dt,
        std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> rhs);

    /// One application of F.
    Eigen::VectorXd step(const Eigen::VectorXd& x) const;
};

/// Rows 0..steps of the returned matrix are x0, F(x0), ..., F^steps(x0).
/// Throws NonFinite if the integration blows up.
Eigen::MatrixXd integrate(const DynamicalSystem& system, const Eigen::VectorXd& x0,
                          int steps);

struct RandomBoxSampling {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    Eigen::Index count = 0;
    std::uint64_t seed = 0;
};

struct ErgodicTrajectorySampling {
    Eigen::VectorXd x0;
    Eigen::Index count = 0;
    int burn_in = 500;
};

/// x^{(m)} i.i.d. uniform in the box; y^{(m)} = F(x^{(m)}); weights 1/M.
SnapshotSet generate_snapshots(const DynamicalSystem& system,
                               const RandomBoxSampling& sampling);

/// Discards burn_in steps, then records consecutive pairs along a single
/// trajectory (Y rows are X rows shifted by one); weights 1/M.
SnapshotSet generate_snapshots(const DynamicalSystem& system,
                               const ErgodicTrajectorySampling& sampling);

/// Exact (quadrature-free) Galerkin system for a shift on an orthonormal
/// family {g_{-N}, ..., g_{N}} with K g_j = g_{j-1}; the image of the
/// lowest basis function leaves the subspace. observable_index selects
/// g_{-(N+1)+k}, for which the bounds are sharp at horizon n = k.
struct ShiftSystem {
    GalerkinSystem system;
    Eigen::Index observable_index = 0;
};
ShiftSystem lebesgue_shift_system(int half_width, int sharp_horizon);

} // namespace koopcert
