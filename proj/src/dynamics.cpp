#include "koopcert/dynamics.hpp"
#include "koopcert/errors.hpp"

#include <cmath>
#include <random>

namespace koopcert {

namespace {

// Dormand-Prince 5(4) with absolute/relative tolerance 1e-10 and step
// clipping so the integration lands exactly on the interval endpoint.
constexpr double kAbsTol = 1e-10;
constexpr double kRelTol = 1e-10;

void dp54_integrate(const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                    Eigen::VectorXd& y, double t_end) {
    const double atol = kAbsTol;
    const double rtol = kRelTol;
    const Eigen::Index d = y.size();
    Eigen::VectorXd k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), ytmp(d), y5(d), y4(d);

    double t = 0.0;
    double h = t_end / 16.0;
    int steps_taken = 0;
    while (t < t_end) {
        if (h > t_end - t) h = t_end - t;
        f(y, k1);
        ytmp = y + h * (0.2 * k1);
        f(ytmp, k2);
        ytmp = y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2);
        f(ytmp, k3);
        ytmp = y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3);
        f(ytmp, k4);
        ytmp = y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 +
                        64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4);
        f(ytmp, k5);
        ytmp = y + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 +
                        49.0 / 176.0 * k4 - 5103.0 / 18656.0 * k5);
        f(ytmp, k6);
        y5 = y + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 -
                      2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
        f(y5, k7);
        y4 = y + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4 -
                      92097.0 / 339200.0 * k5 + 187.0 / 2100.0 * k6 + 1.0 / 40.0 * k7);

        double err = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double sc = atol + rtol * std::max(std::abs(y(i)), std::abs(y5(i)));
            const double e = (y5(i) - y4(i)) / sc;
            err += e * e;
        }
        err = std::sqrt(err / static_cast<double>(d));

        if (!std::isfinite(err)) {
            throw_error(ErrorCode::NonFinite, "integrate: solution blew up");
        }
        if (err <= 1.0) {
            t += h;
            y = y5;
        }
        const double factor =
            std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-16), -0.2)));
        h *= factor;
        if (++steps_taken > 10'000'000) {
            throw_error(ErrorCode::NonFinite, "integrate: step count exceeded");
        }
    }
    if (!y.allFinite()) {
        throw_error(ErrorCode::NonFinite, "integrate: non-finite state");
    }
}

} // namespace

DynamicalSystem DynamicalSystem::duffing(double dt) {
    DynamicalSystem s;
    s.kind = SystemKind::DuffingUnforced;
    s.dimension = 2;
    s.flow_time = dt;
    s.rhs = [](const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
        dx(0) = x(1);
        dx(1) = -0.05 * x(1) + x(0) - x(0) * x(0) * x(0);
    };
    return s;
}

DynamicalSystem DynamicalSystem::lorenz63(double dt) {
    DynamicalSystem s;
    s.kind = SystemKind::Lorenz63;
    s.dimension = 3;
    s.flow_time = dt;
    s.rhs = [](const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
        dx(0) = 10.0 * (x(1) - x(0));
        dx(1) = x(0) * (28.0 - x(2)) - x(1);
        dx(2) = x(0) * x(1) - (8.0 / 3.0) * x(2);
    };
    return s;
}

DynamicalSystem DynamicalSystem::linear_map(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols() || M.rows() == 0) {
        throw_error(ErrorCode::InvalidArgument, "linear_map: square matrix required");
    }
    DynamicalSystem s;
    s.kind = SystemKind::LinearMap;
    s.dimension = M.rows();
    s.flow_time = 1.0;
    s.map = M;
    return s;
}

DynamicalSystem DynamicalSystem::custom_flow(
    Eigen::Index dimension, double dt,
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> rhs) {
    if (dimension <= 0 || !(dt > 0.0)) {
        throw_error(ErrorCode::InvalidArgument, "custom_flow: need d > 0 and dt > 0");
    }
    DynamicalSystem s;
    s.kind = SystemKind::CustomFlow;
    s.dimension = dimension;
    s.flow_time = dt;
    s.rhs = std::move(rhs);
    return s;
}

Eigen::VectorXd DynamicalSystem::step(const Eigen::VectorXd& x) const {
    if (x.size() != dimension) {
        throw_error(ErrorCode::DimensionMismatch, "step: state dimension mismatch");
    }
    if (kind == SystemKind::LinearMap) {
        Eigen::VectorXd y = map * x;
        if (!y.allFinite()) throw_error(ErrorCode::NonFinite, "step: non-finite state");
        return y;
    }
    if (!(flow_time > 0.0)) {
        throw_error(ErrorCode::InvalidArgument, "step: flow_time must be positive");
    }
    Eigen::VectorXd y = x;
    dp54_integrate(rhs, y, flow_time);
    return y;
}

Eigen::MatrixXd integrate(const DynamicalSystem& system, const Eigen::VectorXd& x0,
                          int steps) {
    if (steps < 0) throw_error(ErrorCode::InvalidArgument, "integrate: steps >= 0");
    Eigen::MatrixXd traj(steps + 1, system.dimension);
    Eigen::VectorXd x = x0;
    traj.row(0) = x.transpose();
    for (int k = 1; k <= steps; ++k) {
        x = system.step(x);
        traj.row(k) = x.transpose();
    }
    return traj;
}

SnapshotSet generate_snapshots(const DynamicalSystem& system,
                               const RandomBoxSampling& sampling) {
    const Eigen::Index d = system.dimension;
    if (sampling.lo.size() != d || sampling.hi.size() != d) {
        throw_error(ErrorCode::DimensionMismatch, "generate_snapshots: box dimension");
    }
    if ((sampling.hi.array() <= sampling.lo.array()).any()) {
        throw_error(ErrorCode::InvalidArgument, "generate_snapshots: box not well-ordered");
    }
    if (sampling.count < 1) {
        throw_error(ErrorCode::InvalidArgument, "generate_snapshots: need M >= 1");
    }
    const Eigen::Index M = sampling.count;

    std::mt19937_64 rng(sampling.seed);
    auto unif = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    SnapshotSet set;
    set.X.resize(M, d);
    set.Y.resize(M, d);
    for (Eigen::Index m = 0; m < M; ++m) {
        for (Eigen::Index i = 0; i < d; ++i) {
            set.X(m, i) = sampling.lo(i) + (sampling.hi(i) - sampling.lo(i)) * unif();
        }
        set.Y.row(m) = system.step(set.X.row(m).transpose()).transpose();
    }
    set.w = Eigen::VectorXd::Constant(M, 1.0 / static_cast<double>(M));
    set.provenance = Provenance::RandomIID;
    return set;
}

SnapshotSet generate_snapshots(const DynamicalSystem& system,
                               const ErgodicTrajectorySampling& sampling) {
    if (sampling.count < 1) {
        throw_error(ErrorCode::InvalidArgument, "generate_snapshots: need M >= 1");
    }
    if (sampling.burn_in < 0) {
        throw_error(ErrorCode::InvalidArgument, "generate_snapshots: burn_in >= 0");
    }
    Eigen::VectorXd x = sampling.x0;
    for (int k = 0; k < sampling.burn_in; ++k) x = system.step(x);

    const Eigen::Index M = sampling.count;
    Eigen::MatrixXd states(M + 1, system.dimension);
    states.row(0) = x.transpose();
    for (Eigen::Index k = 1; k <= M; ++k) {
        x = system.step(x);
        states.row(k) = x.transpose();
    }

    SnapshotSet set;
    set.X = states.topRows(M);
    set.Y = states.bottomRows(M);
    set.w = Eigen::VectorXd::Constant(M, 1.0 / static_cast<double>(M));
    set.provenance = Provenance::ErgodicTrajectory;
    return set;
}

ShiftSystem lebesgue_shift_system(int half_width, int sharp_horizon) {
    if (half_width < 1) {
        throw_error(ErrorCode::InvalidArgument, "lebesgue_shift_system: N >= 1");
    }
    const Eigen::Index n = 2 * static_cast<Eigen::Index>(half_width) + 1;
    if (sharp_horizon < 1 || sharp_horizon > n) {
        throw_error(ErrorCode::InvalidArgument,
                    "lebesgue_shift_system: need 1 <= k <= 2N+1");
    }

    ShiftSystem out;
    GalerkinSystem& sys = out.system;
    sys.G = Eigen::MatrixXd::Identity(n, n);
    // Basis index i holds g_{i-N}; the image of g_{-N} (index 0) leaves the
    // subspace, so column 0 of A vanishes. The images are an orthonormal
    // family, hence L = I exactly.
    sys.A = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) sys.A(i - 1, i) = 1.0;
    sys.L = Eigen::MatrixXd::Identity(n, n);
    sys.K = sys.A;
    sys.space = FunctionSpace::L2;
    sys.rank = n;
    sys.basis = "{\"kind\":\"lebesgue_shift\",\"half_width\":" +
                std::to_string(half_width) + "}";
    out.observable_index = sharp_horizon - 1; // g_{-(N+1)+k}
    return out;
}

} // namespace koopcert
