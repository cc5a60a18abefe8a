#include "koopcert/tune.hpp"
#include "koopcert/certify.hpp"
#include "koopcert/errors.hpp"
#include "koopcert/galerkin.hpp"
#include "koopcert/observables.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace koopcert {

namespace {

struct ReducedModel {
    GalerkinSystem sys;      // r x r, G = I
    Eigen::MatrixXd psi_red; // M x r, reduced dictionary samples at X
    Eigen::MatrixXd coeffs;  // r x d, least-squares coordinate observables
    Eigen::VectorXd init_errors; // d
    Dictionary dict;
};

ReducedModel build_reduced_model(const TuningProblem& problem, double s, double nu) {
    const Dictionary dict = Dictionary::matern_bessel_rbf(problem.centers, s, nu);
    GalerkinSystem full = build_edmd(dict, problem.train);
    if (problem.rank < 1 || problem.rank > full.rank) {
        throw_error(ErrorCode::InvalidArgument,
                    "tuning: reduction rank exceeds the numerical rank of G");
    }
    ReducedModel model{svd_truncate(full, problem.rank), {}, {}, {}, dict};
    const Eigen::Index d = problem.train.dim();
    model.psi_red = dict.evaluate(problem.train.X) * model.sys.basis_map;
    model.coeffs.resize(problem.rank, d);
    model.init_errors.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const LeastSquaresFit fit =
            initialization_error(model.psi_red, problem.train.w, problem.train.X.col(i));
        model.coeffs.col(i) = fit.coeffs;
        model.init_errors(i) = fit.error;
    }
    return model;
}

} // namespace

double averaged_error_bound(const GalerkinSystem& reduced, const Eigen::MatrixXd& coeffs,
                            const Eigen::VectorXd& init_errors, int horizon) {
    if (horizon < 1) throw_error(ErrorCode::InvalidArgument, "averaged bound: H >= 1");
    const Eigen::Index d = coeffs.cols();
    if (init_errors.size() != d || coeffs.rows() != reduced.size()) {
        throw_error(ErrorCode::DimensionMismatch, "averaged bound: shapes");
    }

    // ||K^j|| in the orthonormal basis, j = 0..H-1.
    Eigen::VectorXd p(horizon);
    p(0) = 1.0;
    Eigen::MatrixXd Kj = reduced.K;
    for (int j = 1; j < horizon; ++j) {
        p(j) = Eigen::BDCSVD<Eigen::MatrixXd>(Kj).singularValues()(0);
        Kj = reduced.K * Kj;
    }

    Eigen::MatrixXd S = reduced.L - reduced.K.transpose() * reduced.K;
    S = 0.5 * (S + S.transpose()).eval();

    double loss = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::VectorXd q = Eigen::VectorXd::Zero(std::max(horizon - 1, 1));
        Eigen::VectorXd v = coeffs.col(i);
        for (int k = 0; k + 1 < horizon; ++k) {
            q(k) = std::max(0.0, v.dot(S * v));
            v = reduced.K * v;
        }
        for (int n = 0; n < horizon; ++n) {
            double bound = p(n) * init_errors(i);
            for (int j = 0; j < n; ++j) bound += p(j) * std::sqrt(q(n - 1 - j));
            loss += bound;
        }
    }
    loss /= static_cast<double>(horizon) * static_cast<double>(d);
    if (!std::isfinite(loss)) {
        throw_error(ErrorCode::NonFinite, "averaged bound: non-finite value");
    }
    return loss;
}

double tuning_loss(const TuningProblem& problem, double s, double nu) {
    if (!(s >= problem.s_min && s <= problem.s_max && nu >= problem.nu_min &&
          nu <= problem.nu_max)) {
        throw_error(ErrorCode::InvalidArgument, "tuning_loss: (s, nu) outside the box");
    }
    const ReducedModel model = build_reduced_model(problem, s, nu);
    return averaged_error_bound(model.sys, model.coeffs, model.init_errors,
                                problem.horizon);
}

TestErrors exact_test_errors(const TuningProblem& problem, double s, double nu) {
    if (problem.test_trajectories.empty()) {
        throw_error(ErrorCode::InvalidArgument, "exact_test_errors: no test set");
    }
    const ReducedModel model = build_reduced_model(problem, s, nu);
    const Eigen::Index d = problem.train.dim();
    const int H = problem.horizon;

    double sq_acc = 0.0;
    double abs_acc = 0.0;
    Eigen::Index count = 0;
    for (const Eigen::MatrixXd& traj : problem.test_trajectories) {
        if (traj.cols() != d || traj.rows() < 2) {
            throw_error(ErrorCode::DimensionMismatch, "exact_test_errors: bad trajectory");
        }
        const Eigen::MatrixXd phi0 =
            model.dict.evaluate(traj.topRows(1)) * model.sys.basis_map; // 1 x r
        Eigen::MatrixXd evolved = model.coeffs;                         // K^n applied
        const int steps = std::min<int>(H - 1, static_cast<int>(traj.rows()) - 1);
        for (int n = 1; n <= steps; ++n) {
            evolved = model.sys.K * evolved;
            const Eigen::RowVectorXd pred = phi0 * evolved; // 1 x d
            for (Eigen::Index i = 0; i < d; ++i) {
                const double err = pred(i) - traj(n, i);
                sq_acc += err * err;
                abs_acc += std::abs(err);
                ++count;
            }
        }
    }
    if (count == 0) {
        throw_error(ErrorCode::InsufficientData, "exact_test_errors: empty horizon");
    }
    TestErrors out;
    out.l2 = std::sqrt(sq_acc / static_cast<double>(count));
    out.pointwise = abs_acc / static_cast<double>(count);
    return out;
}

AdamTrace adam_minimize(const std::function<double(double, double)>& objective,
                        const Eigen::Vector2d& init, const Eigen::Vector2d& lo,
                        const Eigen::Vector2d& hi, const AdamConfig& config,
                        const std::function<void(int, double, double)>& on_epoch) {
    if (config.epochs < 1) {
        throw_error(ErrorCode::InvalidArgument, "adam_minimize: epochs >= 1");
    }
    auto clamp = [](double v, double a, double b) { return std::min(b, std::max(a, v)); };

    AdamTrace trace;
    trace.best_value = std::numeric_limits<double>::infinity();
    auto evaluate = [&](double a, double b) {
        const double v = objective(a, b);
        if (std::isfinite(v) && v < trace.best_value) {
            trace.best_value = v;
            trace.best = Eigen::Vector2d(a, b);
        }
        return v;
    };

    Eigen::Vector2d x(clamp(init(0), lo(0), hi(0)), clamp(init(1), lo(1), hi(1)));
    if (!std::isfinite(evaluate(x(0), x(1)))) {
        throw_error(ErrorCode::AllEvaluationsFailed,
                    "adam_minimize: objective non-finite at the initial point");
    }

    trace.history.resize(config.epochs);
    const double h = config.fd_step;
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    Eigen::Vector2d v = Eigen::Vector2d::Zero();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double cur = evaluate(x(0), x(1));
        trace.history(epoch) = cur;
        if (on_epoch) on_epoch(epoch, x(0), x(1));

        const double big = 10.0 * std::max(std::abs(cur), 1.0);
        auto probe = [&](double a, double b) {
            const double val = evaluate(clamp(a, lo(0), hi(0)), clamp(b, lo(1), hi(1)));
            return std::isfinite(val) ? val : big;
        };
        Eigen::Vector2d g;
        g(0) = (probe(x(0) + h, x(1)) - probe(x(0) - h, x(1))) / (2.0 * h);
        g(1) = (probe(x(0), x(1) + h) - probe(x(0), x(1) - h)) / (2.0 * h);

        const double t = epoch + 1;
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
        const double bc1 = 1.0 - std::pow(config.beta1, t);
        const double bc2 = 1.0 - std::pow(config.beta2, t);
        for (int i = 0; i < 2; ++i) {
            x(i) -= config.lr * (m(i) / bc1) / (std::sqrt(v(i) / bc2) + config.eps);
            x(i) = clamp(x(i), lo(i), hi(i));
        }
    }
    return trace;
}

TuningResult optimize(const TuningProblem& problem, double s0, double nu0,
                      const AdamConfig& config) {
    const bool with_test = !problem.test_trajectories.empty();

    TuningResult result;
    if (with_test) {
        result.test_l2_history.resize(config.epochs);
        result.test_pointwise_history.resize(config.epochs);
    }

    auto objective = [&](double ls, double lnu) {
        try {
            return tuning_loss(problem, std::exp(ls), std::exp(lnu));
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    auto on_epoch = [&](int epoch, double ls, double lnu) {
        if (!with_test) return;
        // Degenerate iterates (rank collapse at extreme parameters) get an
        // infinite test error, matching the infinite loss they produce.
        try {
            const TestErrors te = exact_test_errors(problem, std::exp(ls), std::exp(lnu));
            result.test_l2_history(epoch) = te.l2;
            result.test_pointwise_history(epoch) = te.pointwise;
        } catch (const Error&) {
            result.test_l2_history(epoch) = std::numeric_limits<double>::infinity();
            result.test_pointwise_history(epoch) = std::numeric_limits<double>::infinity();
        }
    };

    const AdamTrace trace = adam_minimize(
        objective, Eigen::Vector2d(std::log(s0), std::log(nu0)),
        Eigen::Vector2d(std::log(problem.s_min), std::log(problem.nu_min)),
        Eigen::Vector2d(std::log(problem.s_max), std::log(problem.nu_max)), config,
        on_epoch);

    result.best_s = std::exp(trace.best(0));
    result.best_nu = std::exp(trace.best(1));
    result.best_loss = trace.best_value;
    result.loss_history = trace.history;
    return result;
}

} // namespace koopcert
