#include "oracles.hpp"

#include <cmath>
#include <limits>

namespace oracles {

double bessel_k_integral(double nu, double x) {
    // log of the integrand exp(-x cosh t) cosh(nu t), overflow-safe.
    auto log_integrand = [&](double t) {
        if (t == 0.0) return -x;
        return -x * std::cosh(t) + nu * t + std::log1p(std::exp(-2.0 * nu * t)) -
               std::log(2.0);
    };

    const double h = 1.0 / 128.0;
    double sum = 0.5 * std::exp(log_integrand(0.0));
    // March until the integrand is negligible relative to the running sum.
    double tail_log_cut = std::log(sum) - 40.0;
    for (int k = 1; k < 400000; ++k) {
        const double lf = log_integrand(k * h);
        if (lf < tail_log_cut && k * h > 1.0) break;
        sum += std::exp(lf);
        tail_log_cut = std::log(sum) - 40.0;
    }
    return sum * h;
}

Eigen::VectorXd shift_exact_errors(int half_width, Eigen::Index g_index, int horizon) {
    const Eigen::Index n = 2 * static_cast<Eigen::Index>(half_width) + 1;
    const int big_width = half_width + horizon + 2;
    const Eigen::Index nb = 2 * static_cast<Eigen::Index>(big_width) + 1;
    const Eigen::Index offset = big_width - half_width; // small index i -> big i + offset

    auto shift_matrix = [](Eigen::Index size) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(size, size);
        for (Eigen::Index i = 1; i < size; ++i) A(i - 1, i) = 1.0;
        return A;
    };
    const Eigen::MatrixXd K_small = shift_matrix(n);
    const Eigen::MatrixXd K_big = shift_matrix(nb);

    Eigen::VectorXd g_small = Eigen::VectorXd::Zero(n);
    g_small(g_index) = 1.0;
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(nb);
    truth(g_index + offset) = 1.0;

    Eigen::VectorXd predicted = g_small;
    Eigen::VectorXd errors(horizon);
    for (int m = 1; m <= horizon; ++m) {
        truth = K_big * truth;
        predicted = K_small * predicted;
        Eigen::VectorXd embedded = Eigen::VectorXd::Zero(nb);
        embedded.segment(offset, n) = predicted;
        errors(m - 1) = (truth - embedded).norm();
    }
    return errors;
}

double min_relative_residual(const Eigen::MatrixXd& G,
                             const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& L,
                             const Eigen::VectorXd& g) {
    const double a = g.dot(L * g);
    const double c = g.dot(G * g);

    auto f = [&](double lambda) {
        // ||K g - lambda g||^2 / (lambda^2 ||g||^2)
        const double q = g.dot(L * g) - 2.0 * lambda * g.dot(A * g) +
                         lambda * lambda * c;
        return std::sqrt(std::max(0.0, q)) / (std::abs(lambda) * std::sqrt(c));
    };

    // Signed log-spaced scan over |lambda|, then golden-section refinement
    // of the best bracket in the log variable.
    const double lam_scale = std::sqrt(a / c);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double best = std::numeric_limits<double>::infinity();
    for (double sign : {1.0, -1.0}) {
        const auto eval_log = [&](double t) { return f(sign * lam_scale * std::pow(10.0, t)); };
        double best_t = 0.0;
        double best_here = std::numeric_limits<double>::infinity();
        const int grid = 6000;
        for (int i = 0; i <= grid; ++i) {
            const double t = -6.0 + 12.0 * i / grid;
            const double v = eval_log(t);
            if (v < best_here) {
                best_here = v;
                best_t = t;
            }
        }
        double lo = best_t - 12.0 / grid;
        double hi = best_t + 12.0 / grid;
        double x1 = hi - gr * (hi - lo);
        double x2 = lo + gr * (hi - lo);
        double f1 = eval_log(x1), f2 = eval_log(x2);
        for (int it = 0; it < 300 && (hi - lo) > 1e-13; ++it) {
            if (f1 < f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = eval_log(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = eval_log(x2);
            }
        }
        best = std::min({best, best_here, f1, f2});
    }
    return best;
}

} // namespace oracles
