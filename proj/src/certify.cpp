#include "koopcert/certify.hpp"
#include "koopcert/errors.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace koopcert {

namespace {

double spectral_norm(const Eigen::MatrixXd& M) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
    return svd.singularValues()(0);
}

// ||G^{1/2} K^j G^{-1/2}|| for j = 0..n; entry 0 is exactly 1.
Eigen::VectorXd op_norm_powers(const GalerkinSystem& sys, int n) {
    Eigen::VectorXd p(n + 1);
    p(0) = 1.0;
    if (n == 0) return p;
    const auto dec = decompose_psd(sys.G);
    const Eigen::MatrixXd M1 = dec.sqrt() * sys.K * dec.inv_sqrt();
    Eigen::MatrixXd cur = M1;
    p(1) = spectral_norm(cur);
    for (int j = 2; j <= n; ++j) {
        cur = M1 * cur;
        p(j) = spectral_norm(cur);
    }
    return p;
}

// Quadratic forms q_i = (K^i g)^* S (K^i g), i = 0..n-1, clipped at zero;
// S is the symmetrized residual matrix L - K^* G K.
Eigen::VectorXd projection_forms(const GalerkinSystem& sys, const Eigen::VectorXd& g,
                                 int n) {
    Eigen::MatrixXd S = sys.L - sys.K.transpose() * sys.G * sys.K;
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::VectorXd q(n);
    Eigen::VectorXd v = g;
    for (int i = 0; i < n; ++i) {
        q(i) = std::max(0.0, v.dot(S * v));
        if (i + 1 < n) v = sys.K * v;
    }
    return q;
}

void check_bound_args(const GalerkinSystem& sys, const Eigen::VectorXd& g, int n) {
    if (n < 1) throw_error(ErrorCode::InvalidArgument, "error bounds: n >= 1");
    if (g.size() != sys.size()) {
        throw_error(ErrorCode::DimensionMismatch, "error bounds: coefficient size");
    }
    if (g.norm() == 0.0) throw_error(ErrorCode::ZeroVector, "error bounds: g = 0");
}

} // namespace

double op_norm_power(const GalerkinSystem& sys, int j) {
    if (j < 0) throw_error(ErrorCode::InvalidArgument, "op_norm_power: j >= 0");
    return op_norm_powers(sys, j)(j);
}

ErrorSeries kmd_error_bounds(const GalerkinSystem& sys, const Eigen::VectorXd& g, int n) {
    check_bound_args(sys, g, n);
    const Eigen::VectorXd q = projection_forms(sys, g, n);
    const Eigen::VectorXd p = op_norm_powers(sys, n - 1);
    const double p1 = n > 1 ? p(1) : 1.0;

    ErrorSeries out;
    out.variant = BoundVariant::FirstOrderMin;
    out.steps.resize(n);
    out.values.resize(n);
    out.init_components = Eigen::VectorXd::Zero(n);
    out.proj_components.resize(n);
    out.chosen_form.resize(n);
    out.form1.resize(n);
    out.form2.resize(n);
    for (int m = 1; m <= n; ++m) {
        double e1_sq = 0.0;
        double e2 = 0.0;
        double weight = 1.0; // p1^{2j}
        for (int j = 0; j < m; ++j) {
            e1_sq += weight * q(m - 1 - j);
            e2 += p(j) * std::sqrt(q(m - 1 - j));
            weight *= p1 * p1;
        }
        const double e1 = std::sqrt(e1_sq);
        out.steps[m - 1] = m;
        out.chosen_form[m - 1] = e1 <= e2 ? 1 : 2;
        out.form1(m - 1) = e1;
        out.form2(m - 1) = e2;
        out.values(m - 1) = std::min(e1, e2);
        out.proj_components(m - 1) = out.values(m - 1);
    }
    return out;
}

ErrorSeries kmd_error_bounds_full(const GalerkinSystem& sys, const Eigen::VectorXd& g,
                                  int n) {
    check_bound_args(sys, g, n);
    const Eigen::VectorXd q = projection_forms(sys, g, n);
    const Eigen::VectorXd p = op_norm_powers(sys, n - 1);
    const double p1 = n > 1 ? p(1) : op_norm_power(sys, 1);

    // beta_k bounds ||Q K^k P^* g||: the first-order quadratic form plus
    // the operator applied to the accumulated error at horizon k-1.
    Eigen::VectorXd beta(n + 1);
    Eigen::VectorXd err(n + 1);
    err(0) = 0.0;
    ErrorSeries out;
    out.variant = BoundVariant::FullOrder;
    out.steps.resize(n);
    out.values.resize(n);
    out.init_components = Eigen::VectorXd::Zero(n);
    out.proj_components.resize(n);
    out.chosen_form.resize(n);
    out.form1.resize(n);
    out.form2.resize(n);
    for (int m = 1; m <= n; ++m) {
        beta(m) = std::sqrt(q(m - 1)) + p1 * err(m - 1);
        double e1_sq = 0.0;
        double e2 = 0.0;
        double weight = 1.0;
        for (int j = 0; j < m; ++j) {
            e1_sq += weight * beta(m - j) * beta(m - j);
            e2 += p(j) * beta(m - j);
            weight *= p1 * p1;
        }
        const double e1 = std::sqrt(e1_sq);
        err(m) = std::min(e1, e2);
        out.steps[m - 1] = m;
        out.chosen_form[m - 1] = e1 <= e2 ? 1 : 2;
        out.form1(m - 1) = e1;
        out.form2(m - 1) = e2;
        out.values(m - 1) = err(m);
        out.proj_components(m - 1) = err(m);
    }
    return out;
}

LeastSquaresFit initialization_error(const Eigen::MatrixXd& basis_samples,
                                     const Eigen::VectorXd& w,
                                     const Eigen::VectorXd& g_samples) {
    if (basis_samples.rows() != w.size() || w.size() != g_samples.size()) {
        throw_error(ErrorCode::DimensionMismatch, "initialization_error: sample counts");
    }
    if (!basis_samples.allFinite() || !g_samples.allFinite()) {
        throw_error(ErrorCode::NonFinite, "initialization_error: non-finite samples");
    }
    const Eigen::MatrixXd wB = w.asDiagonal() * basis_samples;
    Eigen::MatrixXd Gq = basis_samples.transpose() * wB;
    Gq = 0.5 * (Gq + Gq.transpose()).eval();
    const Eigen::VectorXd b = basis_samples.transpose() * (w.asDiagonal() * g_samples);

    LeastSquaresFit fit;
    fit.coeffs = decompose_psd(Gq).solve(b);
    const Eigen::VectorXd r = g_samples - basis_samples * fit.coeffs;
    fit.error = std::sqrt(std::max(0.0, r.dot(w.asDiagonal() * r)));
    return fit;
}

LeastSquaresFit initialization_error(const Dictionary& dict, const SnapshotSet& snapshots,
                                     const Eigen::VectorXd& g_samples) {
    return initialization_error(dict.evaluate(snapshots.X), snapshots.w, g_samples);
}

PfmdQuery make_pfmd_query(const KernelSpec& kernel, const GalerkinSystem& sys,
                          const Eigen::VectorXd& x0, double g_norm,
                          const Eigen::VectorXd& g_samples) {
    if (sys.space != FunctionSpace::RKHS) {
        throw_error(ErrorCode::SpaceMismatch, "make_pfmd_query: RKHS system required");
    }
    const bool reduced = sys.basis_map.size() > 0;
    if (reduced && (sys.basis_map.rows() != sys.data_X.rows() ||
                    sys.basis_map.cols() != sys.size())) {
        throw_error(ErrorCode::InvalidArgument, "make_pfmd_query: inconsistent basis map");
    }
    if (!reduced && sys.data_X.rows() != sys.size()) {
        throw_error(ErrorCode::InvalidArgument,
                    "make_pfmd_query: system does not carry its data points");
    }
    if (x0.size() != sys.data_X.cols()) {
        throw_error(ErrorCode::DimensionMismatch, "make_pfmd_query: x0 dimension");
    }

    PfmdQuery query;
    query.x0 = x0;
    // Kernel evaluations against the data sections, pulled into the reduced
    // basis when the system is a compression of those sections.
    const Eigen::VectorXd b_full =
        eval_kernel_matrix(kernel, sys.data_X, x0.transpose()).col(0);
    query.b = reduced ? (sys.basis_map.transpose() * b_full).eval() : b_full;
    const auto dec = decompose_psd(sys.G);
    query.c = dec.solve(query.b);
    query.delta =
        std::sqrt(std::max(0.0, kernel(x0, x0) - query.c.dot(query.b)));

    if (g_norm >= 0.0) {
        query.g_norm = g_norm;
        query.g_norm_estimated = false;
    } else if (g_samples.size() == sys.data_X.rows()) {
        // Least-squares representer: ||g_hat||^2 = a^* G a with G a = g_evals.
        const Eigen::VectorXd gs =
            reduced ? (sys.basis_map.transpose() * g_samples).eval() : g_samples;
        const Eigen::VectorXd a = dec.solve(gs);
        query.g_norm = std::sqrt(std::max(0.0, a.dot(gs)));
        query.g_norm_estimated = true;
    } else {
        throw_error(ErrorCode::InvalidArgument,
                    "make_pfmd_query: supply g_norm or samples of g at the data points");
    }
    return query;
}

PfmdBounds pfmd_pointwise_bounds(const GalerkinSystem& sys, const PfmdQuery& query,
                                 int n) {
    if (sys.space != FunctionSpace::RKHS) {
        throw_error(ErrorCode::SpaceMismatch, "pfmd_pointwise_bounds: RKHS system required");
    }
    if (n < 0) throw_error(ErrorCode::InvalidArgument, "pfmd_pointwise_bounds: n >= 0");
    const Eigen::VectorXd qc = n > 0 ? projection_forms(sys, query.c, n) : Eigen::VectorXd();
    const Eigen::VectorXd p = op_norm_powers(sys, n);

    PfmdBounds out;
    out.rigorous = !query.g_norm_estimated;
    ErrorSeries& series = out.norm_bounds;
    series.variant = BoundVariant::FirstOrderMin;
    series.steps.resize(n + 1);
    series.values.resize(n + 1);
    series.init_components.resize(n + 1);
    series.proj_components.resize(n + 1);
    for (int m = 0; m <= n; ++m) {
        const double init = p(m) * query.delta;
        double proj = 0.0;
        for (int j = 0; j < m; ++j) proj += p(j) * std::sqrt(qc(m - 1 - j));
        series.steps[m] = m;
        series.init_components(m) = init;
        series.proj_components(m) = proj;
        series.values(m) = init + proj;
    }
    out.pointwise_bounds = series;
    out.pointwise_bounds.values *= query.g_norm;
    out.pointwise_bounds.init_components *= query.g_norm;
    out.pointwise_bounds.proj_components *= query.g_norm;
    return out;
}

} // namespace koopcert
