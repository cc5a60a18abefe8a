#include "koopcert/surrogate.hpp"
#include "koopcert/errors.hpp"
#include "koopcert/geometry.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace koopcert {

namespace {

// SplitMix64-style avalanche; chained over the key parts so every
// (seed, stream, k, j, i) tuple yields an independent 64-bit word.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t chain(std::uint64_t seed, std::uint64_t stream, std::uint64_t k,
                    std::uint64_t j, std::uint64_t i) {
    std::uint64_t h = mix64(seed ^ 0x6A09E667F3BCC909ULL);
    h = mix64(h ^ stream);
    h = mix64(h ^ k);
    h = mix64(h ^ j);
    h = mix64(h ^ i);
    return h;
}

double to_unit(std::uint64_t h) { return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53; }

// Standard normal via Box-Muller on two counter-derived uniforms.
double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t k,
                      std::uint64_t j, std::uint64_t i) {
    const double u1 = to_unit(chain(seed, stream, k, j, 2 * i));
    const double u2 = to_unit(chain(seed, stream, k, j, 2 * i + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

constexpr std::uint64_t kStreamCoeffs = 1;   // sample_gp_coeffs / op norms
constexpr std::uint64_t kStreamTriangle = 2; // per-(j,k) aggregation draws

// Unit Gaussian direction for the triangle-inequality expectation.
Eigen::VectorXd unit_direction(const GpSurrogate& sur, const Eigen::VectorXd& sqrt_lambda,
                               std::uint64_t k, std::uint64_t j) {
    const Eigen::Index r = sqrt_lambda.size();
    Eigen::VectorXd w(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        w(i) = sqrt_lambda(i) *
               counter_normal(sur.seed, kStreamTriangle, k, j, static_cast<std::uint64_t>(i));
    }
    const double nrm = w.norm();
    if (nrm == 0.0) {
        throw_error(ErrorCode::SingularSample, "surrogate: zero Gaussian sample");
    }
    return w / nrm;
}

void require_orthonormal(const GalerkinSystem& sys, const char* where) {
    const Eigen::Index n = sys.size();
    if ((sys.G - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-8) {
        throw_error(ErrorCode::InvalidArgument,
                    std::string(where) + ": requires an orthonormalized basis (G = I)");
    }
}

// Compression of the system (and linear functionals) onto the surrogate's
// orthonormal basis. The map is relative to the input system's coordinates.
struct Compressed {
    GalerkinSystem sys;
    Eigen::MatrixXd map; // N x r
};

Compressed compress(const GalerkinSystem& sys, const GpSurrogate& sur) {
    const auto dec = decompose_psd(sys.G);
    const Eigen::Index r = std::min<Eigen::Index>(sur.rank, dec.rank);
    Compressed out;
    if (sur.basis == GpSurrogate::Basis::PadBasis) {
        PadReduction pad = pad_truncate(sys, -1.0, std::min<Eigen::Index>(r, sys.size()));
        out.map = pad.basis;
        out.sys = std::move(pad.system);
    } else {
        out.map = dec.vectors.leftCols(r) *
                  dec.values.head(r).cwiseSqrt().cwiseInverse().asDiagonal();
        out.sys = svd_truncate(sys, r);
    }
    return out;
}

// Mean of ||K^j w|| / ||w|| for j = 0..n over the stream-1 samples.
Eigen::VectorXd expected_norm_means(const GalerkinSystem& red, const GpSurrogate& sur,
                                    int n) {
    const Eigen::Index r = red.size();
    const Eigen::Index P = std::max(1, sur.sample_count);
    const Eigen::MatrixXd W = sample_gp_coeffs(sur, P, r); // P x r
    Eigen::VectorXd means(n + 1);
    means(0) = 1.0;
    Eigen::MatrixXd V = W.transpose(); // r x P, columns K^j w_k
    Eigen::VectorXd base_norms(P);
    for (Eigen::Index k = 0; k < P; ++k) {
        base_norms(k) = V.col(k).norm();
        if (base_norms(k) == 0.0) {
            throw_error(ErrorCode::SingularSample, "surrogate: zero Gaussian sample");
        }
    }
    for (int j = 1; j <= n; ++j) {
        V = red.K * V;
        double acc = 0.0;
        for (Eigen::Index k = 0; k < P; ++k) acc += V.col(k).norm() / base_norms(k);
        means(j) = acc / static_cast<double>(P);
    }
    return means;
}

} // namespace

Eigen::VectorXd GpSurrogate::eigenvalues(Eigen::Index r) const {
    if (r < 1) throw_error(ErrorCode::InvalidArgument, "GpSurrogate: r >= 1");
    Eigen::VectorXd lambda(r);
    if (law == Law::Custom) {
        if (custom.size() < r) {
            throw_error(ErrorCode::InvalidArgument, "GpSurrogate: custom law too short");
        }
        lambda = custom.head(r);
        for (Eigen::Index j = 0; j < r; ++j) {
            if (!(lambda(j) >= 0.0) || (j > 0 && lambda(j) > lambda(j - 1))) {
                throw_error(ErrorCode::InvalidArgument,
                            "GpSurrogate: eigenvalues must be nonincreasing and >= 0");
            }
        }
        if (lambda(0) <= 0.0) {
            throw_error(ErrorCode::InvalidArgument, "GpSurrogate: zero covariance");
        }
    } else {
        // lambda_j^2 = exp(-j/tau) by default, i.e. lambda_j = exp(-j/(2 tau)).
        const double denom = squared_convention ? 2.0 * tau : tau;
        for (Eigen::Index j = 0; j < r; ++j) {
            lambda(j) = std::exp(-static_cast<double>(j + 1) / denom);
        }
    }
    return lambda;
}

Eigen::MatrixXd sample_gp_coeffs(const GpSurrogate& surrogate, Eigen::Index count,
                                 Eigen::Index r) {
    const Eigen::VectorXd sqrt_lambda = surrogate.eigenvalues(r).cwiseSqrt();
    Eigen::MatrixXd W(count, r);
    for (Eigen::Index k = 0; k < count; ++k) {
        for (Eigen::Index i = 0; i < r; ++i) {
            W(k, i) = sqrt_lambda(i) *
                      counter_normal(surrogate.seed, kStreamCoeffs,
                                     static_cast<std::uint64_t>(k), 0,
                                     static_cast<std::uint64_t>(i));
        }
    }
    return W;
}

MeanStd expected_op_norm(const GalerkinSystem& sys, int j, const GpSurrogate& surrogate) {
    if (j < 0) throw_error(ErrorCode::InvalidArgument, "expected_op_norm: j >= 0");
    require_orthonormal(sys, "expected_op_norm");
    const Eigen::Index r = sys.size();
    const Eigen::Index P = std::max(2, surrogate.sample_count);
    const Eigen::MatrixXd W = sample_gp_coeffs(surrogate, P, r);

    Eigen::MatrixXd Kj = Eigen::MatrixXd::Identity(r, r);
    for (int i = 0; i < j; ++i) Kj = sys.K * Kj;

    Eigen::VectorXd ratios(P);
    for (Eigen::Index k = 0; k < P; ++k) {
        const Eigen::VectorXd w = W.row(k).transpose();
        const double nrm = w.norm();
        if (nrm == 0.0) {
            throw_error(ErrorCode::SingularSample, "expected_op_norm: zero sample");
        }
        ratios(k) = (Kj * w).norm() / nrm;
    }
    MeanStd out;
    out.mean = ratios.mean();
    out.std = std::sqrt((ratios.array() - out.mean).square().sum() /
                        static_cast<double>(P - 1));
    return out;
}

ErrorSeries expected_kmd_errors(const GalerkinSystem& sys, const Eigen::VectorXd& g,
                                int n, const GpSurrogate& surrogate) {
    if (n < 1) throw_error(ErrorCode::InvalidArgument, "expected_kmd_errors: n >= 1");
    if (g.size() != sys.size()) {
        throw_error(ErrorCode::DimensionMismatch, "expected_kmd_errors: coefficient size");
    }
    if (g.norm() == 0.0) throw_error(ErrorCode::ZeroVector, "expected_kmd_errors: g = 0");

    const Compressed red = compress(sys, surrogate);
    const Eigen::Index r = red.sys.size();
    const Eigen::VectorXd gt = red.map.transpose() * sys.G * g;

    Eigen::MatrixXd S = red.sys.L - red.sys.K.transpose() * red.sys.K;
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::VectorXd q(n);
    Eigen::VectorXd v = gt;
    for (int i = 0; i < n; ++i) {
        q(i) = std::max(0.0, v.dot(S * v));
        if (i + 1 < n) v = red.sys.K * v;
    }

    const Eigen::VectorXd e = expected_norm_means(red.sys, surrogate, n - 1);
    const Eigen::Index P = std::max(1, surrogate.sample_count);

    ErrorSeries out;
    out.variant = BoundVariant::Expected;
    out.steps.resize(n);
    out.values.resize(n);
    out.init_components = Eigen::VectorXd::Zero(n);
    out.proj_components.resize(n);
    out.stds = Eigen::VectorXd::Zero(n);

    const bool unitary = n < 2 || std::abs(e(1) - 1.0) <= 1e-9;
    if (unitary) {
        // With unit expected norms the only relaxation is the operator-norm
        // substitution, so the expectation collapses to the sqrt-aggregated
        // first-order bound with E[K]^j in place of ||K||^j.
        for (int m = 1; m <= n; ++m) {
            double acc = 0.0;
            double weight = 1.0;
            const double e1 = n < 2 ? 1.0 : e(1);
            for (int j = 0; j < m; ++j) {
                acc += weight * q(m - 1 - j);
                weight *= e1 * e1;
            }
            out.steps[m - 1] = m;
            out.values(m - 1) = std::sqrt(acc);
            out.proj_components(m - 1) = out.values(m - 1);
        }
        return out;
    }

    // Gaussian triangle-inequality aggregation: unit directions drawn per
    // (j, k) and reused across horizons (common random numbers).
    const Eigen::VectorXd sqrt_lambda = surrogate.eigenvalues(r).cwiseSqrt();
    std::vector<Eigen::MatrixXd> dirs(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        Eigen::MatrixXd D(r, P);
        for (Eigen::Index k = 0; k < P; ++k) {
            D.col(k) = unit_direction(surrogate, sqrt_lambda,
                                      static_cast<std::uint64_t>(k),
                                      static_cast<std::uint64_t>(j));
        }
        dirs[static_cast<std::size_t>(j)] = std::move(D);
    }

    for (int m = 1; m <= n; ++m) {
        Eigen::VectorXd vals(P);
        for (Eigen::Index k = 0; k < P; ++k) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(r);
            for (int j = 0; j < m; ++j) {
                const double alpha = e(j) * std::sqrt(q(m - 1 - j));
                acc += alpha * dirs[static_cast<std::size_t>(j)].col(k);
            }
            vals(k) = acc.norm();
        }
        out.steps[m - 1] = m;
        out.values(m - 1) = vals.mean();
        out.proj_components(m - 1) = out.values(m - 1);
        if (P > 1) {
            out.stds(m - 1) = std::sqrt((vals.array() - vals.mean()).square().sum() /
                                        static_cast<double>(P - 1));
        }
    }
    return out;
}

namespace {

double expected_functional_from_evals(const Eigen::MatrixXd& map,
                                      const GpSurrogate& surrogate,
                                      const Eigen::VectorXd& g_evals) {
    const Eigen::Index r = map.cols();
    const Eigen::VectorXd t = map.transpose() * g_evals;
    const Eigen::Index P = std::max(1, surrogate.sample_count);
    const Eigen::MatrixXd W = sample_gp_coeffs(surrogate, P, r);
    double acc = 0.0;
    for (Eigen::Index k = 0; k < P; ++k) {
        const double nrm = W.row(k).norm();
        if (nrm == 0.0) {
            throw_error(ErrorCode::SingularSample, "expected_functional: zero sample");
        }
        acc += std::abs(W.row(k).dot(t)) / nrm;
    }
    return acc / static_cast<double>(P);
}

} // namespace

double expected_functional(const std::function<double(const Eigen::VectorXd&)>& g,
                           const GalerkinSystem& sys, const GpSurrogate& surrogate) {
    if (sys.space != FunctionSpace::RKHS) {
        throw_error(ErrorCode::SpaceMismatch, "expected_functional: RKHS system required");
    }
    if (sys.data_X.rows() == 0) {
        throw_error(ErrorCode::InvalidArgument,
                    "expected_functional: system does not carry its data points");
    }
    Eigen::VectorXd g_evals(sys.data_X.rows());
    for (Eigen::Index j = 0; j < g_evals.size(); ++j) {
        g_evals(j) = g(sys.data_X.row(j).transpose());
    }
    const Compressed red = compress(sys, surrogate);
    // Compose with the system's own section map when it is already reduced.
    const Eigen::MatrixXd map =
        sys.basis_map.size() > 0 ? (sys.basis_map * red.map).eval() : red.map;
    return expected_functional_from_evals(map, surrogate, g_evals);
}

PfmdExpected expected_pfmd_errors(const GalerkinSystem& sys, const PfmdQuery& query,
                                  int n, const GpSurrogate& surrogate,
                                  const Eigen::VectorXd& g_evals) {
    if (sys.space != FunctionSpace::RKHS) {
        throw_error(ErrorCode::SpaceMismatch, "expected_pfmd_errors: RKHS system required");
    }
    if (n < 0) throw_error(ErrorCode::InvalidArgument, "expected_pfmd_errors: n >= 0");

    const Compressed red = compress(sys, surrogate);
    const Eigen::Index r = red.sys.size();
    const Eigen::VectorXd ct = red.map.transpose() * sys.G * query.c;

    Eigen::MatrixXd S = red.sys.L - red.sys.K.transpose() * red.sys.K;
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::VectorXd qc = Eigen::VectorXd::Zero(std::max(n, 1));
    Eigen::VectorXd v = ct;
    for (int i = 0; i < n; ++i) {
        qc(i) = std::max(0.0, v.dot(S * v));
        if (i + 1 < n) v = red.sys.K * v;
    }

    const Eigen::VectorXd e = expected_norm_means(red.sys, surrogate, n);
    const Eigen::Index P = std::max(1, surrogate.sample_count);

    PfmdExpected out;
    ErrorSeries& series = out.norm_series;
    series.variant = BoundVariant::Expected;
    series.steps.resize(n + 1);
    series.values.resize(n + 1);
    series.init_components.resize(n + 1);
    series.proj_components.resize(n + 1);
    series.stds = Eigen::VectorXd::Zero(n + 1);

    const bool unitary = n < 1 || std::abs(e(1) - 1.0) <= 1e-9;
    for (int m = 0; m <= n; ++m) {
        const double init = e(m) * query.delta;
        double proj = 0.0;
        for (int j = 0; j < m; ++j) proj += e(j) * std::sqrt(qc(m - 1 - j));
        series.steps[m] = m;
        series.init_components(m) = init;
        series.proj_components(m) = proj;
        series.values(m) = init + proj; // overwritten below unless unitary
    }

    if (!unitary) {
        const Eigen::VectorXd sqrt_lambda = surrogate.eigenvalues(r).cwiseSqrt();
        std::vector<Eigen::MatrixXd> dirs(static_cast<std::size_t>(n + 1));
        for (int j = 0; j <= n; ++j) {
            Eigen::MatrixXd D(r, P);
            for (Eigen::Index k = 0; k < P; ++k) {
                D.col(k) = unit_direction(surrogate, sqrt_lambda,
                                          static_cast<std::uint64_t>(k),
                                          static_cast<std::uint64_t>(j));
            }
            dirs[static_cast<std::size_t>(j)] = std::move(D);
        }
        for (int m = 0; m <= n; ++m) {
            Eigen::VectorXd vals(P);
            for (Eigen::Index k = 0; k < P; ++k) {
                Eigen::VectorXd acc =
                    (e(m) * query.delta) * dirs[static_cast<std::size_t>(m)].col(k);
                for (int j = 0; j < m; ++j) {
                    const double alpha = e(j) * std::sqrt(qc(m - 1 - j));
                    acc += alpha * dirs[static_cast<std::size_t>(j)].col(k);
                }
                vals(k) = acc.norm();
            }
            series.values(m) = vals.mean();
            if (P > 1) {
                series.stds(m) = std::sqrt((vals.array() - vals.mean()).square().sum() /
                                           static_cast<double>(P - 1));
            }
        }
    }

    double scale = query.g_norm;
    if (g_evals.size() > 0) {
        if (g_evals.size() != sys.data_X.rows()) {
            throw_error(ErrorCode::DimensionMismatch,
                        "expected_pfmd_errors: g sample count");
        }
        const Eigen::MatrixXd map =
            sys.basis_map.size() > 0 ? (sys.basis_map * red.map).eval() : red.map;
        scale = expected_functional_from_evals(map, surrogate, g_evals);
    }
    out.pointwise_series = series;
    out.pointwise_series.values *= scale;
    out.pointwise_series.init_components *= scale;
    out.pointwise_series.proj_components *= scale;
    out.pointwise_series.stds *= scale;
    return out;
}

} // namespace koopcert
