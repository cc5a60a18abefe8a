#pragma once

#include "koopcert/certify.hpp"
#include "koopcert/galerkin.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>

namespace koopcert {

/// Gaussian random-element surrogate defined by a Karhunen-Loeve
/// eigenvalue law over an orthonormalized dictionary basis. All sampling
/// is counter-based (keyed per sample and mode), so results are
/// deterministic and independent of evaluation order.
struct GpSurrogate {
    enum class Law { ExpDecay, Custom };
    enum class Basis { SvdOfG, PadBasis };

    Law law = Law::ExpDecay;
    double tau = 1000.0;
    // Default convention reads the decay law as lambda_j^2 = exp(-j/tau);
    // set false for lambda_j = exp(-j/tau).
    bool squared_convention = true;
    Eigen::VectorXd custom; // Custom law: lambda_1 >= lambda_2 >= ... > 0

    int sample_count = 100; // P
    std::uint64_t seed = 0;
    Basis basis = Basis::SvdOfG;
    Eigen::Index rank = 200; // r, clamped to the numerical rank of G

    /// lambda_1..lambda_r of the covariance operator.
    Eigen::VectorXd eigenvalues(Eigen::Index r) const;
};

/// count x r matrix whose row k is (sqrt(lambda_1) w_{k,1}, ...,
/// sqrt(lambda_r) w_{k,r}) with w i.i.d. standard normal keyed by
/// (seed, k, i); rows are reproducible independently of count.
Eigen::MatrixXd sample_gp_coeffs(const GpSurrogate& surrogate, Eigen::Index count,
                                 Eigen::Index r);

/// Monte Carlo estimate of E[||K^j w|| / ||w||] in a reduced orthonormal
/// basis (requires G = I), with its sample standard deviation.
struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};
MeanStd expected_op_norm(const GalerkinSystem& sys, int j, const GpSurrogate& surrogate);

/// Expected L2 errors of the KMD with per-horizon standard deviations.
/// The system is compressed to the surrogate basis first. When the
/// expected one-step norm is 1 (unitary reduced operator) the expectation
/// collapses to the strict first-order bound with operator norms replaced
/// by expected norms; otherwise the Gaussian triangle-inequality
/// aggregation is used.
ErrorSeries expected_kmd_errors(const GalerkinSystem& sys, const Eigen::VectorXd& g,
                                int n, const GpSurrogate& surrogate);

/// E[|<g, P*P zeta>| / ||zeta||], expanded as a weighted sum of pointwise
/// evaluations of g at the data points (RKHS systems only).
double expected_functional(const std::function<double(const Eigen::VectorXd&)>& g,
                           const GalerkinSystem& sys, const GpSurrogate& surrogate);

/// Expected RKHS-norm and pointwise errors of the PFMD. The pointwise
/// series is the norm series scaled by E[g] when samples of g at the data
/// points are given, by query.g_norm otherwise.
struct PfmdExpected {
    ErrorSeries norm_series;
    ErrorSeries pointwise_series;
};
PfmdExpected expected_pfmd_errors(const GalerkinSystem& sys, const PfmdQuery& query,
                                  int n, const GpSurrogate& surrogate,
                                  const Eigen::VectorXd& g_evals = Eigen::VectorXd());

} // namespace koopcert
