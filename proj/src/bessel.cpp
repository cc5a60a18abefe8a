#include "koopcert/bessel.hpp"
#include "koopcert/errors.hpp"

#include <cmath>
#include <limits>

namespace koopcert {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 10000;

// Coefficients a_k of 1/Gamma(1+t) = sum a_k t^k (A&S 6.1.34).
constexpr double kInvGammaA1 = 0.57721566490153286061;
constexpr double kInvGammaA3 = -0.04200263503409523553;
constexpr double kInvGammaA5 = -0.04219773455554433675;
constexpr double kInvGammaA7 = 0.00721894324666309954;

// gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2*mu), continuous at mu = 0.
double temme_gam1(double mu) {
    if (std::abs(mu) < 1e-3) {
        const double m2 = mu * mu;
        return -(kInvGammaA1 + m2 * (kInvGammaA3 + m2 * (kInvGammaA5 + m2 * kInvGammaA7)));
    }
    return (1.0 / std::tgamma(1.0 - mu) - 1.0 / std::tgamma(1.0 + mu)) / (2.0 * mu);
}

// Temme series for K_mu(x) and K_{mu+1}(x), |mu| <= 1/2, 0 < x <= 2.
void bessel_k_series(double mu, double x, double& k_mu, double& k_mu1) {
    const double x2 = 0.5 * x;
    const double pimu = M_PI * mu;
    const double fact = (std::abs(pimu) < kEps) ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = (std::abs(e) < kEps) ? 1.0 : std::sinh(e) / e;
    const double gam1 = temme_gam1(mu);
    const double gampl = 1.0 / std::tgamma(1.0 + mu);
    const double gammi = 1.0 / std::tgamma(1.0 - mu);
    const double gam2 = 0.5 * (gampl + gammi);

    double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / gampl;
    double q = 0.5 / (e * gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
        ff = (i * ff + p + q) / (i * i - mu * mu);
        c *= d / i;
        p /= (i - mu);
        q /= (i + mu);
        const double del = c * ff;
        sum += del;
        sum1 += c * (p - i * ff);
        if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    k_mu = sum;
    k_mu1 = sum1 * (2.0 / x);
}

// Steed's continued fraction CF2 for K_mu(x) and K_{mu+1}(x), |mu| <= 1/2,
// x > 2 (Thompson-Barnett).
void bessel_k_cf2(double mu, double x, double& k_mu, double& k_mu1) {
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu * mu;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i <= kMaxIter; ++i) {
        a -= 2 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < kEps) break;
    }
    h = a1 * h;
    k_mu = std::sqrt(M_PI / (2.0 * x)) * std::exp(-x) / s;
    k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
}

} // namespace

double bessel_k(double nu, double x) {
    if (!(x > 0.0)) {
        throw_error(ErrorCode::DomainError, "bessel_k: requires x > 0");
    }
    if (!(nu >= 0.0)) {
        throw_error(ErrorCode::DomainError, "bessel_k: requires nu >= 0");
    }

    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl; // |mu| <= 1/2

    double k_mu, k_mu1;
    if (x <= 2.0) {
        bessel_k_series(mu, x, k_mu, k_mu1);
    } else {
        bessel_k_cf2(mu, x, k_mu, k_mu1);
    }

    // Upward recurrence K_{m+1} = (2m/x) K_m + K_{m-1} (stable for K).
    const double two_over_x = 2.0 / x;
    for (int i = 1; i <= nl; ++i) {
        const double k_next = (mu + i) * two_over_x * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = k_next;
    }
    return k_mu;
}

} // namespace koopcert
