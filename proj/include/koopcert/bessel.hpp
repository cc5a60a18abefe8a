#pragma once

namespace koopcert {

/// Modified Bessel function of the second kind K_nu(x) for real order
/// nu >= 0 and x > 0.
///
/// Uses the Temme power series for x <= 2 (stable for all |mu| <= 1/2,
/// including near-integer orders) and a Steed continued fraction for
/// x > 2, followed by upward recurrence in the order. Relative accuracy
/// is better than 1e-10 for nu in [0, 10] and x in [1e-3, 50].
/// Throws DomainError for x <= 0 or nu < 0. Overflow returns +inf.
double bessel_k(double nu, double x);

} // namespace koopcert
