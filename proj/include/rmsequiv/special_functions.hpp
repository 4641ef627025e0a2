#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rmsequiv/error.hpp"
#include "rmsequiv/random_stream.hpp"

namespace rmsequiv {

/// A probability in [0, 1]. Converts implicitly to double for arithmetic.
class Probability {
  public:
    constexpr Probability() = default;
    explicit Probability(double value) : value_(value) {
        if (!(value >= 0.0 && value <= 1.0)) {
            throw DomainError("probability outside [0, 1]: " + std::to_string(value));
        }
    }
    [[nodiscard]] constexpr double value() const noexcept { return value_; }
    constexpr operator double() const noexcept { return value_; }  // NOLINT

  private:
    double value_ = 0.0;
};

namespace detail {

// Phi(x) without the finiteness check; used in hot loops.
inline double phi(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

}  // namespace detail

inline Probability std_normal_cdf(double x) {
    if (!std::isfinite(x)) {
        throw DomainError("std_normal_cdf: non-finite argument");
    }
    return Probability(detail::phi(x));
}

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Halley step against erfc, which brings the result to near machine precision.
inline double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("std_normal_quantile: p must lie in (0, 1)");
    }
    constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                            -2.759285104469687e+02, 1.383577518672690e+02,
                            -3.066479806614716e+01, 2.506628277459239e+00};
    constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                            -1.556989798598866e+02, 6.680131188771972e+01,
                            -1.328068155288572e+01};
    constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                            -2.400758277161838e+00, -2.549732539343734e+00,
                            4.374664141464968e+00,  2.938163982698783e+00};
    constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                            2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x = 0.0;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement, on the upper tail for p > 1/2 (1 - p is exact there).
    const double e = p > 0.5 ? 0.5 * std::erfc(x / std::numbers::sqrt2) - (1.0 - p) : p - detail::phi(x);
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x + u / (1.0 - 0.5 * x * u);
}

/// Gamma(shape, scale 1) variate by Marsaglia & Tsang (2000); shapes below one
/// use the boost Gamma(a) = Gamma(a + 1) * U^(1/a).
inline double gamma_sample(double shape, RandomStream& rng) {
    if (!(shape > 0.0) || !std::isfinite(shape)) {
        throw DomainError("gamma_sample: shape must be positive and finite");
    }
    double boost = 1.0;
    if (shape < 1.0) {
        boost = std::pow(rng.uniform(), 1.0 / shape);
        shape += 1.0;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) {
            return boost * d * v;
        }
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
            return boost * d * v;
        }
    }
}

/// One draw from the chi-square distribution with `df` degrees of freedom.
inline double chisq_sample(double df, RandomStream& rng) {
    if (!(df > 0.0)) {
        throw DomainError("chisq_sample: df must be positive");
    }
    return 2.0 * gamma_sample(0.5 * df, rng);
}

namespace detail {

// P(W > x) for W = Z^2, Z ~ N(sqrt(lambda), 1); lambda >= 0 assumed.
inline double nc_chisq1_sf_unchecked(double x, double lambda) noexcept {
    if (x <= 0.0) {
        return 1.0;
    }
    const double delta = std::sqrt(lambda);
    const double root = std::sqrt(x);
    return phi(delta - root) + phi(-delta - root);
}

}  // namespace detail

/// Survival function of the noncentral chi-square with one degree of freedom
/// and noncentrality `lambda`.
inline Probability nc_chisq1_sf(double x, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw DomainError("nc_chisq1_sf: lambda must be finite and non-negative");
    }
    if (std::isnan(x)) {
        throw DomainError("nc_chisq1_sf: x is NaN");
    }
    return Probability(std::min(1.0, detail::nc_chisq1_sf_unchecked(x, lambda)));
}

}  // namespace rmsequiv
