#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "rmsequiv/data_model.hpp"
#include "rmsequiv/detail/minimize.hpp"
#include "rmsequiv/error.hpp"

namespace rmsequiv {

struct FitReport {
    LmmParams params;
    double neg2loglik = 0.0;
    bool converged = false;
    bool boundary_sigma_b2 = false;
};

/// Thrown when an optimizer hits its iteration cap; carries the best point found.
class FitError : public NumericalError {
  public:
    FitError(const std::string& what, FitReport best) : NumericalError(what), best_(best) {}
    [[nodiscard]] const FitReport& best() const noexcept { return best_; }

  private:
    FitReport best_;
};

/// -2 log-likelihood of the one-way random-effects model in terms of the
/// sufficient statistics, with the 2*pi constant dropped:
///
///   (N-n) log sw2 + sse/sw2 + sum_i [log(sw2 + m_i sb2) + m_i (ybar_i - mu)^2 / (sw2 + m_i sb2)]
inline double neg2ll(const SummaryStats& s, const LmmParams& p) {
    p.validate();
    double total = static_cast<double>(s.within_df()) * std::log(p.sigma_w2) + s.sse() / p.sigma_w2;
    for (std::size_t i = 0; i < s.n(); ++i) {
        const double v = p.sigma_w2 + s.m()[i] * p.sigma_b2;
        const double d = s.ybar()[i] - p.mu;
        total += std::log(v) + s.m()[i] * d * d / v;
    }
    return total;
}

/// Generalized-least-squares mean at fixed variances: sum W_i ybar_i / sum W_i,
/// W_i = 1 / (sb2 + sw2 / m_i).
inline double profile_mu(const SummaryStats& s, double sigma_w2, double sigma_b2) {
    if (!(sigma_w2 > 0.0)) {
        throw DomainError("profile_mu: sigma_w2 must be positive");
    }
    if (!(sigma_b2 >= 0.0)) {
        throw DomainError("profile_mu: sigma_b2 must be non-negative");
    }
    double sw = 0.0;
    double swy = 0.0;
    for (std::size_t i = 0; i < s.n(); ++i) {
        const double w = 1.0 / (sigma_b2 + sigma_w2 / s.m()[i]);
        sw += w;
        swy += w * s.ybar()[i];
    }
    return swy / sw;
}

namespace detail {

// Range of log(sb2 / sw2) scanned by the optimizers. The ratio is scale free,
// so fixed limits work for data in any unit.
inline constexpr double log_ratio_lo = -25.0;
inline constexpr double log_ratio_hi = 25.0;
inline constexpr int log_ratio_grid = 101;

// Quantities that depend on the variance ratio g = sb2 / sw2 only:
// weights m_i / (1 + m_i g), the weighted mean, and sum log(1 + m_i g).
struct RatioProfile {
    double mu = 0.0;
    double sum_log = 0.0;

    // sum_i w_i (ybar_i - c)^2 for arbitrary centre c.
    [[nodiscard]] static double weighted_ss(const SummaryStats& s, double ratio, double centre) {
        double total = 0.0;
        for (std::size_t i = 0; i < s.n(); ++i) {
            const double w = s.m()[i] / (1.0 + s.m()[i] * ratio);
            const double d = s.ybar()[i] - centre;
            total += w * d * d;
        }
        return total;
    }

    static RatioProfile at(const SummaryStats& s, double ratio) {
        RatioProfile out;
        double sw = 0.0;
        double swy = 0.0;
        for (std::size_t i = 0; i < s.n(); ++i) {
            const double w = s.m()[i] / (1.0 + s.m()[i] * ratio);
            sw += w;
            swy += w * s.ybar()[i];
            out.sum_log += std::log1p(s.m()[i] * ratio);
        }
        out.mu = swy / sw;
        return out;
    }
};

// Unconstrained objective with mu and sw2 profiled out analytically.
struct ProfiledFit {
    double value;
    LmmParams params;
};

inline ProfiledFit profiled_at_ratio(const SummaryStats& s, double ratio) {
    const auto rp = RatioProfile::at(s, ratio);
    const double big_n = static_cast<double>(s.total());
    const double q = s.sse() + RatioProfile::weighted_ss(s, ratio, rp.mu);
    const double sw2 = q / big_n;
    return {big_n * std::log(sw2) + big_n + rp.sum_log, LmmParams{rp.mu, sw2, ratio * sw2}};
}

inline void require_positive_sse(const SummaryStats& s) {
    if (!(s.sse() > 0.0)) {
        throw DegenerateDataError(
            "degenerate within-subject variance: sse = 0, the likelihood is unbounded");
    }
}

}  // namespace detail

/// Maximum-likelihood fit of (mu, sw2, sb2).
///
/// mu and sw2 have closed forms once the variance ratio g = sb2/sw2 is fixed,
/// so the search is one-dimensional over log g (grid scan + Brent), followed by
/// a comparison with the sb2 = 0 boundary.
inline FitReport fit_mle(const SummaryStats& s) {
    detail::require_positive_sse(s);
    auto objective = [&](double log_ratio) {
        return detail::profiled_at_ratio(s, std::exp(log_ratio)).value;
    };
    const auto interior = detail::grid_brent_minimize(
        objective, detail::log_ratio_lo, detail::log_ratio_hi, detail::log_ratio_grid);
    const auto boundary = detail::profiled_at_ratio(s, 0.0);
    const auto inner = detail::profiled_at_ratio(s, std::exp(interior.x));

    FitReport report;
    report.converged = interior.converged;
    if (boundary.value <= inner.value) {
        report.params = boundary.params;
        report.boundary_sigma_b2 = true;
    } else {
        report.params = inner.params;
    }
    report.neg2loglik = neg2ll(s, report.params);
    if (!report.converged) {
        throw FitError("fit_mle: optimizer did not converge", report);
    }
    return report;
}

/// How null-hypothesis parameters for the score-type variance are obtained.
///   restricted  - constrained fit of the restricted (REML-type) criterion
///   constrained - constrained maximum likelihood
///   scaled      - unconstrained MLE rescaled onto the null surface
enum class NullVariance { restricted, constrained, scaled };

/// Objective minimized by the constrained fit. `restricted` adds the REML
/// adjustment log(sum_i W_i), W_i = 1 / (sb2 + sw2 / m_i), to -2 log L.
enum class Likelihood { full, restricted };

/// Proportionally rescales the unconstrained estimates so that
/// mu^2 + sw2 + sb2 = rho0^2.
inline LmmParams scale_to_rms(const LmmParams& p, double rho0) {
    if (!(rho0 > 0.0)) {
        throw DomainError("scale_to_rms: rho0 must be positive");
    }
    const double factor = rho0 * rho0 / (p.mu * p.mu + p.sigma_w2 + p.sigma_b2);
    return {p.mu * std::sqrt(factor), p.sigma_w2 * factor, p.sigma_b2 * factor};
}

/// Fit on the null surface mu^2 + sw2 + sb2 = rho0^2.
///
/// Nested search: the outer variable is the ratio g = sb2/sw2, the inner one
/// the share v = sw2 (1 + g) / rho0^2 of rho0^2 taken by the variances; mu is
/// then determined up to sign, which follows the unconstrained estimate (both
/// signs are tried when that estimate is zero). For `Likelihood::restricted`
/// the reported neg2loglik is the restricted criterion.
inline FitReport fit_constrained(const SummaryStats& s, double rho0, Likelihood kind) {
    if (!(rho0 > 0.0) || !std::isfinite(rho0)) {
        throw DomainError("constrained fit: rho0 must be positive and finite");
    }
    const FitReport free_fit = fit_mle(s);
    if (kind == Likelihood::full && std::abs(rms(free_fit.params) - rho0) <= 1e-12 * rho0) {
        return free_fit;
    }

    const double rho2 = rho0 * rho0;
    const double big_n = static_cast<double>(s.total());
    bool converged = true;

    auto restricted_term = [&](const LmmParams& p) {
        double sum_w = 0.0;
        for (int m : s.m()) {
            sum_w += 1.0 / (p.sigma_b2 + p.sigma_w2 / m);
        }
        return sum_w;
    };
    auto params_at = [&](double ratio, double share, double sign) {
        const double sw2 = share * rho2 / (1.0 + ratio);
        const double mu = sign * std::sqrt(std::max(0.0, rho2 * (1.0 - share)));
        return LmmParams{mu, sw2, ratio * sw2};
    };
    // Same reduction as the free fit: with g fixed, the objective in sw2 is
    // N log sw2 + sum log(1 + m_i g) + (sse + sum w_i (ybar_i - mu)^2) / sw2.
    auto value_at = [&](double ratio, double share, double sign) {
        const auto p = params_at(ratio, share, sign);
        double sum_log = 0.0;
        for (int m : s.m()) {
            sum_log += std::log1p(m * ratio);
        }
        const double q = s.sse() + detail::RatioProfile::weighted_ss(s, ratio, p.mu);
        double value = big_n * std::log(p.sigma_w2) + sum_log + q / p.sigma_w2;
        if (kind == Likelihood::restricted) {
            value += std::log(restricted_term(p));
        }
        return value;
    };

    struct Best {
        double value = std::numeric_limits<double>::infinity();
        LmmParams params;
    };

    auto best_share = [&](double ratio, double sign) {
        auto f = [&](double log_share) { return value_at(ratio, std::exp(log_share), sign); };
        const auto m = detail::grid_brent_minimize(f, -23.0, 0.0, 47);
        converged = converged && m.converged;
        Best b{m.value, params_at(ratio, std::exp(m.x), sign)};
        const double at_one = value_at(ratio, 1.0, sign);
        if (at_one <= b.value) {
            b = Best{at_one, params_at(ratio, 1.0, sign)};
        }
        return b;
    };

    auto best_for_sign = [&](double sign) {
        auto outer = [&](double log_ratio) { return best_share(std::exp(log_ratio), sign).value; };
        const auto m = detail::grid_brent_minimize(outer, detail::log_ratio_lo,
                                                   detail::log_ratio_hi, 51);
        converged = converged && m.converged;
        Best b = best_share(std::exp(m.x), sign);
        Best edge = best_share(0.0, sign);
        return edge.value <= b.value ? edge : b;
    };

    const double mu_hat = free_fit.params.mu;
    Best best;
    if (std::abs(mu_hat) < 1e-12) {
        const Best pos = best_for_sign(1.0);
        const Best neg = best_for_sign(-1.0);
        best = neg.value < pos.value ? neg : pos;
    } else {
        best = best_for_sign(mu_hat > 0.0 ? 1.0 : -1.0);
    }

    FitReport report;
    report.params = best.params;
    report.neg2loglik = best.value;
    report.boundary_sigma_b2 = best.params.sigma_b2 == 0.0;
    report.converged = converged;
    if (!converged) {
        throw FitError("constrained fit: optimizer did not converge", report);
    }
    return report;
}

/// Maximum-likelihood fit subject to mu^2 + sw2 + sb2 = rho0^2.
inline FitReport fit_mle_null(const SummaryStats& s, double rho0) {
    return fit_constrained(s, rho0, Likelihood::full);
}

/// Restricted-likelihood fit subject to mu^2 + sw2 + sb2 = rho0^2.
inline FitReport fit_reml_null(const SummaryStats& s, double rho0) {
    return fit_constrained(s, rho0, Likelihood::restricted);
}

}  // namespace rmsequiv
