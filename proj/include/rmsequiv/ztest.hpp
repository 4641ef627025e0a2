#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "rmsequiv/data_model.hpp"
#include "rmsequiv/estimation.hpp"
#include "rmsequiv/special_functions.hpp"

namespace rmsequiv {

/// Mean and variance of R = sum Y_ij^2 / N under the random-effects model.
struct ZMoments {
    double mean_r = 0.0;
    double var_r = 0.0;
};

/// R = sum_ij y_ij^2 / N rebuilt from the sufficient statistics.
inline double r_statistic(const SummaryStats& s) {
    double total = s.sse();
    for (std::size_t i = 0; i < s.n(); ++i) {
        total += s.m()[i] * s.ybar()[i] * s.ybar()[i];
    }
    return total / static_cast<double>(s.total());
}

/// E(R) = rho^2 and
/// Var(R) = 2/N^2 sum_i [(sw2 + m_i sb2)^2 + (m_i - 1) sw2^2 + 2 m_i (sw2 + m_i sb2) mu^2].
inline ZMoments z_moments(const LmmParams& p, std::span<const int> m) {
    p.validate();
    double big_n = 0.0;
    double sum = 0.0;
    const double sw4 = p.sigma_w2 * p.sigma_w2;
    for (int mi : m) {
        const double v = p.sigma_w2 + mi * p.sigma_b2;
        sum += v * v + (mi - 1) * sw4 + 2.0 * mi * v * p.mu * p.mu;
        big_n += mi;
    }
    const double r = rms(p);
    return {r * r, 2.0 * sum / (big_n * big_n)};
}

namespace detail {

inline TestResult z_test(const SummaryStats& s, const Hypothesis& hyp, Method method,
                         NullVariance null_variance) {
    hyp.validate();
    const FitReport fit = fit_mle(s);
    const double r = r_statistic(s);
    const double wald_var = z_moments(fit.params, s.m()).var_r;

    double test_var = wald_var;
    if (method == Method::z_score) {
        LmmParams null_params;
        switch (null_variance) {
            case NullVariance::restricted: null_params = fit_reml_null(s, hyp.rho0).params; break;
            case NullVariance::constrained: null_params = fit_mle_null(s, hyp.rho0).params; break;
            case NullVariance::scaled: null_params = scale_to_rms(fit.params, hyp.rho0); break;
        }
        test_var = z_moments(null_params, s.m()).var_r;
    }

    const double z = (r - hyp.rho0 * hyp.rho0) / std::sqrt(test_var);
    const double half = std_normal_quantile(1.0 - hyp.alpha / 2.0) * std::sqrt(test_var);

    TestResult out;
    out.method = method;
    out.p_value = Probability(detail::phi(z));
    out.ci_rho2 = Interval{r - half, r + half};
    out.ci_rho = Interval{std::sqrt(std::max(0.0, r - half)), std::sqrt(std::max(0.0, r + half))};
    out.estimates = fit.params;
    return out;
}

}  // namespace detail

/// Score-type Z test: the variance of R is evaluated at parameters on the null
/// surface rho = rho0, and the same standard error gives the symmetric interval
/// for rho^2. The interval for rho truncates negative limits at zero.
inline TestResult z_score_test(const SummaryStats& s, const Hypothesis& hyp,
                               NullVariance null_variance = NullVariance::restricted) {
    return detail::z_test(s, hyp, Method::z_score, null_variance);
}

/// Wald-type Z test: variance of R at the unconstrained MLE, for both the
/// p-value and the interval.
inline TestResult z_wald_test(const SummaryStats& s, const Hypothesis& hyp) {
    return detail::z_test(s, hyp, Method::z_wald, NullVariance::constrained);
}

}  // namespace rmsequiv
