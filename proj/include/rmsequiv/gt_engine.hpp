#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rmsequiv/data_model.hpp"
#include "rmsequiv/detail/roots.hpp"
#include "rmsequiv/error.hpp"
#include "rmsequiv/estimation.hpp"
#include "rmsequiv/parallel.hpp"
#include "rmsequiv/random_stream.hpp"
#include "rmsequiv/special_functions.hpp"

namespace rmsequiv {

/// One Monte Carlo realization of the generalized pivots (Q_w, Q_b) together
/// with the constants of the conditional law of Q_mu given them:
/// sqrt(Q_mu) ~ N(ytilde, 1 / sum_wtilde).
struct PivotalDraw {
    double qw = 0.0;
    double qb = 0.0;
    double s = 0.0;  // qw + qb
    double sum_wtilde = 0.0;
    double ytilde = 0.0;
};

struct GtConfig {
    std::size_t B = 10000;
    std::uint64_t seed = 0;
    double quantile_tol = 1e-8;
    unsigned parallelism = 1;  // 0 selects default_parallelism()

    void validate() const {
        if (B < 100) {
            throw DomainError("GtConfig: B must be at least 100");
        }
        if (!(quantile_tol > 0.0)) {
            throw DomainError("GtConfig: quantile_tol must be positive");
        }
    }
};

/// Weighted between-subject sum of squares sum_i W_i (ybar_i - Ybar_W)^2 with
/// W_i = 1 / (sigma_b2 + qw / m_i) and Ybar_W the W-weighted mean.
inline double ssr_at(double sigma_b2, std::span<const double> ybar, std::span<const int> m,
                     double qw) noexcept {
    double sw = 0.0;
    double swy = 0.0;
    for (std::size_t i = 0; i < ybar.size(); ++i) {
        const double w = 1.0 / (sigma_b2 + qw / m[i]);
        sw += w;
        swy += w * ybar[i];
    }
    const double centre = swy / sw;
    double ss = 0.0;
    for (std::size_t i = 0; i < ybar.size(); ++i) {
        const double d = ybar[i] - centre;
        ss += d * d / (sigma_b2 + qw / m[i]);
    }
    return ss;
}

/// Inverts ssr_at in sigma_b2. Targets at or above ssr_at(0) are truncated to
/// the boundary and give exactly 0; this also covers identical ybar, where the
/// sum of squares vanishes for every sigma_b2.
inline double solve_qb(std::span<const double> ybar, std::span<const int> m, double qw,
                       double ssr_target) {
    if (!(qw > 0.0)) {
        throw DomainError("solve_qb: qw must be positive");
    }
    if (!(ssr_target >= 0.0)) {
        throw DomainError("solve_qb: ssr_target must be non-negative");
    }
    auto f = [&](double sb2) { return ssr_at(sb2, ybar, m, qw) - ssr_target; };
    const double f0 = f(0.0);
    if (f0 <= 0.0) {
        return 0.0;
    }
    double hi = 1.0;
    double fhi = f(hi);
    double lo = 0.0;
    double flo = f0;
    while (fhi > 0.0) {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        if (!std::isfinite(hi)) {
            throw NumericalError("solve_qb: failed to bracket the root");
        }
        fhi = f(hi);
    }
    return detail::brent_root(f, lo, hi, flo, fhi,
                              detail::RootTolerance{.rel_x = 1e-12, .abs_x = 0.0});
}

namespace detail {

inline void require_nondegenerate(const SummaryStats& s) {
    if (!(s.sse() > 0.0)) {
        throw DegenerateDataError(
            "degenerate within-subject variance: sse = 0, Q_w is undefined");
    }
}

inline PivotalDraw complete_draw(const SummaryStats& s, double qw, double qb) noexcept {
    PivotalDraw d;
    d.qw = qw;
    d.qb = qb;
    d.s = qw + qb;
    double swy = 0.0;
    for (std::size_t i = 0; i < s.n(); ++i) {
        const double w = 1.0 / (qb + qw / s.m()[i]);
        d.sum_wtilde += w;
        swy += w * s.ybar()[i];
    }
    d.ytilde = swy / d.sum_wtilde;
    return d;
}

inline PivotalDraw draw_pivotal_unchecked(const SummaryStats& s, RandomStream& rng) {
    const double qw = s.sse() / chisq_sample(static_cast<double>(s.within_df()), rng);
    const double ssr = chisq_sample(static_cast<double>(s.n() - 1), rng);
    const double qb = solve_qb(s.ybar(), s.m(), qw, ssr);
    return complete_draw(s, qw, qb);
}

inline double conditional_exceed_unchecked(const PivotalDraw& d, double q) noexcept {
    if (q <= d.s) {
        return 1.0;
    }
    return nc_chisq1_sf_unchecked(d.sum_wtilde * (q - d.s), d.ytilde * d.ytilde * d.sum_wtilde);
}

}  // namespace detail

/// Draws (Q_w, Q_b): Q_w = sse / chi2_{N-n}, then Q_b solves
/// ssr_at(Q_b; ybar, m, Q_w) = chi2_{n-1}.
inline PivotalDraw draw_pivotal(const SummaryStats& s, RandomStream& rng) {
    detail::require_nondegenerate(s);
    return detail::draw_pivotal_unchecked(s, rng);
}

/// Pr(Q >= q | Q_w, Q_b), with Q_mu integrated out through the noncentral
/// chi-square(1) tail.
inline Probability conditional_exceed(const PivotalDraw& d, double q) {
    return Probability(std::min(1.0, detail::conditional_exceed_unchecked(d, q)));
}

/// B pivotal draws for one data set. Draw k (k = 1..B) is generated from
/// `base.substream(k)`, so the sample is identical for any parallelism.
class PivotalSample {
  public:
    static PivotalSample generate(const SummaryStats& s, const RandomStream& base, std::size_t B,
                                  unsigned parallelism = 1) {
        detail::require_nondegenerate(s);
        PivotalSample out;
        out.draws_.resize(B);
        parallel_for(B, parallelism, [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k) {
                RandomStream rng = base.substream(k + 1);
                out.draws_[k] = detail::draw_pivotal_unchecked(s, rng);
            }
        });
        return out;
    }

    [[nodiscard]] std::span<const PivotalDraw> draws() const noexcept { return draws_; }
    [[nodiscard]] std::size_t size() const noexcept { return draws_.size(); }

    /// (1/B) sum_k Pr(Q >= q | draw k), summed in draw order.
    [[nodiscard]] double exceed(double q) const noexcept {
        double total = 0.0;
        for (const auto& d : draws_) {
            total += detail::conditional_exceed_unchecked(d, q);
        }
        return total / static_cast<double>(draws_.size());
    }

    /// Averaged conditional CDF F(q) = 1 - exceed(q).
    [[nodiscard]] double cdf(double q) const noexcept { return 1.0 - exceed(q); }

    /// Upper end of a bracket on which F rises from 0 to (numerically) 1.
    [[nodiscard]] double upper_bracket() const noexcept {
        double max_s = 0.0;
        double max_abs_y = 0.0;
        double min_w = std::numeric_limits<double>::infinity();
        for (const auto& d : draws_) {
            max_s = std::max(max_s, d.s);
            max_abs_y = std::max(max_abs_y, std::abs(d.ytilde));
            min_w = std::min(min_w, d.sum_wtilde);
        }
        const double reach = max_abs_y + 8.0 / std::sqrt(min_w);
        return max_s + reach * reach;
    }

    /// Solves F(q) = prob on [0, upper_bracket()] to |F(q) - prob| <= tol.
    [[nodiscard]] double quantile(double prob, double tol) const {
        if (!(prob > 0.0 && prob < 1.0)) {
            throw DomainError("PivotalSample::quantile: prob must lie in (0, 1)");
        }
        const double hi = upper_bracket();
        auto g = [&](double q) { return cdf(q) - prob; };
        const double g_lo = -prob;  // F(0) = 0 because every s_k > 0
        const double g_hi = g(hi);
        if (g_hi < 0.0) {
            throw NumericalError("PivotalSample::quantile: bracket does not reach target probability");
        }
        return detail::brent_root(g, 0.0, hi, g_lo, g_hi,
                                  detail::RootTolerance{.rel_x = 0.0, .abs_x = 0.0, .abs_f = tol});
    }

    /// Generalized confidence interval for rho at confidence 1 - alpha.
    [[nodiscard]] Interval rho_interval(double alpha, double tol) const {
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw DomainError("rho_interval: alpha must lie in (0, 1)");
        }
        return {std::sqrt(quantile(alpha / 2.0, tol)), std::sqrt(quantile(1.0 - alpha / 2.0, tol))};
    }

  private:
    std::vector<PivotalDraw> draws_;
};

namespace detail {

inline TestResult gt_result(const SummaryStats& s, const GtConfig& cfg, Method method) {
    TestResult out;
    out.method = method;
    out.B = cfg.B;
    out.seed = cfg.seed;
    out.estimates = fit_mle(s).params;
    return out;
}

}  // namespace detail

/// Generalized test p-value Pr(Q >= rho0^2), Rao-Blackwellized over Z, and the
/// generalized CI obtained by inverting the averaged conditional CDF. Both use
/// the same B draws from substreams 1..B of cfg.seed.
inline TestResult gt_pvalue(const SummaryStats& s, const Hypothesis& hyp, const GtConfig& cfg) {
    hyp.validate();
    cfg.validate();
    const auto sample = PivotalSample::generate(s, RandomStream(cfg.seed), cfg.B, cfg.parallelism);
    TestResult out = detail::gt_result(s, cfg, Method::gt);
    out.p_value = Probability(std::min(1.0, sample.exceed(hyp.rho0 * hyp.rho0)));
    out.ci_rho = sample.rho_interval(hyp.alpha, cfg.quantile_tol);
    return out;
}

inline Interval gt_ci(const SummaryStats& s, double alpha, const GtConfig& cfg) {
    cfg.validate();
    const auto sample = PivotalSample::generate(s, RandomStream(cfg.seed), cfg.B, cfg.parallelism);
    return sample.rho_interval(alpha, cfg.quantile_tol);
}

/// Simulated Q = Q_w + Q_b + Q_mu values with Z drawn explicitly; draw k uses
/// the same substream as PivotalSample, continued after the pivots.
inline std::vector<double> simulate_q(const SummaryStats& s, const RandomStream& base,
                                      std::size_t B, unsigned parallelism = 1) {
    detail::require_nondegenerate(s);
    std::vector<double> q(B);
    parallel_for(B, parallelism, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            RandomStream rng = base.substream(k + 1);
            const PivotalDraw d = detail::draw_pivotal_unchecked(s, rng);
            const double z = rng.normal();
            const double root = d.ytilde - z / std::sqrt(d.sum_wtilde);
            q[k] = d.s + root * root;
        }
    });
    return q;
}

/// Order-statistic interval [sqrt(Q^(B alpha/2)), sqrt(Q^(B(1-alpha/2)))]
/// over simulated Q values (1-based ranks, rounded up).
inline Interval order_statistic_interval(std::vector<double> q, double alpha) {
    if (q.empty()) {
        throw DomainError("order_statistic_interval: empty sample");
    }
    std::sort(q.begin(), q.end());
    const auto rank = [&](double frac) {
        const auto r = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(q.size())));
        return std::clamp<std::size_t>(r, 1, q.size()) - 1;
    };
    return {std::sqrt(q[rank(alpha / 2.0)]), std::sqrt(q[rank(1.0 - alpha / 2.0)])};
}

/// Plain Monte Carlo generalized test: P = #{Q^k >= rho0^2} / B, with the CI
/// from order statistics of the same Q values.
inline TestResult gt_pvalue_plain(const SummaryStats& s, const Hypothesis& hyp,
                                  const GtConfig& cfg) {
    hyp.validate();
    cfg.validate();
    const auto q = simulate_q(s, RandomStream(cfg.seed), cfg.B, cfg.parallelism);
    const double threshold = hyp.rho0 * hyp.rho0;
    std::size_t hits = 0;
    for (double v : q) {
        hits += v >= threshold ? 1 : 0;
    }
    TestResult out = detail::gt_result(s, cfg, Method::gt_plain);
    out.p_value = Probability(static_cast<double>(hits) / static_cast<double>(q.size()));
    out.ci_rho = order_statistic_interval(q, hyp.alpha);
    return out;
}

}  // namespace rmsequiv
