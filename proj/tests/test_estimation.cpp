#include <algorithm>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rmsequiv/estimation.hpp"
#include "rmsequiv/sim_harness.hpp"

using namespace rmsequiv;

namespace {

// Best -2 log L over a log-spaced (sw2, sb2) grid with mu profiled out.
double grid_minimum(const SummaryStats& s, double scale) {
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 120; ++a) {
        const double sw2 = scale * std::exp(-6.0 + 0.1 * a);
        for (int b = -1; b <= 120; ++b) {
            const double sb2 = b < 0 ? 0.0 : scale * std::exp(-8.0 + 0.12 * b);
            const LmmParams p{profile_mu(s, sw2, sb2), sw2, sb2};
            best = std::min(best, neg2ll(s, p));
        }
    }
    return best;
}

double spread(const SummaryStats& s) {
    double mean = 0.0;
    for (double y : s.ybar()) {
        mean += y;
    }
    mean /= static_cast<double>(s.n());
    double ss = s.sse() / static_cast<double>(s.total());
    for (double y : s.ybar()) {
        ss += (y - mean) * (y - mean) / static_cast<double>(s.n());
    }
    return ss;
}

}  // namespace

TEST(Neg2ll, HandExample) {
    // Two subjects of two values, ybar = (1, -1), sse = 2; mu = 0, sw2 = 1, sb2 = 0:
    // 2 log 1 + 2/1 + 2 * (log 1 + 2 * 1 / 1) = 6.
    const SummaryStats s({2, 2}, {1.0, -1.0}, 2.0);
    EXPECT_DOUBLE_EQ(neg2ll(s, {0.0, 1.0, 0.0}), 6.0);
    // With sb2 = 1: v_i = 3, so 2 log 1 + 2 + 2 * (log 3 + 2/3).
    EXPECT_NEAR(neg2ll(s, {0.0, 1.0, 1.0}), 2.0 + 2.0 * (std::log(3.0) + 2.0 / 3.0), 1e-14);
}

TEST(Neg2ll, MatchesDenseCovarianceOracle) {
    RandomStream rng(77);
    for (int rep = 0; rep < 40; ++rep) {
        const std::vector<int> m{1, 3, 4, 7, 2, 5};
        const LmmParams truth{rng.normal(), 0.2 + rng.uniform(), 2.0 * rng.uniform()};
        const auto raw = generate_raw_sample(m, truth, rng);
        const auto s = summarize(raw);
        const LmmParams at{rng.normal(), 0.1 + 3.0 * rng.uniform(), 3.0 * rng.uniform()};
        const double dense = oracle::neg2ll_dense(raw, at);
        EXPECT_NEAR(neg2ll(s, at), dense, 1e-9 * std::abs(dense));
    }
}

TEST(ProfileMu, Limits) {
    const SummaryStats s({2, 4, 10}, {1.0, 2.0, 6.0}, 3.0);
    // sb2 = 0: count-weighted mean.
    EXPECT_NEAR(profile_mu(s, 1.0, 0.0), (2.0 + 8.0 + 60.0) / 16.0, 1e-14);
    // Huge sb2: plain mean of subject means.
    EXPECT_NEAR(profile_mu(s, 1.0, 1e12), 3.0, 1e-9);
    EXPECT_THROW(profile_mu(s, 0.0, 1.0), DomainError);
}

TEST(FitMle, Oximetry) {
    const auto fit = fit_mle(fixture::oximetry());
    EXPECT_NEAR(fit.params.mu, -0.5788, 5e-4);
    EXPECT_NEAR(std::sqrt(fit.params.sigma_w2), 1.3135, 5e-4);
    EXPECT_NEAR(std::sqrt(fit.params.sigma_b2), 1.1454, 5e-4);
    EXPECT_FALSE(fit.boundary_sigma_b2);
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.neg2loglik, neg2ll(fixture::oximetry(), fit.params), 1e-12);
}

TEST(FitMle, NotWorseThanGridSearch) {
    RandomStream rng(2024);
    for (int rep = 0; rep < 25; ++rep) {
        const auto s = fixture::random_summary(rng);
        const auto fit = fit_mle(s);
        EXPECT_LE(fit.neg2loglik, grid_minimum(s, spread(s)) + 1e-7);
    }
}

TEST(FitMle, NotWorseThanRandomFeasiblePoints) {
    RandomStream rng(99);
    const auto s = fixture::oximetry();
    const auto fit = fit_mle(s);
    for (int k = 0; k < 1000; ++k) {
        const LmmParams p{fit.params.mu + rng.normal(), 0.05 + 5.0 * rng.uniform(),
                          rng.uniform() < 0.1 ? 0.0 : 5.0 * rng.uniform()};
        ASSERT_GE(neg2ll(s, p), fit.neg2loglik - 1e-9);
    }
}

TEST(FitMle, BoundaryWhenSubjectMeansAgree) {
    const SummaryStats s({3, 4, 5}, {1.0, 1.0, 1.0}, 6.0);
    const auto fit = fit_mle(s);
    EXPECT_TRUE(fit.boundary_sigma_b2);
    EXPECT_EQ(fit.params.sigma_b2, 0.0);
    EXPECT_NEAR(fit.params.mu, 1.0, 1e-14);
    EXPECT_NEAR(fit.params.sigma_w2, 6.0 / 12.0, 1e-14);
}

TEST(FitMle, ScaleAndOrderInvariance) {
    RandomStream rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const auto s = fixture::random_summary(rng);
        const double c = 0.01 + 10.0 * rng.uniform();
        std::vector<double> scaled = s.ybar();
        for (double& y : scaled) {
            y *= c;
        }
        const auto a = fit_mle(s).params;
        const auto b = fit_mle(SummaryStats(s.m(), scaled, s.sse() * c * c)).params;
        EXPECT_NEAR(b.mu, c * a.mu, 1e-5 * c * (1.0 + std::abs(a.mu)));
        EXPECT_NEAR(b.sigma_w2, c * c * a.sigma_w2, 1e-5 * c * c * a.sigma_w2);
        EXPECT_NEAR(b.sigma_b2, c * c * a.sigma_b2, 1e-5 * c * c * (a.sigma_w2 + a.sigma_b2));

        std::vector<int> m(s.m().rbegin(), s.m().rend());
        std::vector<double> y(s.ybar().rbegin(), s.ybar().rend());
        const auto r = fit_mle(SummaryStats(m, y, s.sse())).params;
        EXPECT_NEAR(r.mu, a.mu, 1e-7 * (1.0 + std::abs(a.mu)));
        EXPECT_NEAR(r.sigma_b2, a.sigma_b2, 1e-7 * (a.sigma_w2 + a.sigma_b2));
    }
}

TEST(FitMle, ZeroSseIsDegenerate) {
    EXPECT_THROW(fit_mle(SummaryStats({2, 2}, {0.0, 1.0}, 0.0)), DegenerateDataError);
}

TEST(FitMleNull, SatisfiesConstraint) {
    RandomStream rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        const auto s = fixture::random_summary(rng);
        const double rho0 = 0.5 + 5.0 * rng.uniform();
        for (const auto& fit : {fit_mle_null(s, rho0), fit_reml_null(s, rho0)}) {
            EXPECT_NEAR(rms(fit.params), rho0, 1e-9 * rho0);
            EXPECT_GT(fit.params.sigma_w2, 0.0);
            EXPECT_GE(fit.params.sigma_b2, 0.0);
        }
    }
}

TEST(FitMleNull, NotWorseThanSimplexGrid) {
    RandomStream rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        const auto s = fixture::random_summary(rng);
        const double rho0 = 0.5 + 5.0 * rng.uniform();
        const double r2 = rho0 * rho0;
        const auto fit = fit_mle_null(s, rho0);
        // Grid over the simplex mu^2 + sw2 + sb2 = rho0^2, both signs of mu.
        double best = std::numeric_limits<double>::infinity();
        const int k = 150;
        for (int a = 1; a <= k; ++a) {
            for (int b = 0; a + b <= k; ++b) {
                const double sw2 = r2 * a / k;
                const double sb2 = r2 * b / k;
                const double mu = std::sqrt(std::max(0.0, r2 - sw2 - sb2));
                best = std::min({best, neg2ll(s, {mu, sw2, sb2}), neg2ll(s, {-mu, sw2, sb2})});
            }
        }
        EXPECT_LE(fit.neg2loglik, best + 1e-7);
    }
}

TEST(FitMleNull, FreeFitOnSurfaceIsReturned) {
    const auto s = fixture::oximetry();
    const auto free_fit = fit_mle(s);
    const auto null_fit = fit_mle_null(s, rms(free_fit.params));
    EXPECT_NEAR(null_fit.neg2loglik, free_fit.neg2loglik, 1e-9);
}

TEST(ScaleToRms, LandsOnSurface) {
    const auto p = scale_to_rms({-0.5, 1.7, 1.3}, 3.0);
    EXPECT_NEAR(rms(p), 3.0, 1e-14);
    EXPECT_NEAR(p.sigma_b2 / p.sigma_w2, 1.3 / 1.7, 1e-14);
}
