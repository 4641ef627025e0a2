// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   rmsequiv_acceptance                 run every criterion
//   rmsequiv_acceptance 2 6             run selected criteria
//   --known-unattainable=3[,..]         a failure of these is reported as FAIL
//                                       but does not change the exit status

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rmsequiv/rmsequiv.hpp"

using namespace rmsequiv;
using namespace std::string_literals;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Rejection rate at level alpha recomputed from the per-replicate p-values.
double rate_at(const ScenarioResult& res, Method m, double alpha) {
    std::size_t hits = 0;
    std::size_t done = 0;
    for (const auto& r : res.records) {
        if (r.method == m && !r.failed) {
            ++done;
            hits += r.p < alpha ? 1 : 0;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(done);
}

Scenario unbalanced(double rho0, std::uint64_t seed) {
    Scenario sc;
    sc.name = "unbalanced n=16";
    for (int m = 5; m <= 20; ++m) {
        sc.m.push_back(m);
    }
    sc.params = {-0.57, 1.48 * 1.48, 1.38 * 1.38};
    sc.hyp = {rho0, 0.05};
    sc.nsim = 2000;
    sc.B = 2000;
    sc.seed = seed;
    sc.methods = {Method::gt, Method::z_score};
    return sc;
}

Scenario balanced(int n, int m, double fraction, double w, double b, std::uint64_t seed) {
    Scenario sc;
    sc.name = "balanced";
    sc.m.assign(static_cast<std::size_t>(n), m);
    const double total = fraction * 9.0;
    const double sw2 = total * w / (w + b);
    sc.params = {std::sqrt(9.0 - total), sw2, total - sw2};
    sc.hyp = {3.0, 0.05};
    sc.nsim = 2000;
    sc.B = 2000;
    sc.seed = seed;
    sc.methods = {Method::gt, Method::z_score};
    return sc;
}

Outcome oximetry_zscore() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = z_score_test(fixture::oximetry(), {3.0, 0.10});
    const double secs = seconds_since(t0);
    const bool pass = within(res.p_value, 0.010, 0.002) && within(res.ci_rho2->lower, -1.447, 0.01) &&
                      within(res.ci_rho2->upper, 7.221, 0.01) && within(res.ci_rho.lower, 0.0, 0.01) &&
                      within(res.ci_rho.upper, 2.687, 0.01) && secs < 1.0;
    return {pass, fmt("p=%.4f rho2 CI [%.3f, %.3f] rho CI [%.3f, %.3f] in %.3f s",
                      res.p_value.value(), res.ci_rho2->lower, res.ci_rho2->upper, res.ci_rho.lower,
                      res.ci_rho.upper, secs)};
}

Outcome oximetry_gt() {
    const auto s = fixture::oximetry();
    const auto t0 = std::chrono::steady_clock::now();
    int good = 0;
    double p_min = 1.0, p_max = 0.0, lo_min = 1e9, lo_max = 0.0, hi_min = 1e9, hi_max = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const GtConfig cfg{10000, seed};
        const double p = gt_pvalue(s, {3.0, 0.10}, cfg).p_value;
        const Interval ci = gt_ci(s, 0.10, cfg);
        p_min = std::min(p_min, p);
        p_max = std::max(p_max, p);
        lo_min = std::min(lo_min, ci.lower);
        lo_max = std::max(lo_max, ci.lower);
        hi_min = std::min(hi_min, ci.upper);
        hi_max = std::max(hi_max, ci.upper);
        good += p >= 0.004 && p <= 0.008 && within(ci.lower, 1.665, 0.05) && within(ci.upper, 2.528, 0.05);
    }
    const double secs = seconds_since(t0);
    return {good >= 48 && secs < 5.0,
            fmt("%d/50 seeds in range; p in [%.4f, %.4f], lower in [%.3f, %.3f], upper in [%.3f, %.3f]; %.2f s",
                good, p_min, p_max, lo_min, lo_max, hi_min, hi_max, secs)};
}

Outcome oximetry_estimates() {
    const auto p = fit_mle(fixture::oximetry()).params;
    const double sw = std::sqrt(p.sigma_w2);
    const double sb = std::sqrt(p.sigma_b2);
    const bool pass = within(p.mu, -0.57, 0.01) && within(sw, 1.48, 0.01) && within(sb, 1.38, 0.01);
    return {pass, fmt("mu=%.4f sigma_w=%.4f sigma_b=%.4f (target -0.57, 1.48, 1.38 +/- 0.01)", p.mu, sw, sb)};
}

Outcome rao_blackwell() {
    RandomStream rng(20240601);
    int agree = 0;
    std::ostringstream worst;
    double worst_ratio = 0.0;
    const std::size_t B = 10000;
    for (int k = 0; k < 20; ++k) {
        const std::vector<int> m{4, 6, 8, 5, 10, 3, 7, 9};
        const LmmParams truth{rng.normal(), 0.3 + 2.0 * rng.uniform(), 2.0 * rng.uniform()};
        const auto s = generate_summary_dataset(m, truth, rng);
        // Threshold placed near the data so that p is not degenerate.
        const double rho0 = std::sqrt(r_statistic(s)) * (1.0 + 0.4 * rng.uniform());
        const GtConfig cfg{B, 1000 + static_cast<std::uint64_t>(k)};
        const double a = gt_pvalue(s, {rho0, 0.1}, cfg).p_value;
        const double b = gt_pvalue_plain(s, {rho0, 0.1}, cfg).p_value;
        const double bound = 4.0 * std::sqrt(a * (1.0 - a) / static_cast<double>(B));
        agree += std::abs(a - b) <= bound;
        if (bound > 0.0) {
            worst_ratio = std::max(worst_ratio, std::abs(a - b) / bound);
        }
    }
    return {agree >= 19, fmt("%d/20 within 4 SE; largest |diff|/bound = %.2f", agree, worst_ratio)};
}

Outcome root_round_trip() {
    RandomStream rng(77);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto s = fixture::random_summary(rng);
        const double qw = std::exp(2.0 * rng.normal());
        const double sb2 = std::exp(3.0 * rng.normal());
        const double target = ssr_at(sb2, s.ybar(), s.m(), qw);
        worst = std::max(worst, std::abs(solve_qb(s.ybar(), s.m(), qw, target) - sb2) / sb2);
    }
    const auto s = fixture::oximetry();
    const double at_zero = ssr_at(0.0, s.ybar(), s.m(), 1.7);
    const bool boundary = solve_qb(s.ybar(), s.m(), 1.7, at_zero) == 0.0 &&
                          solve_qb(s.ybar(), s.m(), 1.7, 2.0 * at_zero) == 0.0;
    return {worst <= 1e-8 && boundary,
            fmt("max relative error %.2e over 1000 instances; boundary exact zero: %s", worst,
                boundary ? "yes" : "no")};
}

Outcome unbalanced_tables() {
    const auto t0 = std::chrono::steady_clock::now();
    const unsigned par = default_parallelism();
    const auto results = run_grid({unbalanced(2.1, 2024), unbalanced(3.0, 2025)}, par);
    const double gt_size = rate_at(results[0], Method::gt, 0.05);
    const double z_size = rate_at(results[0], Method::z_score, 0.05);
    const double gt_power = rate_at(results[1], Method::gt, 0.05);
    const double z_power01 = rate_at(results[1], Method::z_score, 0.01);
    const bool pass = within(gt_size, 0.028, 0.012) && within(z_size, 0.023, 0.012) &&
                      within(gt_power, 0.821, 0.025) && within(z_power01, 0.032, 0.015);
    return {pass, fmt("size GT %.4f (0.028+/-0.012) Z %.4f (0.023+/-0.012); power GT %.4f (0.821+/-0.025) "
                      "Z@0.01 %.4f (0.032+/-0.015); %.1f s on %u threads",
                      gt_size, z_size, gt_power, z_power01, seconds_since(t0), par)};
}

Outcome balanced_cells() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results =
        run_grid({balanced(20, 10, 0.2, 1, 1, 3001), balanced(20, 10, 0.4, 1, 1, 3002)}, default_parallelism());
    const double size = rate_at(results[0], Method::gt, 0.05);
    const auto* gt = results[1].find(Method::gt);
    const bool pass = within(size, 0.047, 0.012) && within(gt->coverage, 0.896, 0.013) &&
                      within(gt->avg_ci_width, 0.909, 0.03);
    return {pass, fmt("GT size %.4f (0.047+/-0.012); 90%% GCI CP %.4f (0.896+/-0.013) AW %.4f (0.909+/-0.03); %.1f s",
                      size, gt->coverage, gt->avg_ci_width, seconds_since(t0))};
}

Outcome wald_inflation() {
    const auto t0 = std::chrono::steady_clock::now();
    Scenario sc = balanced(10, 5, 0.2, 1, 3, 4001);
    sc.methods = {Method::gt, Method::z_wald};
    const auto res = run_scenario(sc, default_parallelism());
    const double wald = rate_at(res, Method::z_wald, 0.05);
    const double gt = rate_at(res, Method::gt, 0.05);
    return {wald > 0.08 && gt < 0.06,
            fmt("Z-Wald size %.4f (> 0.08), GT size %.4f (< 0.06); %.1f s", wald, gt, seconds_since(t0))};
}

Outcome nc_chisq_grid() {
    double worst = 0.0;
    double at_x = 0.0;
    double at_l = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double x = std::pow(10.0, -4.0 + 6.0 * i / 49.0);  // 1e-4 .. 100
        for (int j = 0; j < 50; ++j) {
            const double lambda = j == 0 ? 0.0 : std::pow(10.0, -4.0 + 6.0 * (j - 1) / 48.0);
            const double err = std::abs(nc_chisq1_sf(x, lambda) - oracle::nc_chisq1_sf_series(x, lambda));
            if (err > worst) {
                worst = err;
                at_x = x;
                at_l = lambda;
            }
        }
    }
    return {worst <= 1e-10, fmt("max |error| %.2e at x=%.3g lambda=%.3g over 50x50 grid", worst, at_x, at_l)};
}

Outcome determinism() {
    const auto s = fixture::oximetry();
    bool same = true;
    const auto gt1 = gt_pvalue(s, {3.0, 0.1}, GtConfig{10000, 5, 1e-8, 1});
    const auto pl1 = gt_pvalue_plain(s, {3.0, 0.1}, GtConfig{10000, 5, 1e-8, 1});
    Scenario sc = balanced(10, 5, 0.4, 1, 1, 77);
    sc.nsim = 60;
    sc.B = 300;
    sc.methods = {Method::gt, Method::gt_plain, Method::z_score, Method::z_wald};
    const auto sim1 = run_scenario(sc, 1);
    for (unsigned par : {2u, 3u, 4u, 8u}) {
        const auto gt = gt_pvalue(s, {3.0, 0.1}, GtConfig{10000, 5, 1e-8, par});
        const auto pl = gt_pvalue_plain(s, {3.0, 0.1}, GtConfig{10000, 5, 1e-8, par});
        same = same && gt.p_value.value() == gt1.p_value.value() && gt.ci_rho.lower == gt1.ci_rho.lower &&
               gt.ci_rho.upper == gt1.ci_rho.upper && pl.p_value.value() == pl1.p_value.value() &&
               pl.ci_rho.lower == pl1.ci_rho.lower && pl.ci_rho.upper == pl1.ci_rho.upper;
        const auto sim = run_scenario(sc, par);
        for (std::size_t i = 0; i < sim.records.size(); ++i) {
            same = same && sim.records[i].p == sim1.records[i].p && sim.records[i].ci_lo == sim1.records[i].ci_lo &&
                   sim.records[i].ci_hi == sim1.records[i].ci_hi;
        }
    }
    return {same, "GT, GT-plain and a simulation scenario at parallelism 1, 2, 3, 4, 8: "s +
                      (same ? "bitwise identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
    using namespace std::string_literals;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oximetry Z-score p-value and intervals", oximetry_zscore},
        {"oximetry GT p-value and interval over 50 seeds", oximetry_gt},
        {"oximetry maximum-likelihood estimates", oximetry_estimates},
        {"Rao-Blackwellized vs plain Monte Carlo p-values", rao_blackwell},
        {"sigma_b^2 root round trip and boundary", root_round_trip},
        {"unbalanced design size and power", unbalanced_tables},
        {"balanced n=20, m=10 size, coverage and width", balanced_cells},
        {"Z-Wald size inflation", wald_inflation},
        {"noncentral chi-square(1) tail vs series", nc_chisq_grid},
        {"results independent of parallelism", determinism},
    };

    std::set<int> selected;
    std::set<int> known;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        const std::string flag = "--known-unattainable=";
        if (arg.starts_with(flag)) {
            std::stringstream list(arg.substr(flag.size()));
            for (std::string item; std::getline(list, item, ',');) {
                known.insert(std::stoi(item));
            }
        } else {
            selected.insert(std::stoi(arg));
        }
    }

    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.empty() && !selected.contains(id)) {
            continue;
        }
        Outcome out;
        try {
            out = criteria[k].second();
        } catch (const std::exception& e) {
            out = {false, "exception: "s + e.what()};
        }
        const bool excused = !out.pass && known.contains(id);
        std::printf("%s %2d  %s: %s%s\n", out.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                    out.detail.c_str(), excused ? "  [known unattainable]" : "");
        std::fflush(stdout);
        failures += !out.pass && !excused;
    }
    return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
