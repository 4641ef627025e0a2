#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rmsequiv/data_model.hpp"
#include "rmsequiv/error.hpp"
#include "rmsequiv/estimation.hpp"
#include "rmsequiv/gt_engine.hpp"
#include "rmsequiv/parallel.hpp"
#include "rmsequiv/random_stream.hpp"
#include "rmsequiv/special_functions.hpp"
#include "rmsequiv/ztest.hpp"

namespace rmsequiv {

enum class Generator { summary, raw };

/// Labels of the balanced design grid, kept for table layout only.
struct DesignLabels {
    double var_fraction = 0.0;  // (sw2 + sb2) / rho^2
    std::string ratio;          // sw2 : sb2, e.g. "1:3"
};

struct Scenario {
    std::string name;
    std::string table;  // scenarios sharing a table label are laid out together
    std::vector<int> m;  // per-subject counts; n = m.size()
    LmmParams params;
    Hypothesis hyp;
    double ci_alpha = 0.10;  // intervals are reported at confidence 1 - ci_alpha
    std::size_t nsim = 2000;
    std::size_t B = 2000;
    std::uint64_t seed = 1;
    std::vector<Method> methods{Method::gt, Method::z_score};
    NullVariance null_variance = NullVariance::restricted;
    Generator generator = Generator::summary;
    std::optional<DesignLabels> design;

    [[nodiscard]] std::size_t n() const noexcept { return m.size(); }
    [[nodiscard]] double true_rho() const noexcept { return rms(params); }

    /// Every violated field, one message each; empty when valid.
    [[nodiscard]] std::vector<std::string> problems() const {
        std::vector<std::string> out;
        const std::string where = name.empty() ? "scenario" : "scenario '" + name + "'";
        if (m.size() < 2) {
            out.push_back(where + ": n must be at least 2");
        }
        bool replicated = false;
        for (int mi : m) {
            if (mi < 1) {
                out.push_back(where + ": every m_i must be positive");
                break;
            }
            replicated = replicated || mi >= 2;
        }
        if (!m.empty() && !replicated) {
            out.push_back(where + ": at least one subject needs m_i >= 2");
        }
        if (!(params.sigma_w2 > 0.0) || !std::isfinite(params.sigma_w2)) {
            out.push_back(where + ": sigma_w must be positive");
        }
        if (!(params.sigma_b2 >= 0.0) || !std::isfinite(params.sigma_b2)) {
            out.push_back(where + ": sigma_b must be non-negative");
        }
        if (!std::isfinite(params.mu)) {
            out.push_back(where + ": mu must be finite");
        }
        if (!(hyp.rho0 > 0.0) || !std::isfinite(hyp.rho0)) {
            out.push_back(where + ": rho0 must be positive");
        }
        if (!(hyp.alpha > 0.0 && hyp.alpha < 1.0)) {
            out.push_back(where + ": alpha must lie in (0, 1)");
        }
        if (!(ci_alpha > 0.0 && ci_alpha < 1.0)) {
            out.push_back(where + ": ci_level must lie in (0, 1)");
        }
        if (nsim < 1) {
            out.push_back(where + ": nsim must be at least 1");
        }
        if (B < 100) {
            out.push_back(where + ": B must be at least 100");
        }
        if (methods.empty()) {
            out.push_back(where + ": methods must not be empty");
        }
        return out;
    }

    void validate() const {
        const auto p = problems();
        if (!p.empty()) {
            std::string msg = p.front();
            for (std::size_t i = 1; i < p.size(); ++i) {
                msg += "; " + p[i];
            }
            throw ValidationError(msg);
        }
    }
};

/// One method's outcome on one simulated data set.
struct ReplicateRecord {
    std::size_t scenario = 0;
    std::size_t replicate = 0;
    Method method = Method::gt;
    bool failed = false;
    double p = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool reject = false;
    bool cover = false;
};

struct MethodSummary {
    Method method = Method::gt;
    std::size_t completed = 0;
    std::size_t failures = 0;
    std::size_t rejections = 0;
    std::size_t covered = 0;
    double rejection_rate = 0.0;
    double rejection_se = 0.0;  // sqrt(p (1 - p) / completed)
    double coverage = 0.0;
    double avg_ci_width = 0.0;
};

struct ScenarioResult {
    Scenario scenario;
    std::vector<MethodSummary> methods;
    std::vector<ReplicateRecord> records;  // replicate-major, methods in scenario order
    double runtime_seconds = 0.0;          // summed per-replicate compute time

    [[nodiscard]] const MethodSummary* find(Method m) const noexcept {
        for (const auto& s : methods) {
            if (s.method == m) {
                return &s;
            }
        }
        return nullptr;
    }
};

/// Fraction of replicates a method may fail before the scenario is rejected.
inline constexpr double max_failure_fraction = 0.01;

/// Simulates sufficient statistics directly:
/// ybar_i ~ N(mu, sb2 + sw2/m_i) and sse ~ sw2 * chi2_{N-n}.
inline SummaryStats generate_summary_dataset(std::span<const int> m, const LmmParams& p,
                                             RandomStream& rng) {
    p.validate();
    std::vector<int> counts(m.begin(), m.end());
    std::vector<double> ybar(m.size());
    long big_n = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        ybar[i] = p.mu + std::sqrt(p.sigma_b2 + p.sigma_w2 / m[i]) * rng.normal();
        big_n += m[i];
    }
    const long df = big_n - static_cast<long>(m.size());
    const double sse = df > 0 ? p.sigma_w2 * chisq_sample(static_cast<double>(df), rng) : 0.0;
    return SummaryStats(std::move(counts), std::move(ybar), sse);
}

/// Simulates raw measurements Y_ij = mu + u_i + e_ij.
inline GroupedSample generate_raw_sample(std::span<const int> m, const LmmParams& p,
                                         RandomStream& rng) {
    p.validate();
    std::vector<SubjectValues> groups;
    groups.reserve(m.size());
    const double sb = std::sqrt(p.sigma_b2);
    const double sw = std::sqrt(p.sigma_w2);
    for (std::size_t i = 0; i < m.size(); ++i) {
        SubjectValues g{std::to_string(i + 1), std::vector<double>(static_cast<std::size_t>(m[i]))};
        const double u = sb * rng.normal();
        for (double& v : g.values) {
            v = p.mu + u + sw * rng.normal();
        }
        groups.push_back(std::move(g));
    }
    return GroupedSample(std::move(groups));
}

inline SummaryStats generate_dataset(std::span<const int> m, const LmmParams& p, RandomStream& rng,
                                     Generator gen = Generator::summary) {
    return gen == Generator::summary ? generate_summary_dataset(m, p, rng)
                                     : summarize(generate_raw_sample(m, p, rng));
}

namespace detail {

/// Runs every requested method on replicate r. Stream layout: the replicate
/// stream is substream r of the scenario seed; data come from its substream 0
/// and the pivotal draws from substreams 1..B of its substream 1.
inline std::vector<ReplicateRecord> run_replicate(const Scenario& sc, std::size_t scenario_index,
                                                  std::size_t r) {
    const RandomStream replicate_stream = RandomStream(sc.seed).substream(r);
    RandomStream data_rng = replicate_stream.substream(0);
    const RandomStream draw_base = replicate_stream.substream(1);
    const double truth = sc.true_rho();
    // p-values do not depend on alpha, so the tests run at the CI level.
    const Hypothesis ci_hyp{sc.hyp.rho0, sc.ci_alpha};

    std::vector<ReplicateRecord> out;
    out.reserve(sc.methods.size());
    std::optional<SummaryStats> data;
    try {
        data = generate_dataset(sc.m, sc.params, data_rng, sc.generator);
    } catch (const std::exception&) {
    }

    std::optional<PivotalSample> pivots;
    for (Method method : sc.methods) {
        ReplicateRecord rec;
        rec.scenario = scenario_index;
        rec.replicate = r;
        rec.method = method;
        try {
            if (!data) {
                throw DegenerateDataError("data generation failed");
            }
            Interval ci;
            switch (method) {
                case Method::gt: {
                    if (!pivots) {
                        pivots = PivotalSample::generate(*data, draw_base, sc.B, 1);
                    }
                    rec.p = std::min(1.0, pivots->exceed(sc.hyp.rho0 * sc.hyp.rho0));
                    ci = pivots->rho_interval(sc.ci_alpha, 1e-8);
                    break;
                }
                case Method::gt_plain: {
                    const auto q = simulate_q(*data, draw_base, sc.B, 1);
                    std::size_t hits = 0;
                    for (double v : q) {
                        hits += v >= sc.hyp.rho0 * sc.hyp.rho0 ? 1 : 0;
                    }
                    rec.p = static_cast<double>(hits) / static_cast<double>(q.size());
                    ci = order_statistic_interval(q, sc.ci_alpha);
                    break;
                }
                case Method::z_score: {
                    const auto res = z_score_test(*data, ci_hyp, sc.null_variance);
                    rec.p = res.p_value;
                    ci = res.ci_rho;
                    break;
                }
                case Method::z_wald: {
                    const auto res = z_wald_test(*data, ci_hyp);
                    rec.p = res.p_value;
                    ci = res.ci_rho;
                    break;
                }
            }
            rec.ci_lo = ci.lower;
            rec.ci_hi = ci.upper;
            rec.reject = rec.p < sc.hyp.alpha;
            rec.cover = ci.lower <= truth && truth <= ci.upper;
        } catch (const std::exception&) {
            rec = ReplicateRecord{scenario_index, r, method, true};
        }
        out.push_back(rec);
    }
    return out;
}

inline ScenarioResult aggregate(const Scenario& sc, std::vector<ReplicateRecord> records,
                                double runtime) {
    ScenarioResult res;
    res.scenario = sc;
    res.runtime_seconds = runtime;
    for (std::size_t j = 0; j < sc.methods.size(); ++j) {
        MethodSummary ms;
        ms.method = sc.methods[j];
        double width = 0.0;
        for (std::size_t r = 0; r < sc.nsim; ++r) {
            const auto& rec = records[r * sc.methods.size() + j];
            if (rec.failed) {
                ++ms.failures;
                continue;
            }
            ++ms.completed;
            ms.rejections += rec.reject ? 1 : 0;
            ms.covered += rec.cover ? 1 : 0;
            width += rec.ci_hi - rec.ci_lo;
        }
        if (static_cast<double>(ms.failures) > max_failure_fraction * static_cast<double>(sc.nsim)) {
            throw NumericalError("scenario '" + sc.name + "': method " +
                                 std::string(method_name(ms.method)) + " failed on " +
                                 std::to_string(ms.failures) + " of " + std::to_string(sc.nsim) +
                                 " replicates");
        }
        if (ms.completed > 0) {
            const double c = static_cast<double>(ms.completed);
            ms.rejection_rate = static_cast<double>(ms.rejections) / c;
            ms.rejection_se = std::sqrt(ms.rejection_rate * (1.0 - ms.rejection_rate) / c);
            ms.coverage = static_cast<double>(ms.covered) / c;
            ms.avg_ci_width = width / c;
        }
        res.methods.push_back(ms);
    }
    res.records = std::move(records);
    return res;
}

}  // namespace detail

/// Runs all scenarios. Replicates of every scenario form one pool of work
/// items handed out dynamically to `parallelism` workers; each item writes to
/// its own slot and aggregation walks slots in replicate order, so results do
/// not depend on the number of workers.
inline std::vector<ScenarioResult> run_grid(const std::vector<Scenario>& scenarios,
                                            unsigned parallelism = 1) {
    for (const auto& sc : scenarios) {
        sc.validate();
    }
    std::vector<std::size_t> offsets(scenarios.size() + 1, 0);
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        offsets[s + 1] = offsets[s] + scenarios[s].nsim;
    }
    const std::size_t total = offsets.back();
    std::vector<std::vector<ReplicateRecord>> slots(total);
    std::vector<double> seconds(total, 0.0);

    if (parallelism == 0) {
        parallelism = default_parallelism();
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&](std::size_t, std::size_t) {
        for (;;) {
            const std::size_t item = next.fetch_add(1);
            if (item >= total) {
                return;
            }
            const auto it = std::upper_bound(offsets.begin(), offsets.end(), item);
            const auto s = static_cast<std::size_t>(it - offsets.begin()) - 1;
            const auto t0 = std::chrono::steady_clock::now();
            slots[item] = detail::run_replicate(scenarios[s], s, item - offsets[s]);
            seconds[item] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    parallel_for(std::min<std::size_t>(parallelism, std::max<std::size_t>(total, 1)), parallelism,
                 worker);

    std::vector<ScenarioResult> results;
    results.reserve(scenarios.size());
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        std::vector<ReplicateRecord> records;
        records.reserve(scenarios[s].nsim * scenarios[s].methods.size());
        double runtime = 0.0;
        for (std::size_t item = offsets[s]; item < offsets[s + 1]; ++item) {
            records.insert(records.end(), slots[item].begin(), slots[item].end());
            runtime += seconds[item];
        }
        results.push_back(detail::aggregate(scenarios[s], std::move(records), runtime));
    }
    return results;
}

inline ScenarioResult run_scenario(const Scenario& sc, unsigned parallelism = 1) {
    return std::move(run_grid({sc}, parallelism).front());
}

}  // namespace rmsequiv
