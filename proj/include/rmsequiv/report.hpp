#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "rmsequiv/data_model.hpp"
#include "rmsequiv/sim_harness.hpp"

namespace rmsequiv {

inline std::string method_label(Method m) {
    switch (m) {
        case Method::gt: return "GT";
        case Method::gt_plain: return "GT-plain";
        case Method::z_score: return "Z-score";
        case Method::z_wald: return "Z-Wald";
    }
    return "?";
}

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline nlohmann::json to_json(const ReplicateRecord& r, const std::string& scenario_name) {
    return {{"scenario", scenario_name}, {"replicate", r.replicate},
            {"method", std::string(method_name(r.method))}, {"failed", r.failed},
            {"p", r.p}, {"ci_lo", r.ci_lo}, {"ci_hi", r.ci_hi},
            {"reject", r.reject}, {"cover", r.cover}};
}

inline nlohmann::json to_json(const ScenarioResult& res) {
    const auto& sc = res.scenario;
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& m : res.methods) {
        methods.push_back({{"method", std::string(method_name(m.method))},
                           {"completed", m.completed},
                           {"failures", m.failures},
                           {"rejections", m.rejections},
                           {"rejection_rate", m.rejection_rate},
                           {"rejection_se", m.rejection_se},
                           {"coverage", m.coverage},
                           {"avg_ci_width", m.avg_ci_width}});
    }
    nlohmann::json j = {{"name", sc.name},
                        {"table", sc.table},
                        {"n", sc.n()},
                        {"m", sc.m},
                        {"mu", sc.params.mu},
                        {"sigma_w2", sc.params.sigma_w2},
                        {"sigma_b2", sc.params.sigma_b2},
                        {"rho", sc.true_rho()},
                        {"rho0", sc.hyp.rho0},
                        {"alpha", sc.hyp.alpha},
                        {"ci_level", 1.0 - sc.ci_alpha},
                        {"nsim", sc.nsim},
                        {"B", sc.B},
                        {"seed", sc.seed},
                        {"methods", methods},
                        {"runtime_seconds", res.runtime_seconds}};
    if (sc.design) {
        j["var_fraction"] = sc.design->var_fraction;
        j["ratio"] = sc.design->ratio;
    }
    return j;
}

/// Writes one line-delimited JSON record per (replicate, method). With the
/// scenario seed and replicate index every line can be recomputed on its own.
inline void write_replicate_log(std::ostream& out, const std::vector<ScenarioResult>& results) {
    for (const auto& res : results) {
        for (const auto& rec : res.records) {
            auto line = to_json(rec, res.scenario.name);
            line["seed"] = res.scenario.seed;
            out << line.dump() << '\n';
        }
    }
}

namespace detail {

inline std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

inline std::string rate_cell(const MethodSummary* m, int decimals) {
    return m ? fixed(m->rejection_rate, decimals) : "-";
}

// Balanced-design layout: variance-fraction blocks with ratio sub-columns,
// one row block per (n, m, alpha).
inline void format_design_table(std::ostream& out, const std::vector<const ScenarioResult*>& rs) {
    std::vector<double> fractions;
    std::vector<std::string> ratios;
    for (const auto* r : rs) {
        const auto& d = *r->scenario.design;
        if (std::find(fractions.begin(), fractions.end(), d.var_fraction) == fractions.end()) {
            fractions.push_back(d.var_fraction);
        }
        if (std::find(ratios.begin(), ratios.end(), d.ratio) == ratios.end()) {
            ratios.push_back(d.ratio);
        }
    }
    std::sort(fractions.begin(), fractions.end());

    using BlockKey = std::tuple<std::size_t, int, double>;  // n, m_1, alpha
    std::map<BlockKey, std::map<std::pair<double, std::string>, const ScenarioResult*>> blocks;
    std::vector<Method> methods;
    for (const auto* r : rs) {
        const auto& sc = r->scenario;
        blocks[{sc.n(), sc.m.front(), sc.hyp.alpha}][{sc.design->var_fraction, sc.design->ratio}] = r;
        for (Method m : sc.methods) {
            if (std::find(methods.begin(), methods.end(), m) == methods.end()) {
                methods.push_back(m);
            }
        }
    }

    constexpr std::size_t label_w = 10;
    constexpr std::size_t cell_w = 8;
    const std::size_t block_w = cell_w * ratios.size();
    out << pad("(sw2+sb2)/rho2", label_w + 4);
    for (double f : fractions) {
        out << " |" << pad(fixed(f, 1), block_w);
    }
    out << '\n' << pad("sw2:sb2", label_w + 4);
    for (std::size_t b = 0; b < fractions.size(); ++b) {
        out << " |";
        for (const auto& r : ratios) {
            out << pad(r, cell_w);
        }
    }
    out << '\n';

    auto row = [&](const std::string& label, const auto& cells, auto cell) {
        out << pad(label, label_w + 4);
        for (double f : fractions) {
            out << " |";
            for (const auto& ratio : ratios) {
                const auto it = cells.find({f, ratio});
                out << pad(it == cells.end() ? "-" : cell(*it->second), cell_w);
            }
        }
        out << '\n';
    };

    for (const auto& [key, cells] : blocks) {
        const auto [n, m, alpha] = key;
        out << "  n=" << n << ", m=" << m << ", alpha=" << alpha << " (rejection rate)\n";
        for (Method method : methods) {
            row(method_label(method), cells, [&](const ScenarioResult& r) {
                return rate_cell(r.find(method), alpha < 0.05 ? 4 : 3);
            });
        }
    }
    // Interval summaries do not depend on alpha; show them once per (n, m).
    std::map<std::pair<std::size_t, int>, bool> shown;
    for (const auto& [key, cells] : blocks) {
        const auto [n, m, alpha] = key;
        if (shown[{n, m}]) {
            continue;
        }
        shown[{n, m}] = true;
        out << "  n=" << n << ", m=" << m << " (CP / AW of " << fixed(100 * (1 - cells.begin()->second->scenario.ci_alpha), 0)
            << "% CI)\n";
        for (Method method : methods) {
            const std::string label = method == Method::gt ? "GCI" : method_label(method);
            row(label + " CP", cells, [&](const ScenarioResult& r) {
                const auto* s = r.find(method);
                return s ? fixed(s->coverage, 3) : std::string("-");
            });
        }
        for (Method method : methods) {
            const std::string label = method == Method::gt ? "GCI" : method_label(method);
            row(label + " AW", cells, [&](const ScenarioResult& r) {
                const auto* s = r.find(method);
                return s ? fixed(s->avg_ci_width, 3) : std::string("-");
            });
        }
    }
}

inline void format_plain_table(std::ostream& out, const std::vector<const ScenarioResult*>& rs) {
    constexpr std::size_t w = 12;
    std::vector<Method> methods;
    for (const auto* r : rs) {
        for (Method m : r->scenario.methods) {
            if (std::find(methods.begin(), methods.end(), m) == methods.end()) {
                methods.push_back(m);
            }
        }
    }
    out << pad("", w);
    for (const auto* r : rs) {
        out << " | " << "n=" << r->scenario.n() << ", a=" << r->scenario.hyp.alpha;
    }
    out << '\n';
    for (const char* metric : {"rate", "CP", "AW"}) {
        for (Method method : methods) {
            out << pad(method_label(method) + " " + metric, w);
            for (const auto* r : rs) {
                const auto* s = r->find(method);
                std::string cell = "-";
                if (s) {
                    if (std::string_view(metric) == "rate") {
                        cell = fixed(s->rejection_rate, r->scenario.hyp.alpha < 0.05 ? 4 : 3) + " (" +
                               fixed(s->rejection_se, 3) + ")";
                    } else if (std::string_view(metric) == "CP") {
                        cell = fixed(s->coverage, 3);
                    } else {
                        cell = fixed(s->avg_ci_width, 3);
                    }
                }
                out << " | " << pad(cell, 14);
            }
            out << '\n';
        }
    }
}

}  // namespace detail

/// Human-readable tables, one per `table` label (scenarios without a label
/// form their own group), in first-appearance order.
inline std::string format_tables(const std::vector<ScenarioResult>& results) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const ScenarioResult*>> groups;
    for (const auto& r : results) {
        const std::string key = r.scenario.table.empty() ? r.scenario.name : r.scenario.table;
        if (!groups.contains(key)) {
            order.push_back(key);
        }
        groups[key].push_back(&r);
    }
    std::ostringstream out;
    for (const auto& key : order) {
        const auto& rs = groups[key];
        out << "== " << key << " ==\n";
        const bool design = std::all_of(rs.begin(), rs.end(),
                                        [](const auto* r) { return r->scenario.design.has_value(); });
        if (design) {
            detail::format_design_table(out, rs);
        } else {
            detail::format_plain_table(out, rs);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace rmsequiv
