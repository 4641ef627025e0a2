#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rmsequiv/error.hpp"
#include "rmsequiv/sim_harness.hpp"

namespace rmsequiv {

/// Scenario-file errors, one message per invalid field.
class ConfigError : public ValidationError {
  public:
    explicit ConfigError(std::vector<std::string> problems)
        : ValidationError(join(problems)), problems_(std::move(problems)) {}
    [[nodiscard]] const std::vector<std::string>& problems() const noexcept { return problems_; }

  private:
    static std::string join(const std::vector<std::string>& p) {
        std::string out;
        for (const auto& s : p) {
            out += (out.empty() ? "" : "\n") + s;
        }
        return out;
    }
    std::vector<std::string> problems_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = s.find(',', start);
        const auto item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
        if (!item.empty()) {
            out.emplace_back(item);
        }
        if (comma == std::string_view::npos) {
            return out;
        }
        start = comma + 1;
    }
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

// "5..20" or "9, 10, 10" or a mix of both.
inline bool parse_counts(std::string_view s, std::vector<int>& out) {
    for (const auto& item : split_list(s)) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            int v = 0;
            if (!parse_number(item, v)) {
                return false;
            }
            out.push_back(v);
            continue;
        }
        int lo = 0;
        int hi = 0;
        if (!parse_number(std::string_view(item).substr(0, dots), lo) ||
            !parse_number(std::string_view(item).substr(dots + 2), hi) || hi < lo) {
            return false;
        }
        for (int v = lo; v <= hi; ++v) {
            out.push_back(v);
        }
    }
    return !out.empty();
}

inline bool parse_ratio(std::string_view s, double& w, double& b) {
    const auto colon = s.find(':');
    return colon != std::string_view::npos && parse_number(s.substr(0, colon), w) &&
           parse_number(s.substr(colon + 1), b) && w > 0.0 && b >= 0.0;
}

}  // namespace detail

/// Parses a scenario file (INI syntax). Each section is one scenario block;
/// a `[defaults]` section supplies keys for all later blocks. The keys n, m,
/// var_fraction, ratio, rho and alpha accept comma lists, and a block expands
/// to the Cartesian product of its lists.
///
/// Parameters come either as mu / sigma_w / sigma_b, or as a balanced design
/// rho / var_fraction / ratio with sw2 + sb2 = var_fraction * rho^2,
/// sw2 : sb2 = ratio and mu = sqrt(rho^2 - sw2 - sb2).
inline std::vector<Scenario> parse_scenarios(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({"line " + std::to_string(e.line()) + ": " + e.message()});
    }

    static const std::set<std::string> known{
        "table", "n",     "m",    "m_list",   "mu",        "sigma_w",       "sigma_b",
        "rho",   "var_fraction",  "ratio",    "rho0",      "alpha",         "ci_level",
        "nsim",  "B",     "seed", "methods",  "null_variance", "generator"};

    std::vector<std::string> problems;
    std::vector<Scenario> out;
    pt::ptree defaults;

    for (const auto& [section, block] : tree) {
        if (section == "defaults") {
            defaults = block;
            continue;
        }
        const std::string where = "[" + section + "] ";
        auto get = [&](const std::string& key) -> std::optional<std::string> {
            if (auto v = block.get_optional<std::string>(key)) {
                return *v;
            }
            if (auto v = defaults.get_optional<std::string>(key)) {
                return *v;
            }
            return std::nullopt;
        };
        for (const auto& [key, unused] : block) {
            if (!known.contains(key)) {
                problems.push_back(where + "unknown key '" + key + "'");
            }
        }
        const std::size_t before = problems.size();

        auto numbers = [&](const std::string& key) {
            std::vector<double> values;
            if (auto raw = get(key)) {
                for (const auto& item : detail::split_list(*raw)) {
                    double v = 0.0;
                    if (!detail::parse_number(item, v) || !std::isfinite(v)) {
                        problems.push_back(where + key + ": '" + item + "' is not a number");
                    } else {
                        values.push_back(v);
                    }
                }
                if (values.empty()) {
                    problems.push_back(where + key + ": empty value");
                }
            }
            return values;
        };
        auto integer = [&](const std::string& key, auto fallback) {
            decltype(fallback) v = fallback;
            if (auto raw = get(key)) {
                if (!detail::parse_number(*raw, v)) {
                    problems.push_back(where + key + ": '" + *raw + "' is not a non-negative integer");
                }
            }
            return v;
        };

        Scenario base;
        base.table = get("table").value_or("");
        base.nsim = integer("nsim", std::size_t{2000});
        base.B = integer("B", std::size_t{2000});
        base.seed = integer("seed", std::uint64_t{1});
        if (auto raw = get("methods")) {
            base.methods.clear();
            for (const auto& item : detail::split_list(*raw)) {
                if (auto m = parse_method(item)) {
                    base.methods.push_back(*m);
                } else {
                    problems.push_back(where + "methods: unknown method '" + item +
                                       "' (expected gt, gt-plain, zscore, zwald)");
                }
            }
        }
        if (auto raw = get("null_variance")) {
            if (*raw == "restricted") {
                base.null_variance = NullVariance::restricted;
            } else if (*raw == "constrained") {
                base.null_variance = NullVariance::constrained;
            } else if (*raw == "scaled") {
                base.null_variance = NullVariance::scaled;
            } else {
                problems.push_back(where + "null_variance: expected restricted, constrained or scaled");
            }
        }
        if (auto raw = get("generator")) {
            if (*raw == "summary") {
                base.generator = Generator::summary;
            } else if (*raw == "raw") {
                base.generator = Generator::raw;
            } else {
                problems.push_back(where + "generator: expected summary or raw");
            }
        }
        const auto rho0 = numbers("rho0");
        if (rho0.size() != 1) {
            problems.push_back(where + "rho0: exactly one value required");
        } else {
            base.hyp.rho0 = rho0.front();
        }
        if (const auto ci = numbers("ci_level"); !ci.empty()) {
            base.ci_alpha = 1.0 - ci.front();
        }
        auto alphas = numbers("alpha");
        if (alphas.empty()) {
            alphas.push_back(0.05);
        }

        // Subject layouts: either one explicit m_list or n x m combinations.
        std::vector<std::vector<int>> layouts;
        const auto ns = numbers("n");
        if (auto raw = get("m_list")) {
            std::vector<int> counts;
            if (!detail::parse_counts(*raw, counts)) {
                problems.push_back(where + "m_list: expected positive integers or ranges a..b");
            } else if (!ns.empty() && (ns.size() != 1 || ns.front() != static_cast<double>(counts.size()))) {
                problems.push_back(where + "n: does not match the length of m_list (" +
                                   std::to_string(counts.size()) + ")");
            } else {
                layouts.push_back(counts);
            }
        } else {
            const auto ms = numbers("m");
            if (ns.empty()) {
                problems.push_back(where + "n: required");
            }
            if (ms.empty()) {
                problems.push_back(where + "m or m_list: required");
            }
            for (double n : ns) {
                for (double m : ms) {
                    if (n != std::floor(n) || m != std::floor(m) || n < 0 || m < 0) {
                        problems.push_back(where + "n and m must be whole numbers");
                        continue;
                    }
                    layouts.emplace_back(static_cast<std::size_t>(n), static_cast<int>(m));
                }
            }
        }

        // Parameter sets.
        struct ParamSet {
            LmmParams params;
            std::optional<DesignLabels> design;
        };
        std::vector<ParamSet> param_sets;
        const bool explicit_params = get("mu") || get("sigma_w") || get("sigma_b");
        const bool design_params = get("rho") || get("var_fraction") || get("ratio");
        if (explicit_params == design_params) {
            problems.push_back(where + "give either mu/sigma_w/sigma_b or rho/var_fraction/ratio");
        } else if (explicit_params) {
            const auto mu = numbers("mu");
            const auto sw = numbers("sigma_w");
            const auto sb = numbers("sigma_b");
            if (mu.size() != 1 || sw.size() != 1 || sb.size() != 1) {
                problems.push_back(where + "mu, sigma_w and sigma_b each need exactly one value");
            } else {
                param_sets.push_back({LmmParams{mu[0], sw[0] * sw[0], sb[0] * sb[0]}, std::nullopt});
                if (!(sw[0] > 0.0)) {
                    problems.push_back(where + "sigma_w: must be positive");
                }
                if (sb[0] < 0.0) {
                    problems.push_back(where + "sigma_b: must be non-negative");
                }
            }
        } else {
            const auto rhos = numbers("rho");
            const auto fractions = numbers("var_fraction");
            std::vector<std::string> ratios;
            if (auto raw = get("ratio")) {
                ratios = detail::split_list(*raw);
            }
            if (rhos.empty() || fractions.empty() || ratios.empty()) {
                problems.push_back(where + "rho, var_fraction and ratio are all required");
            }
            for (double rho : rhos) {
                for (double f : fractions) {
                    if (!(f > 0.0 && f <= 1.0) || !(rho > 0.0)) {
                        problems.push_back(where + "var_fraction must lie in (0, 1] and rho be positive");
                        continue;
                    }
                    for (const auto& ratio : ratios) {
                        double w = 0.0;
                        double b = 0.0;
                        if (!detail::parse_ratio(ratio, w, b)) {
                            problems.push_back(where + "ratio: '" + ratio + "' is not of the form a:b");
                            continue;
                        }
                        const double total = f * rho * rho;
                        const double sw2 = total * w / (w + b);
                        param_sets.push_back({LmmParams{std::sqrt(rho * rho - total), sw2, total - sw2},
                                              DesignLabels{f, ratio}});
                    }
                }
            }
        }

        if (problems.size() > before) {
            continue;
        }
        for (const auto& layout : layouts) {
            for (double alpha : alphas) {
                for (const auto& ps : param_sets) {
                    Scenario sc = base;
                    sc.m = layout;
                    sc.params = ps.params;
                    sc.design = ps.design;
                    sc.hyp.alpha = alpha;
                    sc.name = section;
                    const bool expanded = layouts.size() * alphas.size() * param_sets.size() > 1;
                    if (expanded) {
                        std::ostringstream name;
                        name << section << "/n=" << layout.size();
                        if (get("m")) {
                            name << ",m=" << layout.front();
                        }
                        name << ",alpha=" << alpha;
                        if (ps.design) {
                            name << ",f=" << ps.design->var_fraction << ",ratio=" << ps.design->ratio;
                        }
                        sc.name = name.str();
                    }
                    Scenario named = sc;
                    named.name = section;
                    for (auto& p : named.problems()) {
                        if (std::find(problems.begin(), problems.end(), p) == problems.end()) {
                            problems.push_back(std::move(p));
                        }
                    }
                    out.push_back(std::move(sc));
                }
            }
        }
    }
    if (!problems.empty()) {
        throw ConfigError(std::move(problems));
    }
    return out;
}

}  // namespace rmsequiv
