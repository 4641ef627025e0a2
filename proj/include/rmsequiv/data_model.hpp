#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rmsequiv/error.hpp"
#include "rmsequiv/special_functions.hpp"

namespace rmsequiv {

/// Raw paired-difference measurements, one group per subject, in input order.
struct SubjectValues {
    std::string id;
    std::vector<double> values;
};

class GroupedSample {
  public:
    GroupedSample() = default;
    explicit GroupedSample(std::vector<SubjectValues> groups) : groups_(std::move(groups)) {
        validate();
    }

    [[nodiscard]] const std::vector<SubjectValues>& groups() const noexcept { return groups_; }
    [[nodiscard]] std::size_t subject_count() const noexcept { return groups_.size(); }

  private:
    void validate() const {
        if (groups_.size() < 2) {
            throw ValidationError("at least 2 subjects are required, got " +
                                  std::to_string(groups_.size()));
        }
        for (const auto& g : groups_) {
            if (g.values.empty()) {
                throw ValidationError("subject '" + g.id + "' has no values");
            }
            for (double v : g.values) {
                if (!std::isfinite(v)) {
                    throw ValidationError("subject '" + g.id + "' has a non-finite value");
                }
            }
        }
    }

    std::vector<SubjectValues> groups_;
};

/// Sufficient statistics (m_i, ybar_i, sse) of the one-way random-effects model.
class SummaryStats {
  public:
    SummaryStats(std::vector<int> m, std::vector<double> ybar, double sse)
        : m_(std::move(m)), ybar_(std::move(ybar)), sse_(sse) {
        if (m_.size() != ybar_.size()) {
            throw ValidationError("counts and means differ in length");
        }
        if (m_.size() < 2) {
            throw ValidationError("at least 2 subjects are required, got " +
                                  std::to_string(m_.size()));
        }
        for (std::size_t i = 0; i < m_.size(); ++i) {
            if (m_[i] < 1) {
                throw ValidationError("subject " + std::to_string(i + 1) +
                                      " has non-positive count");
            }
            if (!std::isfinite(ybar_[i])) {
                throw ValidationError("subject " + std::to_string(i + 1) + " has non-finite mean");
            }
            total_ += m_[i];
        }
        if (total_ - static_cast<long>(m_.size()) < 1) {
            throw ValidationError(
                "no within-subject replication: N - n must be at least 1 "
                "(some subject needs 2 or more values)");
        }
        if (!(sse_ >= 0.0) || !std::isfinite(sse_)) {
            throw ValidationError("sse must be finite and non-negative");
        }
    }

    [[nodiscard]] const std::vector<int>& m() const noexcept { return m_; }
    [[nodiscard]] const std::vector<double>& ybar() const noexcept { return ybar_; }
    [[nodiscard]] double sse() const noexcept { return sse_; }
    [[nodiscard]] std::size_t n() const noexcept { return m_.size(); }
    /// Total number of observations N.
    [[nodiscard]] long total() const noexcept { return total_; }
    /// Within-subject degrees of freedom N - n.
    [[nodiscard]] long within_df() const noexcept { return total_ - static_cast<long>(n()); }

  private:
    std::vector<int> m_;
    std::vector<double> ybar_;
    double sse_;
    long total_ = 0;
};

struct LmmParams {
    double mu = 0.0;
    double sigma_w2 = 1.0;
    double sigma_b2 = 0.0;

    void validate() const {
        if (!(sigma_w2 > 0.0)) {
            throw DomainError("sigma_w2 must be positive");
        }
        if (!(sigma_b2 >= 0.0)) {
            throw DomainError("sigma_b2 must be non-negative");
        }
    }
};

/// H0: rho >= rho0 against Ha: rho < rho0 at level alpha.
struct Hypothesis {
    double rho0 = 3.0;
    double alpha = 0.05;

    void validate() const {
        if (!(rho0 > 0.0) || !std::isfinite(rho0)) {
            throw DomainError("rho0 must be positive and finite");
        }
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw DomainError("alpha must lie in (0, 1)");
        }
    }
};

enum class Method { gt, gt_plain, z_score, z_wald };

inline std::string_view method_name(Method m) noexcept {
    switch (m) {
        case Method::gt: return "gt";
        case Method::gt_plain: return "gt-plain";
        case Method::z_score: return "zscore";
        case Method::z_wald: return "zwald";
    }
    return "?";
}

inline std::optional<Method> parse_method(std::string_view name) noexcept {
    for (Method m : {Method::gt, Method::gt_plain, Method::z_score, Method::z_wald}) {
        if (name == method_name(m)) {
            return m;
        }
    }
    return std::nullopt;
}

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

struct TestResult {
    Method method = Method::gt;
    Probability p_value;
    Interval ci_rho;
    std::optional<Interval> ci_rho2;
    LmmParams estimates;
    std::optional<std::size_t> B;
    std::optional<std::uint64_t> seed;
};

/// Reduces raw grouped values to (m, ybar, sse). Subjects with a single value
/// contribute nothing to sse.
inline SummaryStats summarize(const GroupedSample& raw) {
    std::vector<int> m;
    std::vector<double> ybar;
    m.reserve(raw.subject_count());
    ybar.reserve(raw.subject_count());
    double sse = 0.0;
    for (const auto& g : raw.groups()) {
        double mean = 0.0;
        for (double v : g.values) {
            mean += v;
        }
        mean /= static_cast<double>(g.values.size());
        double ss = 0.0;
        for (double v : g.values) {
            ss += (v - mean) * (v - mean);
        }
        m.push_back(static_cast<int>(g.values.size()));
        ybar.push_back(mean);
        sse += ss;
    }
    return SummaryStats(std::move(m), std::move(ybar), sse);
}

/// Root mean square rho = sqrt(mu^2 + sigma_b^2 + sigma_w^2).
inline double rms(const LmmParams& p) noexcept {
    return std::sqrt(p.mu * p.mu + p.sigma_b2 + p.sigma_w2);
}

}  // namespace rmsequiv
