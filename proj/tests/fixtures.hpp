#pragma once

#include <vector>

#include "rmsequiv/data_model.hpp"
#include "rmsequiv/random_stream.hpp"

namespace fixture {

/// Pulse-oximetry comparison study: per-subject counts and mean differences (%).
inline rmsequiv::SummaryStats oximetry() {
    return rmsequiv::SummaryStats(
        {9, 10, 10, 10, 5, 10, 10, 10, 10, 10, 10, 10, 2, 10, 10, 10},
        {-0.026, 0.447, 0.083, -0.103, -2.587, -0.610, 0.040, -0.593, 0.963, 0.643, -0.200, -1.337,
         -4.333, -2.807, 0.563, -0.797},
        221.037);
}

/// A random feasible summary: n in [2, 12], m_i in [1, 12] with N - n >= 1.
inline rmsequiv::SummaryStats random_summary(rmsequiv::RandomStream& rng) {
    const auto n = 2 + static_cast<std::size_t>(rng.uniform() * 11);
    std::vector<int> m(n);
    std::vector<double> ybar(n);
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = 1 + static_cast<int>(rng.uniform() * 12);
        ybar[i] = 3.0 * rng.normal();
    }
    m[0] = std::max(m[0], 2);
    return rmsequiv::SummaryStats(m, ybar, 0.1 + 20.0 * rng.uniform());
}

}  // namespace fixture
