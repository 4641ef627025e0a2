#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include <boost/math/tools/minima.hpp>

namespace rmsequiv::detail {

struct Minimum1d {
    double x = 0.0;
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
};

/// Global-ish 1-D minimization on [lo, hi]: scan `grid_points` equally spaced
/// abscissae, then polish the best cell with Brent's method. The scan guards
/// against the flat or multi-modal profiles that a single local search misses.
template <class F>
Minimum1d grid_brent_minimize(F&& f, double lo, double hi, int grid_points,
                              int bits = 45, std::uintmax_t max_iter = 200) {
    const double step = (hi - lo) / (grid_points - 1);
    int best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid_points; ++k) {
        const double v = f(lo + step * k);
        if (v < best_value) {
            best_value = v;
            best = k;
        }
    }
    const double a = lo + step * std::max(0, best - 1);
    const double b = lo + step * std::min(grid_points - 1, best + 1);
    std::uintmax_t iters = max_iter;
    const auto [x, value] = boost::math::tools::brent_find_minima(f, a, b, bits, iters);

    Minimum1d out;
    out.converged = iters < max_iter;
    if (value <= best_value) {
        out.x = x;
        out.value = value;
    } else {
        out.x = lo + step * best;
        out.value = best_value;
    }
    return out;
}

}  // namespace rmsequiv::detail
