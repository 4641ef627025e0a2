#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "rmsequiv/error.hpp"

namespace rmsequiv::detail {

struct RootTolerance {
    double rel_x = 1e-12;   // relative width of the final bracket
    double abs_x = 0.0;     // absolute width of the final bracket
    double abs_f = 0.0;     // stop as soon as |f| <= abs_f
    int max_iter = 300;
};

/// Brent's zero-in (Brent 1973, ch. 4) on a bracket [a, b] with f(a), f(b) of
/// opposite sign (or one of them zero). Returns the final best abscissa.
template <class F>
double brent_root(F&& f, double a, double b, double fa, double fb, const RootTolerance& tol) {
    if (fa == 0.0) {
        return a;
    }
    if (fb == 0.0) {
        return b;
    }
    if ((fa > 0.0) == (fb > 0.0)) {
        throw NumericalError("brent_root: root is not bracketed");
    }
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double c = a;
    double fc = fa;
    double d = b - a;
    double e = d;
    for (int iter = 0; iter < tol.max_iter; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 2.0 * eps * std::abs(b) + 0.5 * (tol.rel_x * std::abs(b) + tol.abs_x);
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0 || std::abs(fb) <= tol.abs_f) {
            return b;
        }
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            // Inverse quadratic interpolation, or secant when only two points.
            const double s = fb / fa;
            double p = 0.0;
            double q = 0.0;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) {
                q = -q;
            }
            p = std::abs(p);
            const double min1 = 3.0 * xm * q - std::abs(tol1 * q);
            const double min2 = std::abs(e * q);
            if (2.0 * p < std::min(min1, min2)) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol1 ? d : std::copysign(tol1, xm);
        fb = f(b);
    }
    throw NumericalError("brent_root: iteration limit reached");
}

}  // namespace rmsequiv::detail
