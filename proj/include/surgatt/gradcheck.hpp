#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "surgatt/linalg.hpp"

namespace surgatt {

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Central-difference check of `analytic` against f at x.
///
/// Per-component relative error is |a - n| / max(|a|, |n|, floor), where
/// floor = max(1e-8, 1e-3 * max_i max(|a_i|, |n_i|)). Components below the
/// floor are under the round-off resolution of a central difference at
/// step 1e-5 and are compared in absolute terms.
template <typename F>
GradCheckResult grad_check(F&& f, std::span<const double> x, std::span<const double> analytic, double step = 1e-5)
{
    Vec xp(x.begin(), x.end());
    Vec numeric(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + step;
        const double fp = f(std::span<const double>(xp));
        xp[i] = orig - step;
        const double fm = f(std::span<const double>(xp));
        xp[i] = orig;
        numeric[i] = (fp - fm) / (2.0 * step);
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    const double floor = std::max(1e-8, 1e-3 * scale);

    GradCheckResult r;
    r.checked = x.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = std::abs(analytic[i] - numeric[i]);
        const double rel = diff / std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        r.max_abs_error = std::max(r.max_abs_error, diff);
        if (rel > r.max_rel_error) {
            r.max_rel_error = rel;
            r.worst_index = i;
        }
    }
    return r;
}

}  // namespace surgatt
