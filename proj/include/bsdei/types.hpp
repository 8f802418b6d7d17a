#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bsdei {

// A point in R^d.  Dimensions stay tiny (d = 1 or 2 in practice), so a plain
// vector is fine for API-level containers; hot loops work on flat buffers.
using Point = std::vector<double>;

inline double sq_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace bsdei
