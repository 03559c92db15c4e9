// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

namespace csimap {

// Pairwise summation: O(log n) error growth and a fixed association order,
// so results do not depend on how the values were produced (worker count,
// chunking). All dataset means go through this.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n <= 8) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double mean(std::span<const double> v) {
    return pairwise_sum(v) / static_cast<double>(v.size());
}

} // namespace csimap
