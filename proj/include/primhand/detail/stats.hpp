#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "primhand/errors.hpp"

namespace primhand::detail {

// Linear-interpolation quantile on an already sorted sample (the common
// "type 7" definition: position p*(m-1)).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ValidationError("quantile of empty sample");
    if (sorted.size() == 1) return sorted[0];
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - std::floor(pos);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct SampleStats {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0, stddev = 0;
    std::size_t count = 0;
};

inline SampleStats describe(std::vector<double> values) {
    if (values.empty()) throw ValidationError("statistics of empty sample");
    std::sort(values.begin(), values.end());
    SampleStats s;
    s.count = values.size();
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile_sorted(values, 0.25);
    s.median = quantile_sorted(values, 0.5);
    s.q3 = quantile_sorted(values, 0.75);
    double sum = 0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double acc = 0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(values.size()));
    return s;
}

}  // namespace primhand::detail
