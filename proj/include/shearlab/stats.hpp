#pragma once

#include "shearlab/parallel.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace shearlab {

/// Monte Carlo estimate with its standard error.
struct Estimate {
    double value = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
};

/// Sample mean with delete-one jackknife standard error. Sums use a fixed
/// pairwise order, so the result does not depend on thread scheduling.
inline Estimate jackknife_mean(const std::vector<double>& v) {
    Estimate e;
    e.n = v.size();
    if (v.empty()) return e;
    const double n = static_cast<double>(v.size());
    const double total = tree_sum(v);
    e.value = total / n;
    if (v.size() < 2) {
        e.se = 0.0;
        return e;
    }
    // leave-one-out means m_i = (total - v_i) / (n - 1)
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double mi = (total - v[i]) / (n - 1.0);
        dev[i] = (mi - e.value) * (mi - e.value);
    }
    e.se = std::sqrt((n - 1.0) / n * tree_sum(dev));
    return e;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace shearlab
