#pragma once

#include "shearlab/errors.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace shearlab {

/// Norm-versus-time series.
struct DecayCurve {
    std::vector<double> times;
    std::vector<double> values;
    std::string kind = "l2";

    void push(double t, double v) {
        times.push_back(t);
        values.push_back(v);
    }
    std::size_t size() const noexcept { return times.size(); }
    bool empty() const noexcept { return times.empty(); }

    void validate() const {
        if (times.size() != values.size()) throw ShapeMismatch("decay curve times/values length differ");
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
                throw InvalidParams("decay curve values must be finite and nonnegative");
            if (i > 0 && !(times[i] > times[i - 1])) throw InvalidParams("decay curve times must increase strictly");
        }
    }
};

} // namespace shearlab
