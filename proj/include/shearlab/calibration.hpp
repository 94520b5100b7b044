#pragma once

// Pilot-calibrated floors for the Monte Carlo acceptance checks. The baseline
// run and the acceptance run use the same cases with disjoint seed ranges.

#include "shearlab/coupling.hpp"
#include "shearlab/io.hpp"
#include "shearlab/sde.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace shearlab {

struct CouplingCase {
    std::string name;
    Family family;
    ProfileParams params;
    double y0;
};

inline std::vector<CouplingCase> coupling_cases() {
    return {
        {"triangle_y0.2", Family::triangle, {}, 0.2},
        {"sin_y0.0", Family::poly_crit, {{"N", 1}}, 0.0},
        {"sin_y0.25", Family::poly_crit, {{"N", 1}}, 0.25},
    };
}

struct CalibrationSettings {
    std::vector<double> coupling_nus{1e-3, 1e-4, 1e-5};
    double gap = 0.1;
    std::size_t trials = 1000;
    std::vector<double> escape_ells{0.05, 0.1};
    double escape_nu = 1e-3;
    double escape_C = 2.0;
    std::size_t escape_paths = 20000;
    double se_margin = 5.0; ///< floor = pilot estimate - se_margin * SE
};

inline constexpr std::uint64_t kBaselineSeed = 100001;
inline constexpr std::uint64_t kAcceptanceSeed = 1;

inline CouplingBatch run_coupling_case(const CouplingCase& c, double nu, const CalibrationSettings& s,
                                       std::uint64_t seed) {
    const auto prof = make_profile(c.family, c.params);
    return couple_torus_batch(prof, nu, 0.0, s.gap, c.y0, s.trials, seed);
}

/// Runs the pilots and returns the floors document.
inline json calibrate_floors(const CalibrationSettings& s = {}, std::uint64_t seed = kBaselineSeed) {
    json doc;
    doc["seed"] = seed;
    doc["se_margin"] = s.se_margin;
    json coupling = json::array();
    for (const auto& c : coupling_cases()) {
        json entry{{"case", c.name}, {"gap", s.gap}, {"trials", s.trials}};
        double floor = 1.0;
        json pilots = json::array();
        for (double nu : s.coupling_nus) {
            const auto b = run_coupling_case(c, nu, s, seed);
            pilots.push_back({{"nu", nu}, {"fraction", b.fraction.value}, {"se", b.fraction.se}, {"max_cost", b.max_cost}});
            floor = std::min(floor, b.fraction.value - s.se_margin * b.fraction.se);
        }
        entry["pilot"] = pilots;
        entry["floor"] = std::max(0.0, floor);
        coupling.push_back(entry);
    }
    doc["coupling"] = coupling;
    json escape = json::array();
    for (double ell : s.escape_ells) {
        const auto r = boundary_escape_test(s.escape_nu, ell, s.escape_paths, seed, s.escape_C);
        escape.push_back({{"ell", ell},
                          {"nu", s.escape_nu},
                          {"C", s.escape_C},
                          {"paths", s.escape_paths},
                          {"pilot", r.probability.value},
                          {"se", r.probability.se},
                          {"floor", std::max(0.0, r.probability.value - s.se_margin * r.probability.se)}});
    }
    doc["escape"] = escape;
    return doc;
}

inline double coupling_floor(const json& doc, const std::string& name) {
    for (const auto& e : doc.at("coupling"))
        if (e.at("case") == name) return e.at("floor").get<double>();
    throw InvalidParams("floors file has no coupling case " + name);
}

inline double escape_floor(const json& doc, double ell) {
    for (const auto& e : doc.at("escape"))
        if (std::abs(e.at("ell").get<double>() - ell) < 1e-12) return e.at("floor").get<double>();
    throw InvalidParams("floors file has no escape entry for ell = " + fmt(ell));
}

} // namespace shearlab
