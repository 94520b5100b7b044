#pragma once

// PDE decay-rate runs with automatic resolution, shared by the CLI and the
// acceptance driver.

#include "shearlab/pde.hpp"
#include "shearlab/ratefit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace shearlab {

struct RateRunOptions {
    int K = 1;              ///< streamwise modes (torus) or angular modes (disk)
    int M = 0;              ///< y points or radial cells; 0 picks from ell_nu
    int min_points = 64;
    double disk_cells_per_ell = 4.0; ///< radial cells per ell_nu when M = 0
    double dt = 0.0;        ///< 0 picks from the step limits
    double dt_safety = 0.9;
    double t_max = 0.0;     ///< 0 means t_max_mult * T_nu
    double t_max_mult = 60.0;
    int records_per_T = 40; ///< norm samples per T_nu
    FitWindow window;
    std::vector<double> probe_y; ///< torus only
    std::function<cplx(double)> shape; ///< y (or r) dependence of the initial mode; default 1 (torus) or r (disk)
    double centre_layer = 0.0; ///< disk: if > 0, use centre_layer_shape with this width multiplier
};

struct RateRun {
    double nu = 0.0;
    double T_nu = 0.0;
    int M = 0;
    double dt = 0.0;
    DecayCurve curve;
    DecayFit fit;
    bool fitted = false;
    std::vector<double> probe_y;
    std::vector<DecayCurve> probes;
};

namespace detail {

inline double global_T(const ShearProfile& prof, double nu) {
    return global_timescale(minimal_differential(prof), nu);
}

inline int steps_between(double interval, double dt) { return std::max(1, static_cast<int>(interval / dt)); }

} // namespace detail

/// Evolves a single streamwise mode until its L2 norm passes the lower edge of
/// the fit window (or t_max), then fits the decay rate.
inline RateRun measure_torus_rate(const ShearProfile& prof, double nu, const RateRunOptions& opt = {}) {
    RateRun out;
    out.nu = nu;
    out.T_nu = detail::global_T(prof, nu);
    out.M = opt.M > 0 ? opt.M : recommended_M(prof, nu, opt.min_points);
    const auto lim = torus_step_limits(prof, nu, opt.K, out.M, false);
    out.dt = opt.dt > 0.0 ? opt.dt : opt.dt_safety * std::min(lim.advection, lim.diffusion);
    const double t_max = opt.t_max > 0.0 ? opt.t_max : opt.t_max_mult * out.T_nu;
    std::function<cplx(double)> shape = opt.shape;
    if (!shape) shape = [](double) { return cplx(0.5, 0.0); };
    const auto f0 = TorusField::single_mode(opt.K, out.M, shape, 1);

    TorusOptions o;
    o.t_end = t_max;
    o.dt = out.dt;
    o.record_every = detail::steps_between(out.T_nu / opt.records_per_T, out.dt);
    o.probe_y = opt.probe_y;
    o.stop_ratio = 0.5 * opt.window.lower;
    auto run = evolve_torus(prof, nu, f0, o);
    out.curve = run.l2;
    out.probe_y = run.probe_y;
    out.probes = run.probes;
    try {
        out.fit = fit_decay(out.curve, opt.window);
        out.fitted = true;
    } catch (const WindowNotReached&) {
    }
    return out;
}

/// m = 1 radial shape r/w exp(-r^2/w^2) with w = ell_nu at the centre: data
/// living in the critical layer around r = 0.
inline std::function<cplx(double)> centre_layer_shape(const ShearProfile& prof, double nu, double width_mult = 1.0) {
    const double w = width_mult * std::sqrt(nu * local_timescale(prof, nu, 0.0));
    return [w](double r) { return cplx(r / w * std::exp(-r * r / (w * w)), 0.0); };
}

inline RateRun measure_disk_rate(const ShearProfile& prof, double nu, const RateRunOptions& opt = {}) {
    RateRun out;
    out.nu = nu;
    out.T_nu = detail::global_T(prof, nu);
    int P = opt.M;
    if (P <= 0) {
        P = std::max(opt.min_points, 4);
        const double ell = min_ell(prof, nu);
        while (std::isfinite(ell) && P < opt.disk_cells_per_ell / ell) P *= 2;
    }
    out.M = P;
    double dt = opt.dt;
    if (dt <= 0.0) {
        double maxb = 0.0;
        for (int j = 0; j < P; ++j) maxb = std::max(maxb, std::abs(prof.value((j + 0.5) / P)));
        const double cap = prof.family() == Family::vortex ? 0.1 : 0.05;
        const double bref = prof.family() == Family::vortex ? std::abs(prof.value(0.5 / P)) : maxb;
        dt = bref > 0.0 ? opt.dt_safety * cap / (opt.K * bref) : 0.01 * out.T_nu;
        dt = std::min(dt, 0.01 * out.T_nu);
    }
    out.dt = dt;
    const double t_max = opt.t_max > 0.0 ? opt.t_max : opt.t_max_mult * out.T_nu;
    std::function<cplx(double)> shape = opt.shape;
    if (opt.centre_layer > 0.0) shape = centre_layer_shape(prof, nu, opt.centre_layer);
    if (!shape) shape = [](double r) { return cplx(0.5 * r, 0.0); };
    const auto f0 = DiskField::single_mode(opt.K, P, shape, 1);

    DiskOptions o;
    o.t_end = t_max;
    o.dt = dt;
    o.record_every = detail::steps_between(out.T_nu / opt.records_per_T, dt);
    o.stop_ratio = 0.5 * opt.window.lower;
    auto run = evolve_disk(prof, nu, f0, o);
    out.curve = run.l2;
    try {
        out.fit = fit_decay(out.curve, opt.window);
        out.fitted = true;
    } catch (const WindowNotReached&) {
    }
    return out;
}

struct ExponentStudy {
    std::vector<RateRun> runs;
    ScalingFit fit;
    PredictedExponent predicted;
    bool complete = false; ///< every run reached the fit window
};

inline ExponentStudy exponent_study(const ShearProfile& prof, const std::vector<double>& nus,
                                    const RateRunOptions& opt = {}) {
    ExponentStudy s;
    std::vector<double> ok_nu, rates;
    for (double nu : nus) {
        auto r = is_radial(prof.kind()) ? measure_disk_rate(prof, nu, opt) : measure_torus_rate(prof, nu, opt);
        if (r.fitted) {
            ok_nu.push_back(nu);
            rates.push_back(r.fit.rate);
        }
        s.runs.push_back(std::move(r));
    }
    s.complete = ok_nu.size() == nus.size();
    s.fit = fit_scaling_exponent(ok_nu, rates);
    try {
        s.predicted = predicted_exponent(prof);
    } catch (const UnsupportedFamily&) {
        s.predicted.gamma = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
}

} // namespace shearlab
