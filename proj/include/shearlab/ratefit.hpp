#pragma once

// Decay-rate extraction and scaling-exponent fits.

#include "shearlab/decay_curve.hpp"
#include "shearlab/errors.hpp"
#include "shearlab/profiles.hpp"
#include "shearlab/timescales.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace shearlab {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0; ///< RMS of the residuals
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeMismatch("least squares needs equal lengths");
    if (x.size() < 2) throw InsufficientData("least squares needs at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw InsufficientData("least squares needs distinct abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

// ---------------------------------------------------------------------------
// Single curves

struct FitWindow {
    double upper = std::exp(-1.0);
    double lower = std::exp(-6.0);
};

struct DecayFit {
    double rate = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
    int points = 0;
    double t_first = 0.0; ///< first and last time used
    double t_last = 0.0;
};

/// Least-squares slope of log(norm / norm(0)) over the samples inside the
/// window; the curve has to pass below the lower edge.
inline DecayFit fit_decay(const DecayCurve& c, const FitWindow& w = {}) {
    c.validate();
    if (!(w.upper > w.lower && w.lower > 0.0 && w.upper <= 1.0)) throw InvalidParams("fit window needs 0 < lower < upper <= 1");
    if (c.size() < 3 || !(c.values.front() > 0.0)) throw WindowNotReached("curve too short or zero at t = 0");
    const double v0 = c.values.front();
    std::vector<double> t, lv;
    bool reached = false;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double r = c.values[i] / v0;
        if (r <= w.lower) {
            reached = true;
            break;
        }
        if (r <= w.upper) {
            t.push_back(c.times[i]);
            lv.push_back(std::log(r));
        }
    }
    if (!reached) throw WindowNotReached("normalized norm never falls below " + std::to_string(w.lower));
    if (t.size() < 3) throw WindowNotReached("fewer than 3 samples inside the fit window; record more often");
    const auto lf = least_squares(t, lv);
    DecayFit f;
    f.rate = -lf.slope;
    f.intercept = lf.intercept;
    f.residual = lf.residual;
    f.points = static_cast<int>(t.size());
    f.t_first = t.front();
    f.t_last = t.back();
    return f;
}

inline double fit_decay_rate(const DecayCurve& c, const FitWindow& w = {}) { return fit_decay(c, w).rate; }

// ---------------------------------------------------------------------------
// Rates across nu

struct ScalingFit {
    std::vector<double> nus;
    std::vector<double> rates;
    double gamma = 0.0;
    double intercept = 0.0; ///< log lambda = intercept + gamma log nu
    double residual = 0.0;
    std::string window = "[e^-1, e^-6]";
};

inline ScalingFit fit_scaling_exponent(const std::vector<double>& nus, const std::vector<double>& rates) {
    if (nus.size() != rates.size()) throw ShapeMismatch("nus and rates differ in length");
    if (nus.size() < 3) throw InsufficientData("need at least 3 nu values");
    for (std::size_t i = 0; i < nus.size(); ++i)
        if (!(nus[i] > 0.0) || !(rates[i] > 0.0)) throw InvalidParams("nu and rates must be positive");
    const auto [lo, hi] = std::minmax_element(nus.begin(), nus.end());
    if (std::log10(*hi / *lo) < 2.0 - 1e-9) throw InsufficientData("nu values must span at least two decades");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < nus.size(); ++i) {
        x.push_back(std::log(nus[i]));
        y.push_back(std::log(rates[i]));
    }
    const auto lf = least_squares(x, y);
    ScalingFit f;
    f.nus = nus;
    f.rates = rates;
    f.gamma = lf.slope;
    f.intercept = lf.intercept;
    f.residual = lf.residual;
    return f;
}

struct PredictedExponent {
    double gamma = 0.0;
    double log_power = 0.0; ///< lambda ~ nu^gamma |log nu|^log_power
    std::string note;
};

inline PredictedExponent predicted_exponent(const ShearProfile& prof) {
    PredictedExponent p;
    switch (prof.family()) {
    case Family::poly_crit:
    case Family::radial_power:
    case Family::radial_exp: {
        const double n = rate_order(prof);
        p.gamma = (n + 1.0) / (n + 3.0);
        std::ostringstream os;
        os << "(n+1)/(n+3) with n = " << n;
        p.note = os.str();
        break;
    }
    case Family::flat_crit:
        p.gamma = 1.0;
        p.log_power = 2.0 / prof.param("p");
        p.note = "nu |log nu|^(2/p)";
        break;
    case Family::holder_singular:
    case Family::triangle:
        p.gamma = 1.0 / 3.0;
        p.note = "singular derivative, b' bounded below";
        break;
    case Family::vortex:
        p.gamma = 1.0 / 3.0;
        p.note = "point vortex";
        break;
    case Family::custom_table:
    case Family::constant:
        throw UnsupportedFamily("no predicted exponent for family " + to_string(prof.family()));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Per-streamline rates

struct LocalRateEntry {
    double y = 0.0;
    double rate = std::numeric_limits<double>::quiet_NaN();      ///< fitted; NaN if the window was not reached
    double predicted = std::numeric_limits<double>::quiet_NaN(); ///< Lambda_nu at the nearest table point
    double ratio = std::numeric_limits<double>::quiet_NaN();
    bool reached = false;
    bool flagged = false; ///< rate < predicted * floor
};

struct LocalRateReport {
    std::vector<LocalRateEntry> entries;
    double floor = 0.0;
    int not_reached = 0;
    int flagged = 0;

    /// Fitted rate at the entry closest to y.
    const LocalRateEntry& at(double y) const {
        if (entries.empty()) throw InvalidParams("empty local rate report");
        std::size_t best = 0;
        for (std::size_t i = 1; i < entries.size(); ++i)
            if (std::abs(wrap_signed(entries[i].y - y)) < std::abs(wrap_signed(entries[best].y - y))) best = i;
        return entries[best];
    }
};

/// Fits each per-y curve; with a table, compares against its Lambda_nu column.
inline LocalRateReport local_rate_profile(const std::vector<double>& ys, const std::vector<DecayCurve>& curves,
                                          const TimescaleTable* table = nullptr, double floor = 0.1,
                                          const FitWindow& w = {}) {
    if (ys.size() != curves.size()) throw ShapeMismatch("one curve per location expected");
    LocalRateReport rep;
    rep.floor = floor;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        LocalRateEntry e;
        e.y = ys[i];
        try {
            e.rate = std::max(0.0, fit_decay_rate(curves[i], w));
            e.reached = true;
        } catch (const WindowNotReached&) {
            ++rep.not_reached;
        }
        if (table && !table->grid.empty()) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < table->grid.size(); ++j)
                if (std::abs(wrap_signed(table->grid[j] - e.y)) < std::abs(wrap_signed(table->grid[best] - e.y)))
                    best = j;
            e.predicted = table->rate_mod[best];
            if (e.reached && std::isfinite(e.predicted) && e.predicted > 0.0) {
                e.ratio = e.rate / e.predicted;
                e.flagged = e.rate < e.predicted * floor;
                rep.flagged += e.flagged;
            }
        }
        rep.entries.push_back(e);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Flat critical points

struct LogCorrectionReport {
    std::vector<double> nus;   ///< sorted by decreasing nu
    std::vector<double> ratio; ///< lambda / nu
    double slope = 0.0;        ///< d log(lambda/nu) / d log|log nu|
    double expected = 0.0;     ///< 2 / p
    bool ratio_increasing = false;  ///< lambda/nu increases as nu decreases
    bool damped_decreasing = false; ///< lambda/nu^0.8 decreases as nu decreases
    bool holds() const { return ratio_increasing && damped_decreasing; }
};

inline LogCorrectionReport logcorrection_check(const std::vector<double>& nus, const std::vector<double>& rates,
                                               double p) {
    if (nus.size() != rates.size()) throw ShapeMismatch("nus and rates differ in length");
    if (nus.size() < 4) throw InsufficientData("need at least 4 nu values");
    if (!(p > 0.0)) throw InvalidParams("p must be > 0");
    std::vector<std::size_t> idx(nus.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return nus[a] > nus[b]; });
    LogCorrectionReport rep;
    rep.expected = 2.0 / p;
    std::vector<double> x, y, damped;
    for (auto i : idx) {
        if (!(nus[i] > 0.0 && nus[i] < 1.0) || !(rates[i] > 0.0)) throw InvalidParams("need 0 < nu < 1 and rates > 0");
        rep.nus.push_back(nus[i]);
        rep.ratio.push_back(rates[i] / nus[i]);
        damped.push_back(rates[i] / std::pow(nus[i], 0.8));
        x.push_back(std::log(std::abs(std::log(nus[i]))));
        y.push_back(std::log(rates[i] / nus[i]));
    }
    rep.slope = least_squares(x, y).slope;
    rep.ratio_increasing = rep.damped_decreasing = true;
    for (std::size_t i = 1; i < rep.nus.size(); ++i) {
        if (!(rep.ratio[i] > rep.ratio[i - 1])) rep.ratio_increasing = false;
        if (!(damped[i] < damped[i - 1])) rep.damped_decreasing = false;
    }
    return rep;
}

} // namespace shearlab
