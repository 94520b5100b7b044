#pragma once

// Global and local enhanced-dissipation timescales, local rate maps and the
// numeric two-sided bounds relating t_nu to b'.

#include "shearlab/errors.hpp"
#include "shearlab/parallel.hpp"
#include "shearlab/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace shearlab {

namespace detail {

enum class CrossingStatus { found, never, exits };

struct Crossing {
    CrossingStatus status;
    double t;
};

/// First t with t * D(t) >= 1, bracketed by doubling/halving from t = 1 and
/// refined by bisection to relative `rtol`. D returns NaN once the probe point
/// leaves the domain.
inline Crossing first_crossing(const std::function<double(double)>& D, double rtol = 1e-13) {
    auto F = [&](double t) { return t * D(t); };
    double lo = 0.0, hi = 1.0;
    double f = F(hi);
    int k = 0;
    while (std::isnan(f) && k++ < 200) {
        hi *= 0.5;
        f = F(hi);
    }
    if (std::isnan(f)) return {CrossingStatus::exits, 0.0};
    if (f >= 1.0) {
        lo = 0.5 * hi;
        k = 0;
        while (F(lo) >= 1.0 && k++ < 2000 && lo > 1e-300) {
            hi = lo;
            lo *= 0.5;
        }
    } else {
        bool seen_nonzero = f > 0.0;
        k = 0;
        for (;;) {
            lo = hi;
            hi *= 2.0;
            f = F(hi);
            if (std::isnan(f)) {
                double a = lo, b = hi;
                for (int it = 0; it < 200; ++it) {
                    double m = 0.5 * (a + b);
                    if (std::isnan(F(m))) b = m; else a = m;
                }
                if (F(a) >= 1.0) {
                    hi = a;
                    break;
                }
                return {CrossingStatus::exits, a};
            }
            if (f > 0.0) seen_nonzero = true;
            if (f >= 1.0) break;
            if (++k > 400 || (!seen_nonzero && k > 200)) return {CrossingStatus::never, hi};
        }
    }
    for (int it = 0; it < 400 && (hi - lo) > rtol * hi; ++it) {
        double m = 0.5 * (lo + hi);
        double fm = F(m);
        if (!std::isnan(fm) && fm >= 1.0) hi = m; else lo = m;
    }
    return {CrossingStatus::found, hi};
}

inline void check_nu(double nu) {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw InvalidParams("nu must be positive and finite");
}

} // namespace detail

/// Root of t * phi(sqrt(nu t)) = 1.
inline double global_timescale(const VelocityDifferential& diff, double nu) {
    detail::check_nu(nu);
    if (diff.shape == EnvelopeShape::zero || !(diff.c > 0.0)) throw NoEnhancement("phi vanishes identically");
    auto D = [&](double t) { return diff.phi(std::sqrt(nu * t)); };
    auto c = detail::first_crossing(D);
    if (c.status == detail::CrossingStatus::found) return c.t;
    throw BracketFailure("t * phi(sqrt(nu t)) never reaches 1");
}

/// Freezing radius around flat (infinite-order) critical points.
inline double flat_freeze_radius(const ShearProfile& prof, double loc) {
    double r = prof.h0() / 4.0;
    for (double p : prof.distinguished_points()) {
        double d = prof.distance(p, loc);
        if (d > 1e-14) r = std::min(r, 0.5 * d);
    }
    return r;
}

/// Flat point whose freezing window contains `loc`, if any.
inline std::optional<double> flat_window_center(const ShearProfile& prof, double loc) {
    for (const auto& c : prof.critical_points()) {
        if (!c.infinite_order()) continue;
        if (prof.distance(loc, c.location) < flat_freeze_radius(prof, c.location)) return c.location;
    }
    return std::nullopt;
}

namespace detail {

/// t_nu along one fixed direction; NaN-signalled domain exits are reported.
inline Crossing directional_timescale(const ShearProfile& prof, double nu, double y, int dir) {
    const double by = prof.value(y);
    auto D = [&](double t) {
        double probe = y + dir * std::sqrt(nu * t);
        if (!prof.in_domain(probe)) return std::numeric_limits<double>::quiet_NaN();
        return std::abs(prof.value(probe) - by);
    };
    return first_crossing(D);
}

} // namespace detail

/// Local timescale t_nu(y): first t with t |b(y + iota sqrt(nu t)) - b(y)| >= 1.
/// When both directions are admissible the smaller root is returned. Inside
/// the freezing window of a flat point the value at the flat point is used.
inline double local_timescale(const ShearProfile& prof, double nu, double loc) {
    detail::check_nu(nu);
    if (!prof.in_domain(loc)) throw InvalidParams("location outside domain");
    double y = prof.canonical(loc);
    if (auto c = flat_window_center(prof, y)) y = *c;

    const std::vector<int> dirs = (is_radial(prof.kind()) && y <= 0.0) ? std::vector<int>{1}
                                                                       : prof.valid_directions(y);
    double best = std::numeric_limits<double>::infinity();
    bool any_exit = false, any_never = false;
    for (int dir : dirs) {
        auto c = detail::directional_timescale(prof, nu, y, dir);
        if (c.status == detail::CrossingStatus::found) best = std::min(best, c.t);
        else if (c.status == detail::CrossingStatus::exits) any_exit = true;
        else any_never = true;
    }
    if (std::isfinite(best)) return best;
    if (any_exit) throw StepExitsDomain("probe leaves the domain before t |db| reaches 1 at " + std::to_string(loc));
    if (any_never) throw NoEnhancement("t |b(y + h) - b(y)| never reaches 1 at " + std::to_string(loc));
    throw NoEnhancement("no admissible direction at " + std::to_string(loc));
}

/// Order used for lambda_min = nu^((n+1)/(n+3)): the maximal finite vanishing
/// order, or q for radial-power profiles (n = max(q, N)).
inline double rate_order(const ShearProfile& prof) {
    double n = prof.max_finite_order();
    if (prof.family() == Family::radial_power) n = std::max(n, prof.param("q"));
    return n;
}

inline double lambda_min(const ShearProfile& prof, double nu) {
    if (prof.family() == Family::flat_crit) return nu * std::pow(std::abs(std::log(nu)), 2.0 / prof.param("p"));
    const double n = rate_order(prof);
    return std::pow(nu, (n + 1.0) / (n + 3.0));
}

struct TimescaleTable {
    double nu = 0.0;
    std::vector<double> grid;
    std::vector<double> t_local;
    std::vector<double> ell_local;
    std::vector<double> rate_bar; ///< NaN where undefined (flat points)
    std::vector<double> rate_mod; ///< NaN where undefined
    double T_global = 0.0;
    double lambda_min = 0.0;
    int N = 0;
};

/// Localized rate lambda-bar at a single location.
inline double local_rate_bar(const ShearProfile& prof, double nu, double loc) {
    detail::check_nu(nu);
    if (prof.has_flat_point() || prof.family() == Family::flat_crit)
        throw UnsupportedProfile("local rate is undefined for profiles with flat critical points");
    if (prof.family() == Family::constant) throw NoEnhancement("constant shear");
    const double y = prof.canonical(loc);

    for (const auto& c : prof.critical_points()) {
        const double k = c.order;
        const double half = std::pow(nu, 1.0 / (k + 3.0));
        if (prof.distance(y, c.location) < half) return std::pow(nu, (k + 1.0) / (k + 3.0));
    }
    if (prof.family() == Family::radial_power && prof.param("q") > 0.0) {
        const double q = prof.param("q");
        if (y < std::pow(nu, 1.0 / (q + 3.0))) return std::pow(nu, (q + 1.0) / (q + 3.0));
    }

    const SingularPoint* nearest = nullptr;
    double nd = std::numeric_limits<double>::infinity();
    for (const auto& s : prof.singular_points()) {
        double d = prof.distance(y, s.location);
        if (d < nd) { nd = d; nearest = &s; }
    }
    if (nearest && nearest->alpha < 1.0 && nd < prof.h0()) {
        const double a = nearest->alpha;
        if (nd <= std::pow(nu, 1.0 / (a + 2.0))) return std::pow(nu, a / (a + 2.0));
        return std::cbrt(nu) * std::pow(nd, 2.0 * (a - 1.0) / 3.0);
    }
    double slope;
    if (nearest && nd < 1e-14) {
        // kink: mean of the one-sided slopes
        const double e = 1e-9;
        slope = 0.5 * (std::abs(prof.eval(prof.canonical(y + e), 1)) + std::abs(prof.eval(prof.canonical(y - e), 1)));
    } else {
        slope = std::abs(prof.eval(y, 1));
    }
    return std::cbrt(nu) * std::pow(slope, 2.0 / 3.0);
}

inline double local_rate_mod(const ShearProfile& prof, double nu, double rate_bar) {
    const double N = rate_order(prof);
    return rate_bar / (1.0 + std::pow(std::abs(std::log(nu)), 4.0 * N)) + lambda_min(prof, nu);
}

/// t_nu and ell_nu on a grid plus the rate columns where they are defined.
inline TimescaleTable timescale_table(const ShearProfile& prof, double nu, const std::vector<double>& grid) {
    detail::check_nu(nu);
    TimescaleTable tab;
    tab.nu = nu;
    tab.grid = grid;
    std::sort(tab.grid.begin(), tab.grid.end());
    const std::size_t n = tab.grid.size();
    tab.t_local.assign(n, 0.0);
    tab.ell_local.assign(n, 0.0);
    tab.rate_bar.assign(n, std::numeric_limits<double>::quiet_NaN());
    tab.rate_mod.assign(n, std::numeric_limits<double>::quiet_NaN());
    tab.N = static_cast<int>(prof.max_finite_order());
    tab.lambda_min = lambda_min(prof, nu);
    tab.T_global = global_timescale(minimal_differential(prof), nu);
    const bool rates = !prof.has_flat_point();
    parallel_for(n, [&](std::size_t i) {
        const double y = tab.grid[i];
        tab.t_local[i] = local_timescale(prof, nu, y);
        tab.ell_local[i] = std::sqrt(nu * tab.t_local[i]);
        if (rates) {
            tab.rate_bar[i] = local_rate_bar(prof, nu, y);
            tab.rate_mod[i] = local_rate_mod(prof, nu, tab.rate_bar[i]);
        }
    });
    return tab;
}

/// Localized rate map; flat-point profiles are rejected.
inline TimescaleTable local_rate_map(const ShearProfile& prof, double nu, const std::vector<double>& grid) {
    if (prof.has_flat_point())
        throw UnsupportedProfile("local rate map is undefined for profiles with flat critical points");
    return timescale_table(prof, nu, grid);
}

inline std::vector<double> uniform_grid(const ShearProfile& prof, int n) {
    std::vector<double> g;
    if (n < 1) throw InvalidParams("grid size must be positive");
    switch (prof.kind()) {
    case DomainKind::torus:
        for (int i = 0; i < n; ++i) g.push_back(static_cast<double>(i) / n);
        break;
    case DomainKind::radial_disk:
        for (int i = 0; i < n; ++i) g.push_back((i + 0.5) / n);
        break;
    case DomainKind::radial_plane:
        for (int i = 0; i < n; ++i) g.push_back(2.0 * i / n);
        break;
    }
    return g;
}

/// Smallest constants for which each two-sided bound holds over the grid.
/// NaN marks a bound that does not apply to the profile.
struct SandwichReport {
    double nu = 0.0;
    double bprime_ratio_C = std::numeric_limits<double>::quiet_NaN();
    double tnu_sandwich_C = std::numeric_limits<double>::quiet_NaN();
    double locality_C = std::numeric_limits<double>::quiet_NaN();
    double weightequiv_C = std::numeric_limits<double>::quiet_NaN();
    double flat_C0 = std::numeric_limits<double>::quiet_NaN();
    int points_regular = 0;
    int points_flat = 0;
};

inline SandwichReport check_sandwich_bounds(const ShearProfile& prof, double nu, const std::vector<double>& grid) {
    detail::check_nu(nu);
    if (prof.family() == Family::custom_table)
        throw UnsupportedFamily("sandwich bounds are only checked for closed-form profiles");
    SandwichReport rep;
    rep.nu = nu;
    const bool radial = is_radial(prof.kind());
    const double hmax = radial ? 6.0 : 4.0;
    const double lognu = std::abs(std::log(nu));
    double cb = 1.0, ct = 1.0, cl = 1.0, cw = 1.0, c0 = 0.0;
    bool have_b = false, have_t = false, have_l = false, have_w = false, have_0 = false;

    auto abs_bp = [&](double z) -> double {
        if (!prof.in_domain(z)) return std::numeric_limits<double>::quiet_NaN();
        try {
            return std::abs(prof.eval(prof.canonical(z), 1));
        } catch (const SingularDerivative&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };

    for (double y0 : grid) {
        const double y = prof.canonical(y0);
        if (prof.family() == Family::vortex && y <= 0.0) continue;
        double t;
        try {
            t = local_timescale(prof, nu, y);
        } catch (const Error&) {
            continue;
        }
        const double ell = std::sqrt(nu * t);
        const int dir = prof.iota(y);

        if (flat_window_center(prof, y)) {
            const double bp = abs_bp(y + dir * ell);
            if (std::isfinite(bp) && bp > 0.0) {
                c0 = std::max(c0, 1.0 / (std::sqrt(nu) * bp * t));
                have_0 = true;
            }
            ++rep.points_flat;
            continue;
        }
        ++rep.points_regular;
        const double ref = abs_bp(y + dir * ell);
        if (std::isfinite(ref) && ref > 0.0) {
            for (int j = 0; j <= 70; ++j) {
                const double h = 0.5 + (hmax - 0.5) * j / 70.0;
                const double v = abs_bp(y + dir * ell * h);
                if (!std::isfinite(v) || v <= 0.0) continue;
                cb = std::max({cb, v / ref, ref / v});
                have_b = true;
            }
            const double s = t * ell * ref;
            ct = std::max({ct, s, 1.0 / s});
            have_t = true;
        }

        if (!radial && !prof.has_flat_point()) {
            bool near_crit = false;
            for (const auto& c : prof.critical_points()) {
                double tc = local_timescale(prof, nu, c.location);
                if (prof.distance(y, c.location) < lognu * lognu * std::sqrt(nu * tc)) near_crit = true;
            }
            if (!near_crit) {
                const double half = lognu * lognu * ell;
                double sup_t = t;
                for (int j = -8; j <= 8; ++j) {
                    double z = y + half * j / 8.0;
                    try {
                        sup_t = std::max(sup_t, local_timescale(prof, nu, prof.canonical(z)));
                    } catch (const Error&) {
                    }
                }
                cl = std::max(cl, sup_t / t);
                have_l = true;
            }
            const CriticalPoint* nc = nullptr;
            double nd = std::numeric_limits<double>::infinity();
            for (const auto& c : prof.critical_points()) {
                double d = prof.distance(y, c.location);
                if (d < nd) { nd = d; nc = &c; }
            }
            if (nc) {
                const double k = nc->order;
                const double li = std::pow(nu, 1.0 / (k + 3.0));
                if (nd >= li && nd <= prof.h0()) {
                    const double lb = local_rate_bar(prof, nu, y);
                    const double approx = std::cbrt(nu) * std::pow(nd, 2.0 * k / 3.0);
                    cw = std::max({cw, lb / approx, approx / lb});
                    have_w = true;
                }
            }
        }
    }
    if (have_b) rep.bprime_ratio_C = cb;
    if (have_t) rep.tnu_sandwich_C = ct;
    if (have_l) rep.locality_C = cl;
    if (have_w) rep.weightequiv_C = cw;
    if (have_0) rep.flat_C0 = std::max(c0, 1.0);
    return rep;
}

} // namespace shearlab
