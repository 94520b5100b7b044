#pragma once

#include "shearlab/errors.hpp"
#include "shearlab/parallel.hpp"
#include "shearlab/profiles.hpp"
#include "shearlab/rng.hpp"
#include "shearlab/stats.hpp"
#include "shearlab/timescales.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace shearlab {

enum class Phase { waiting, grow, shrink, fixup, coupled, aborted };

inline std::string to_string(Phase p) {
    switch (p) {
    case Phase::waiting: return "waiting";
    case Phase::grow: return "grow";
    case Phase::shrink: return "shrink";
    case Phase::fixup: return "fixup";
    case Phase::coupled: return "coupled";
    case Phase::aborted: return "aborted";
    }
    return "?";
}

/// One recorded step of a coupled pair. Torus: (a, b) = (x, y); radial:
/// (a, b) = (theta, r). Tilde quantities belong to the controlled copy.
struct PairSample {
    double t;
    Phase phase;
    double a, b, a_tilde, b_tilde;
    double rho, h;
    double control; ///< V (or U during the fixup stage)
    double cost;    ///< accumulated control cost
};

struct CouplingOptions {
    double dt = 0.0;         ///< 0: t_nu / 2000
    double cap_mult = 8.0;   ///< hard cap T_cap = cap_mult * t_nu
    double delta = 0.05;     ///< radial Step 1 tuning
    bool reflect = false;    ///< radial: disk with reflection at r = 1
    bool controls_off = false;
    bool trace = false;
    bool run_to_cap = false; ///< torus: keep stepping (uncontrolled) to T_cap and report end states
};

struct CouplingOutcome {
    std::uint64_t seed = 0;
    bool coupled = false;
    double couple_time = std::numeric_limits<double>::quiet_NaN();
    double cost = 0.0;
    double tau0 = std::numeric_limits<double>::quiet_NaN();
    double tau1 = std::numeric_limits<double>::quiet_NaN();
    double tau2 = std::numeric_limits<double>::quiet_NaN();
    double tau3 = std::numeric_limits<double>::quiet_NaN();
    double tau_bar = std::numeric_limits<double>::quiet_NaN();
    double t_nu = 0.0;
    double ell = 0.0;
    int iota = 1;
    int case_id = 1;
    Phase phase = Phase::waiting;
    double end_a = 0.0, end_b = 0.0, end_a_tilde = 0.0, end_b_tilde = 0.0; ///< with run_to_cap
    std::vector<std::string> flags;
    std::vector<PairSample> trace;

    bool has_flag(const std::string& f) const {
        for (const auto& g : flags)
            if (g == f) return true;
        return false;
    }
    std::string flag_string() const {
        std::string s;
        for (const auto& f : flags) s += (s.empty() ? "" : "|") + f;
        return s;
    }
};

namespace detail {

inline int sgn(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

/// Direction for the control: the admissible one with the smallest
/// directional timescale, preferring prof.iota() on ties.
inline int coupling_direction(const ShearProfile& prof, double nu, double y0) {
    const double y = prof.canonical(y0);
    std::vector<int> dirs = (is_radial(prof.kind()) && y <= 0.0) ? std::vector<int>{1} : prof.valid_directions(y);
    int best_dir = dirs.front();
    double best = std::numeric_limits<double>::infinity();
    const int pref = prof.iota(y);
    for (int dir : dirs) {
        auto c = directional_timescale(prof, nu, y, dir);
        if (c.status != CrossingStatus::found) continue;
        if (c.t < best * (1.0 - 1e-9) || (c.t <= best * (1.0 + 1e-9) && dir == pref)) {
            best = std::min(best, c.t);
            best_dir = dir;
        }
    }
    return best_dir;
}

inline double resolve_dt(double dt, double t_nu) {
    if (dt <= 0.0) dt = t_nu / 2000.0;
    if (dt > t_nu / 100.0) throw ResolutionError("coupling dt must be <= t_nu / 100");
    return dt;
}

} // namespace detail

/// Torus pair under shared noise; the controlled copy gets the extra drift
/// sqrt(2 nu) V dt in y. x0 and x0_tilde may be anything; rho is taken as the
/// representative of the x gap in (-1/2, 1/2], and the pair is relabelled so
/// that the shear closes the gap (the coupling problem is symmetric).
inline CouplingOutcome couple_torus(const ShearProfile& prof, double nu, double x0, double x0_tilde, double y0,
                                    std::uint64_t seed, const CouplingOptions& opt = {}) {
    if (prof.kind() != DomainKind::torus) throw InvalidParams("couple_torus needs a torus profile");
    if (!(nu > 0.0)) throw InvalidParams("nu must be > 0");
    CouplingOutcome out;
    out.seed = seed;
    double y = wrap_unit(y0);
    const auto flat_center = flat_window_center(prof, y);
    out.case_id = flat_center ? 2 : 1;
    out.t_nu = local_timescale(prof, nu, y);
    out.ell = std::sqrt(nu * out.t_nu);
    const double t_nu = out.t_nu, ell = out.ell;
    const double dt = detail::resolve_dt(opt.dt, t_nu);
    const double sq = std::sqrt(2.0 * nu * dt);

    int iota;
    if (flat_center && prof.distance(y, *flat_center) > 1e-12)
        iota = wrap_signed(y - *flat_center) > 0.0 ? 1 : -1;
    else
        iota = detail::coupling_direction(prof, nu, y);
    out.iota = iota;

    // Case 1: L = ell, V = 1/sqrt(t_nu) while growing. Case 2: L = sqrt(nu), V = 1.
    const double L = out.case_id == 1 ? ell : std::sqrt(nu);
    const double v_grow = out.case_id == 1 ? 1.0 / std::sqrt(t_nu) : 1.0;
    const double C = 1.0; // window multiplier for Case 2

    const double gap = wrap_signed(x0_tilde - x0);
    double x = x0, xt = x0 + gap;
    if (gap == 0.0) {
        out.coupled = true;
        out.couple_time = 0.0;
        out.phase = Phase::coupled;
        return out;
    }
    // orientation: g = sign of b(y + iota h) - b(y); rho' = g * rho must be > 0
    const int g = detail::sgn(prof.value(y + iota * ell) - prof.value(y));
    if (g == 0) throw NoEnhancement("shear does not separate neighbouring streamlines at y0");
    if (g * gap < 0.0) std::swap(x, xt);
    const double rho0 = std::abs(gap);
    const double rho_tol = 1e-3 * std::min(1.0, rho0);
    const double h_tol = 1e-3 * ell;

    double yt = y;
    const double mid = y0 + 2.0 * C * iota * ell;
    Phase phase = Phase::waiting;
    PathRng W(seed, 0, Channel::W), B(seed, 0, Channel::B);
    const long steps = static_cast<long>(std::ceil(opt.cap_mult * t_nu / dt));
    y = y0;
    yt = y0;

    auto record = [&](double t, double V) {
        if (!opt.trace) return;
        out.trace.push_back({t, phase, x, y, xt, yt, g * (xt - x), iota * (yt - y), V, out.cost});
    };
    record(0.0, 0.0);

    long n = 0;
    for (; n < steps; ++n) {
        const double t = n * dt;
        const double zw = W.normal(), zb = B.normal();
        // rho after this step does not depend on V (drift uses the current y)
        const double x_new = x - prof.value(y) * dt + sq * zw;
        const double xt_new = xt - prof.value(yt) * dt + sq * zw;
        const double y_free = y + sq * zb;
        const double h = iota * (yt - y);
        const double rho_new = g * (xt_new - x_new);

        double V = 0.0; // along iota
        if (!opt.controls_off) {
            if (phase == Phase::grow) {
                double target = h + std::sqrt(2.0 * nu) * v_grow * dt;
                if (target >= L * std::sqrt(std::max(rho_new, 0.0))) {
                    target = L * std::sqrt(std::max(rho_new, 0.0));
                    phase = Phase::shrink;
                    out.tau1 = t + dt;
                }
                V = (target - h) / (std::sqrt(2.0 * nu) * dt);
            } else if (phase == Phase::shrink) {
                if (rho_new < -rho_tol) throw ResolutionError("rho overshoots zero: coupling dt too coarse");
                const double target = L * std::sqrt(std::max(rho_new, 0.0));
                V = (target - h) / (std::sqrt(2.0 * nu) * dt);
            }
        }
        x = x_new;
        xt = xt_new;
        y = y_free;
        yt = yt + sq * zb + std::sqrt(2.0 * nu) * iota * V * dt;
        out.cost += V * V * dt;
        const double tn = t + dt;

        if (phase == Phase::shrink) {
            const double rho_now = g * (xt - x), h_now = iota * (yt - y);
            if (rho_now < rho_tol && std::abs(h_now) < h_tol) {
                // merge: the last residual of h is removed in one step
                out.cost += h_now * h_now / (2.0 * nu * dt);
                xt = x;
                yt = y;
                phase = Phase::coupled;
                out.tau2 = tn;
                out.coupled = true;
                out.couple_time = tn;
                record(tn, V);
                break;
            }
        }
        if (phase == Phase::waiting && iota * (y - mid) >= 0.0) {
            phase = Phase::grow;
            out.tau0 = tn;
        } else if ((phase == Phase::grow || phase == Phase::shrink) && std::abs(y - mid) > C * ell) {
            out.tau_bar = tn;
            phase = Phase::aborted;
            out.flags.push_back("window_exit");
            record(tn, V);
            break;
        }
        record(tn, V);
    }
    if (opt.run_to_cap) {
        for (++n; n < steps; ++n) {
            const double zw = W.normal(), zb = B.normal();
            const double x_new = x - prof.value(y) * dt + sq * zw;
            const double xt_new = xt - prof.value(yt) * dt + sq * zw;
            x = x_new;
            xt = out.coupled ? x : xt_new;
            y += sq * zb;
            yt = out.coupled ? y : yt + sq * zb;
        }
    }
    out.end_a = x;
    out.end_b = y;
    out.end_a_tilde = xt;
    out.end_b_tilde = yt;
    out.phase = phase;
    if (!out.coupled && phase != Phase::aborted) out.flags.push_back("cap");
    if (!std::isnan(out.tau0) && out.tau0 <= t_nu) out.flags.push_back("tau0_fast");
    const double window = (std::isnan(out.tau_bar) ? (out.coupled ? out.couple_time : opt.cap_mult * t_nu) : out.tau_bar) -
                          out.tau0;
    if (!std::isnan(out.tau0) && window >= 2.0 * t_nu) out.flags.push_back("long_window");
    out.flags.push_back(out.case_id == 1 ? "case1" : "case2");
    return out;
}

/// Radial pair (polar Euler-Maruyama, shared W and B). Step 1 grows
/// h = iota (r~ - r), Step 2 shrinks it along h = delta ell sqrt(eta), Step 3
/// closes the angle with U. With opt.reflect the pair is aborted as soon as
/// either radius leaves the disk, so reflection never acts under control.
inline CouplingOutcome couple_radial(const ShearProfile& prof, double nu, double r0, double theta0,
                                     double theta0_tilde, std::uint64_t seed, const CouplingOptions& opt = {}) {
    if (!is_radial(prof.kind())) throw InvalidParams("couple_radial needs a radial profile");
    if (!(nu > 0.0)) throw InvalidParams("nu must be > 0");
    if (!(r0 > 0.0)) throw InvalidParams("r0 must be > 0");
    if (!(opt.delta > 0.0 && opt.delta <= 1.0)) throw InvalidParams("delta must lie in (0, 1]");
    const bool disk = opt.reflect || prof.kind() == DomainKind::radial_disk;
    if (disk && r0 >= 1.0) throw InvalidParams("r0 must lie inside the disk");
    constexpr double pi = std::numbers::pi;
    const double gap = std::remainder(theta0_tilde - theta0, 2.0 * pi);
    if (std::abs(gap) > pi) throw InvalidParams("angle gap must be at most pi");

    CouplingOutcome out;
    out.seed = seed;
    out.case_id = 0;
    out.t_nu = local_timescale(prof, nu, r0);
    out.ell = std::sqrt(nu * out.t_nu);
    const double t_nu = out.t_nu, ell = out.ell, delta = opt.delta;
    const double dt = detail::resolve_dt(opt.dt, t_nu);
    const double sq = std::sqrt(2.0 * nu * dt);
    const int iota = detail::coupling_direction(prof, nu, r0);
    out.iota = iota;
    if (gap == 0.0) {
        out.coupled = true;
        out.couple_time = 0.0;
        out.phase = Phase::coupled;
        return out;
    }
    const int g = detail::sgn(prof.value(r0 + iota * ell) - prof.value(r0));
    if (g == 0) throw NoEnhancement("shear does not separate neighbouring streamlines at r0");
    double th = theta0, tht = theta0 + gap;
    if (g * gap < 0.0) std::swap(th, tht);
    double r = r0, rt = r0;
    const double mid = r0 + 2.0 * iota * ell;
    const double h_tol = 1e-3 * ell;
    double eta = 0.0, eta_tol = 0.0, rho_tol = 1e-3 * std::min(1.0, std::abs(gap));
    Phase phase = Phase::waiting;
    PathRng W(seed, 0, Channel::W), B(seed, 0, Channel::B);
    const long steps = static_cast<long>(std::ceil(opt.cap_mult * t_nu / dt));
    const double grow_rate = std::sqrt(2.0 * nu) / (delta * std::sqrt(t_nu));
    const double step1_cap = std::sqrt(pi) * delta * t_nu;

    auto record = [&](double t, double c) {
        if (!opt.trace) return;
        out.trace.push_back({t, phase, th, r, tht, rt, g * (tht - th), iota * (rt - r), c, out.cost});
    };
    record(0.0, 0.0);

    for (long n = 0; n < steps; ++n) {
        const double t = n * dt;
        const double zw = W.normal(), zb = B.normal();
        const double h = iota * (rt - r);
        const double rho_before = g * (tht - th);
        // uncontrolled updates
        const double r_new = r + nu / r * dt + sq * zb;
        const double rt_free = rt + nu / rt * dt + sq * zb;
        const double th_new = th - prof.value(r) * dt + sq / r * zw;
        double tht_new = tht - prof.value(rt) * dt + sq / rt * zw;
        const double h_free = iota * (rt_free - r_new);

        double V = 0.0, U = 0.0; // V along the r axis, U along theta
        if (!opt.controls_off) {
            if (phase == Phase::grow) {
                // V = iota (sqrt(nu/2) h/(r r~) + 1/(delta sqrt(t_nu))): h grows linearly
                double target = h + grow_rate * dt;
                const double rho_new = g * (tht_new - th_new);
                if (target >= ell * std::sqrt(std::max(rho_new, 0.0))) {
                    target = ell * std::sqrt(std::max(rho_new, 0.0));
                    phase = Phase::shrink;
                    out.tau1 = t + dt;
                    eta = rho_new / (delta * delta);
                    eta_tol = 1e-3 * std::min(1.0, eta);
                } else if (t + dt - out.tau0 >= step1_cap) {
                    phase = Phase::aborted;
                    out.flags.push_back("step1_timeout");
                }
                V = iota * (target - h_free) / (std::sqrt(2.0 * nu) * dt);
            } else if (phase == Phase::shrink) {
                eta -= g * (prof.value(rt) - prof.value(r)) * dt / (delta * delta);
                if (eta < -eta_tol) throw ResolutionError("eta overshoots zero: coupling dt too coarse");
                const double target = delta * ell * std::sqrt(std::max(eta, 0.0));
                V = iota * (target - h_free) / (std::sqrt(2.0 * nu) * dt);
            } else if (phase == Phase::fixup) {
                const double rho = g * (tht - th);
                U = -g * detail::sgn(rho) / std::sqrt(t_nu);
                tht_new += std::sqrt(2.0 * nu) * U * dt / rt;
            }
        }
        r = r_new;
        rt = rt_free + std::sqrt(2.0 * nu) * V * dt;
        th = th_new;
        tht = tht_new;
        out.cost += (V * V + U * U) * dt;
        const double tn = t + dt;

        if (r <= 0.0 || rt <= 0.0) {
            phase = Phase::aborted;
            out.flags.push_back("origin");
            record(tn, V);
            break;
        }
        if (disk && (r > 1.0 || rt > 1.0)) {
            phase = Phase::aborted;
            out.flags.push_back("boundary");
            record(tn, V);
            break;
        }
        if (phase == Phase::shrink && eta < eta_tol && std::abs(iota * (rt - r)) < h_tol) {
            const double hn = iota * (rt - r);
            out.cost += hn * hn / (2.0 * nu * dt);
            rt = r;
            out.tau2 = tn;
            const double rho = g * (tht - th);
            if (std::abs(rho) > ell / r0) {
                phase = Phase::aborted;
                out.flags.push_back("omega2_fail");
                record(tn, V);
                break;
            }
            phase = Phase::fixup;
        } else if (phase == Phase::fixup) {
            const double rho = g * (tht - th);
            if (std::abs(rho) < rho_tol || detail::sgn(rho) != detail::sgn(rho_before)) {
                tht = th;
                phase = Phase::coupled;
                out.tau3 = tn;
                out.coupled = true;
                out.couple_time = tn;
                record(tn, U);
                break;
            }
        }
        if (phase == Phase::aborted) {
            record(tn, V);
            break;
        }
        if (phase == Phase::waiting && iota * (r - mid) >= 0.0) {
            phase = Phase::grow;
            out.tau0 = tn;
        } else if ((phase == Phase::grow || phase == Phase::shrink || phase == Phase::fixup) &&
                   std::abs(r - mid) >= ell) {
            out.tau_bar = tn;
            phase = Phase::aborted;
            out.flags.push_back("window_exit");
            record(tn, V);
            break;
        }
        record(tn, phase == Phase::fixup ? U : V);
    }
    out.phase = phase;
    if (!out.coupled && phase != Phase::aborted) out.flags.push_back("cap");
    if (!std::isnan(out.tau0) && out.tau0 <= t_nu) out.flags.push_back("tau0_fast");
    return out;
}

struct CouplingBatch {
    std::vector<CouplingOutcome> outcomes;
    Estimate fraction;
    double max_cost = 0.0;        ///< over coupled runs
    double median_time = std::numeric_limits<double>::quiet_NaN();
    double t_nu = 0.0;
};

inline CouplingBatch summarize(std::vector<CouplingOutcome> outcomes) {
    CouplingBatch b;
    std::vector<double> ind, times;
    for (const auto& o : outcomes) {
        ind.push_back(o.coupled ? 1.0 : 0.0);
        if (o.coupled) {
            b.max_cost = std::max(b.max_cost, o.cost);
            times.push_back(o.couple_time);
        }
        b.t_nu = o.t_nu;
    }
    b.fraction = jackknife_mean(ind);
    if (!times.empty()) {
        std::sort(times.begin(), times.end());
        const std::size_t m = times.size();
        b.median_time = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
    }
    b.outcomes = std::move(outcomes);
    return b;
}

/// n_trials torus pairs with seeds first_seed, first_seed + 1, ...
inline CouplingBatch couple_torus_batch(const ShearProfile& prof, double nu, double x0, double x0_tilde, double y0,
                                        std::size_t n_trials, std::uint64_t first_seed,
                                        const CouplingOptions& opt = {}) {
    std::vector<CouplingOutcome> res(n_trials);
    parallel_for(n_trials, [&](std::size_t i) { res[i] = couple_torus(prof, nu, x0, x0_tilde, y0, first_seed + i, opt); });
    return summarize(std::move(res));
}

inline CouplingBatch couple_radial_batch(const ShearProfile& prof, double nu, double r0, double theta0,
                                         double theta0_tilde, std::size_t n_trials, std::uint64_t first_seed,
                                         const CouplingOptions& opt = {}) {
    std::vector<CouplingOutcome> res(n_trials);
    parallel_for(n_trials,
                 [&](std::size_t i) { res[i] = couple_radial(prof, nu, r0, theta0, theta0_tilde, first_seed + i, opt); });
    return summarize(std::move(res));
}

/// TV bound 1 - alpha^2 e^{-2C} / 4 from a control of cost <= C that merges
/// the pair with probability alpha.
inline double girsanov_certificate(double alpha, double cost_bound) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidParams("alpha must lie in (0, 1]");
    if (!(cost_bound >= 0.0) || !std::isfinite(cost_bound)) throw InvalidParams("cost bound must be finite and >= 0");
    return 1.0 - 0.25 * alpha * alpha * std::exp(-2.0 * cost_bound);
}

/// Two unit Brownian motions started distance gap apart over [0, T]: the
/// constant drift -gap/T merges them surely at cost gap^2/T, while without
/// control the laws at time T are N(0, T) and N(gap, T).
struct GaussianToy {
    double gap = 0.0, T = 1.0;
    double cost() const { return gap * gap / T; }
    double tv() const { return 2.0 * normal_cdf(std::abs(gap) / (2.0 * std::sqrt(T))) - 1.0; }
    double certificate() const { return girsanov_certificate(1.0, cost()); }
};

} // namespace shearlab
