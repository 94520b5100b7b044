#pragma once

#include "shearlab/errors.hpp"
#include "shearlab/parallel.hpp"
#include "shearlab/profiles.hpp"
#include "shearlab/rng.hpp"
#include "shearlab/stats.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace shearlab {

/// Sampled SDE paths. Torus: a = x, b = y. Radial: a = theta, b = r.
/// Coordinates are kept on the covering space (unwrapped).
struct TrajectoryEnsemble {
    DomainKind kind = DomainKind::torus;
    double nu = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    bool reflect = false;
    std::vector<double> times;
    std::vector<std::vector<double>> a, b; ///< [record][path]

    std::size_t records() const noexcept { return times.size(); }
};

namespace detail {

inline void check_sde_args(double nu, double t_end, double dt, std::size_t n_paths, int n_records) {
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw InvalidParams("nu must be finite and >= 0");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw InvalidParams("t_end must be finite and >= 0");
    if (!(dt > 0.0)) throw InvalidParams("dt must be > 0");
    if (n_paths == 0) throw InvalidParams("n_paths must be >= 1");
    if (n_records < 1) throw InvalidParams("n_records must be >= 1");
}

/// Step count: at least t_end/dt, rounded up to a multiple of n_records.
inline long step_count(double t_end, double dt, int n_records) {
    if (t_end == 0.0) return 0;
    long n = static_cast<long>(std::ceil(t_end / dt - 1e-9));
    n = std::max(n, 1L);
    return ((n + n_records - 1) / n_records) * n_records;
}

inline TrajectoryEnsemble make_ensemble(DomainKind kind, double nu, double t_end, long steps, std::uint64_t seed,
                                        std::size_t n_paths, int n_records) {
    TrajectoryEnsemble e;
    e.kind = kind;
    e.nu = nu;
    e.seed = seed;
    e.n_paths = n_paths;
    e.dt = steps > 0 ? t_end / steps : 0.0;
    const int nrec = steps > 0 ? n_records : 0;
    for (int k = 0; k <= nrec; ++k) e.times.push_back(steps > 0 ? t_end * k / nrec : 0.0);
    e.a.assign(e.times.size(), std::vector<double>(n_paths));
    e.b.assign(e.times.size(), std::vector<double>(n_paths));
    return e;
}

} // namespace detail

/// dx = -b(y) dt + sqrt(2 nu) dW, dy = sqrt(2 nu) dB. y uses exact Brownian
/// increments; x is Euler-Maruyama. Records n_records + 1 evenly spaced times
/// including t = 0.
inline TrajectoryEnsemble simulate_torus(const ShearProfile& prof, double nu, double x0, double y0, double t_end,
                                         double dt, std::size_t n_paths, std::uint64_t seed, int n_records = 1) {
    if (prof.kind() != DomainKind::torus) throw InvalidParams("simulate_torus needs a torus profile");
    detail::check_sde_args(nu, t_end, dt, n_paths, n_records);
    const long steps = detail::step_count(t_end, dt, n_records);
    auto e = detail::make_ensemble(DomainKind::torus, nu, t_end, steps, seed, n_paths, n_records);
    const double h = e.dt;
    const double s = std::sqrt(2.0 * nu * h);
    const long every = steps > 0 ? steps / n_records : 1;
    parallel_for(n_paths, [&](std::size_t p) {
        PathRng W(seed, p, Channel::W), B(seed, p, Channel::B);
        double x = x0, y = y0;
        e.a[0][p] = x;
        e.b[0][p] = y;
        for (long n = 1; n <= steps; ++n) {
            x += -prof.value(y) * h + s * W.normal();
            y += s * B.normal();
            if (n % every == 0) {
                e.a[n / every][p] = x;
                e.b[n / every][p] = y;
            }
        }
    });
    return e;
}

/// Radial SDE driven by a planar Brownian displacement: the position
/// R = r (cos phi, sin phi) moves by sqrt(2 nu dt) (Z1, Z2), so r = |R| never
/// goes negative and picks up the nu/r drift exactly. theta follows the
/// driver's angle increment minus b(r) dt. With reflect, r > 1 folds to 2 - r.
inline TrajectoryEnsemble simulate_radial(const ShearProfile& prof, double nu, double r0, double theta0, double t_end,
                                          double dt, std::size_t n_paths, std::uint64_t seed, bool reflect,
                                          int n_records = 1) {
    if (!is_radial(prof.kind())) throw InvalidParams("simulate_radial needs a radial profile");
    if (!(r0 > 0.0)) throw InvalidParams("r0 must be > 0");
    if (reflect && r0 > 1.0) throw InvalidParams("r0 must lie in the disk");
    detail::check_sde_args(nu, t_end, dt, n_paths, n_records);
    const long steps = detail::step_count(t_end, dt, n_records);
    auto e = detail::make_ensemble(prof.kind(), nu, t_end, steps, seed, n_paths, n_records);
    e.reflect = reflect;
    const double h = e.dt;
    const double s = std::sqrt(2.0 * nu * h);
    const long every = steps > 0 ? steps / n_records : 1;
    parallel_for(n_paths, [&](std::size_t p) {
        PathRng W(seed, p, Channel::W), B(seed, p, Channel::B);
        double X = r0, Y = 0.0, theta = theta0, r = r0;
        e.a[0][p] = theta;
        e.b[0][p] = r;
        for (long n = 1; n <= steps; ++n) {
            const double drift = prof.value(r) * h;
            const double nx = X + s * B.normal();
            const double ny = Y + s * W.normal();
            // angle of the new point relative to the old one
            const double dphi = std::atan2(X * ny - Y * nx, X * nx + Y * ny);
            double nr = std::hypot(nx, ny);
            X = nx;
            Y = ny;
            if (reflect && nr > 1.0) {
                const double folded = std::abs(2.0 - nr);
                X *= folded / nr;
                Y *= folded / nr;
                nr = folded;
            }
            r = nr;
            theta += dphi - drift;
            if (n % every == 0) {
                e.a[n / every][p] = theta;
                e.b[n / every][p] = r;
            }
        }
    });
    return e;
}

/// Feynman-Kac estimate of f(t, init) = E f0(pi(state_t)) at a recorded time.
/// f0 receives wrapped coordinates: (x mod 1, y mod 1) or (theta mod 2 pi, r).
inline Estimate feynman_kac(const TrajectoryEnsemble& e, const std::function<double(double, double)>& f0,
                            std::size_t record) {
    if (record >= e.records()) throw InvalidParams("record index out of range");
    std::vector<double> v(e.n_paths);
    const bool torus = e.kind == DomainKind::torus;
    for (std::size_t p = 0; p < e.n_paths; ++p) {
        const double a = e.a[record][p], b = e.b[record][p];
        if (torus) {
            v[p] = f0(wrap_unit(a), wrap_unit(b));
        } else {
            constexpr double tau = 2.0 * std::numbers::pi;
            v[p] = f0(a - tau * std::floor(a / tau), b);
        }
    }
    return jackknife_mean(v);
}

inline Estimate feynman_kac(const TrajectoryEnsemble& e, const std::function<double(double, double)>& f0) {
    return feynman_kac(e, f0, e.records() - 1);
}

struct SampleMoments {
    double mean = 0.0;
    double var = 0.0;
};

inline SampleMoments moments(const std::vector<double>& v) {
    SampleMoments m;
    const double n = static_cast<double>(v.size());
    if (v.empty()) return m;
    m.mean = tree_sum(v) / n;
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - m.mean) * (v[i] - m.mean);
    m.var = v.size() > 1 ? tree_sum(d) / (n - 1.0) : 0.0;
    return m;
}

/// std(x_t) against the heuristic shape t phi(sqrt(nu t)).
struct VarianceDiagnostic {
    std::vector<double> times, std_x, reference;
    double constant = 1.0;
    double flag_time = std::numeric_limits<double>::quiet_NaN(); ///< first t with std_x >= constant * reference > 0

    /// First time std_x reaches level (linear interpolation), NaN if never.
    double crossing_time(double level) const {
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (std_x[i] >= level) {
                if (i == 0) return times[0];
                const double w = (level - std_x[i - 1]) / (std_x[i] - std_x[i - 1]);
                return times[i - 1] + w * (times[i] - times[i - 1]);
            }
        }
        return std::numeric_limits<double>::quiet_NaN();
    }
};

inline VarianceDiagnostic variance_diagnostic(const TrajectoryEnsemble& e, const VelocityDifferential& diff,
                                              double constant = 1.0) {
    if (e.kind != DomainKind::torus) throw InvalidParams("variance diagnostic needs a torus ensemble");
    VarianceDiagnostic d;
    d.constant = constant;
    for (std::size_t i = 0; i < e.records(); ++i) {
        const double t = e.times[i];
        d.times.push_back(t);
        d.std_x.push_back(std::sqrt(moments(e.a[i]).var));
        d.reference.push_back(t * diff.phi(std::sqrt(e.nu * t)));
        if (std::isnan(d.flag_time) && d.reference.back() > 0.0 && d.std_x.back() >= constant * d.reference.back())
            d.flag_time = t;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Boundary layer of the disk

namespace detail {

/// One step of the reflected radial motion in the plane (X, Y).
inline double reflected_step(double& X, double& Y, double s, PathRng& g) {
    X += s * g.normal();
    Y += s * g.normal();
    double r = std::hypot(X, Y);
    if (r > 1.0) {
        const double folded = std::abs(2.0 - r);
        X *= folded / r;
        Y *= folded / r;
        r = folded;
    }
    return r;
}

} // namespace detail

struct EscapeResult {
    Estimate probability;
    double r0 = 1.0;
    double T = 0.0; ///< ell^2 / nu
};

/// MC estimate of P(1 - 3 ell <= r_{C T} <= 1 - ell) for the reflected radial
/// diffusion started at r0, T = ell^2 / nu.
inline EscapeResult boundary_escape_test(double nu, double ell, std::size_t n_paths, std::uint64_t seed,
                                         double C_mult, double r0 = 1.0, int steps_per_T = 400) {
    if (!(nu > 0.0)) throw InvalidParams("nu must be > 0");
    if (!(ell > 0.0 && ell < 0.25)) throw InvalidParams("ell must lie in (0, 1/4)");
    if (!(C_mult >= 0.0)) throw InvalidParams("C_mult must be >= 0");
    if (!(r0 > 0.0 && r0 <= 1.0)) throw InvalidParams("r0 must lie in (0, 1]");
    if (n_paths == 0 || steps_per_T < 1) throw InvalidParams("n_paths and steps_per_T must be >= 1");
    EscapeResult res;
    res.r0 = r0;
    res.T = ell * ell / nu;
    const long steps = static_cast<long>(std::ceil(C_mult * steps_per_T));
    const double h = steps > 0 ? C_mult * res.T / steps : 0.0;
    const double s = std::sqrt(2.0 * nu * h);
    std::vector<double> hit(n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
        PathRng g(seed, p, Channel::B);
        double X = r0, Y = 0.0, r = r0;
        for (long n = 0; n < steps; ++n) r = detail::reflected_step(X, Y, s, g);
        hit[p] = (r >= 1.0 - 3.0 * ell && r <= 1.0 - ell) ? 1.0 : 0.0;
    });
    res.probability = jackknife_mean(hit);
    return res;
}

/// Finite-difference solution of nu (psi'/r + psi'') = -1 on [1 - 2 ell, 1],
/// psi(1 - 2 ell) = 0, psi'(1) = 0 (ghost point at r = 1).
struct HittingBvp {
    std::vector<double> r, psi;
    double at(double r0) const {
        if (r0 <= r.front()) return psi.front();
        if (r0 >= r.back()) return psi.back();
        const double h = r[1] - r[0];
        const std::size_t i = std::min(static_cast<std::size_t>((r0 - r.front()) / h), r.size() - 2);
        const double w = (r0 - r[i]) / h;
        return (1.0 - w) * psi[i] + w * psi[i + 1];
    }
};

inline HittingBvp hitting_time_bvp(double nu, double ell, int P, bool curvature = true) {
    if (!(nu > 0.0)) throw InvalidParams("nu must be > 0");
    if (!(ell > 0.0 && ell < 0.25)) throw InvalidParams("ell must lie in (0, 1/4)");
    if (P < 64) throw InvalidParams("hitting-time grid needs P >= 64");
    const double a = 1.0 - 2.0 * ell;
    const double h = 2.0 * ell / P;
    HittingBvp out;
    out.r.resize(P + 1);
    out.psi.assign(P + 1, 0.0);
    for (int i = 0; i <= P; ++i) out.r[i] = a + i * h;
    // unknowns psi_1 .. psi_P
    std::vector<double> lo(P), di(P), up(P), rhs(P, -1.0 / nu);
    for (int i = 1; i <= P; ++i) {
        const double k = curvature ? 1.0 / (2.0 * h * out.r[i]) : 0.0;
        const int j = i - 1;
        if (i < P) {
            lo[j] = 1.0 / (h * h) - k;
            di[j] = -2.0 / (h * h);
            up[j] = 1.0 / (h * h) + k;
        } else {
            // ghost psi_{P+1} = psi_{P-1}
            lo[j] = 2.0 / (h * h);
            di[j] = -2.0 / (h * h);
            up[j] = 0.0;
        }
    }
    // Thomas; psi_0 = 0 contributes nothing to row 1
    for (int j = 1; j < P; ++j) {
        if (std::abs(di[j - 1]) < 1e-300) throw SolveFailure("singular hitting-time matrix");
        const double m = lo[j] / di[j - 1];
        di[j] -= m * up[j - 1];
        rhs[j] -= m * rhs[j - 1];
    }
    if (std::abs(di[P - 1]) < 1e-300) throw SolveFailure("singular hitting-time matrix");
    std::vector<double> x(P);
    x[P - 1] = rhs[P - 1] / di[P - 1];
    for (int j = P - 2; j >= 0; --j) x[j] = (rhs[j] - up[j] * x[j + 1]) / di[j];
    for (int i = 1; i <= P; ++i) out.psi[i] = x[i - 1];
    if (!std::isfinite(out.psi[P])) throw SolveFailure("hitting-time solve produced non-finite values");
    return out;
}

/// MC mean of tau_1 = first time the reflected radial diffusion from r0 hits
/// 1 - 2 ell. Crossings inside a step are caught with the Brownian-bridge
/// probability exp(-(r_n - a)(r_{n+1} - a) / (nu dt)).
inline Estimate hitting_time_mc(double nu, double ell, double r0, std::size_t n_paths, std::uint64_t seed,
                                double dt = 0.0) {
    if (!(nu > 0.0)) throw InvalidParams("nu must be > 0");
    if (!(ell > 0.0 && ell < 0.25)) throw InvalidParams("ell must lie in (0, 1/4)");
    const double a = 1.0 - 2.0 * ell;
    if (!(r0 >= a && r0 <= 1.0)) throw InvalidParams("r0 must lie in [1 - 2 ell, 1]");
    const double T = ell * ell / nu;
    if (dt <= 0.0) dt = T / 400.0;
    const double s = std::sqrt(2.0 * nu * dt);
    const double t_max = 1000.0 * T;
    std::vector<double> tau(n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
        PathRng g(seed, p, Channel::B), u(seed, p, Channel::aux);
        double X = r0, Y = 0.0, r = r0, t = 0.0;
        if (r <= a) {
            tau[p] = 0.0;
            return;
        }
        for (;;) {
            const double nr = detail::reflected_step(X, Y, s, g);
            if (nr <= a) {
                tau[p] = t + dt * (r - a) / (r - nr);
                return;
            }
            if (u.uniform() < std::exp(-(r - a) * (nr - a) / (nu * dt))) {
                tau[p] = t + 0.5 * dt;
                return;
            }
            r = nr;
            t += dt;
            if (t > t_max) throw SolveFailure("hitting-time path did not reach the inner boundary");
        }
    });
    return jackknife_mean(tau);
}

struct HittingCheck {
    HittingBvp bvp;
    double r0 = 1.0;
    double psi_r0 = 0.0;
    Estimate mc;
};

inline HittingCheck hitting_time_check(double nu, double ell, int P, double r0, std::size_t n_paths,
                                       std::uint64_t seed, double dt = 0.0) {
    HittingCheck c;
    c.bvp = hitting_time_bvp(nu, ell, P);
    c.r0 = r0;
    c.psi_r0 = c.bvp.at(r0);
    c.mc = hitting_time_mc(nu, ell, r0, n_paths, seed, dt);
    return c;
}

} // namespace shearlab
