#pragma once

#include "shearlab/errors.hpp"
#include "shearlab/parallel.hpp"
#include "shearlab/profiles.hpp"
#include "shearlab/rng.hpp"
#include "shearlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace shearlab {

/// Probability weights on a grid X x Y, stored row-major: w[x * ny + y].
struct FiniteProductMeasure {
    int nx = 0, ny = 0;
    std::vector<double> w;

    FiniteProductMeasure() = default;
    FiniteProductMeasure(int a, int b) : nx(a), ny(b), w(static_cast<std::size_t>(a) * b, 0.0) {}

    double& at(int x, int y) { return w[static_cast<std::size_t>(x) * ny + y]; }
    double at(int x, int y) const { return w[static_cast<std::size_t>(x) * ny + y]; }

    std::vector<double> y_marginal() const {
        std::vector<double> m(ny, 0.0);
        for (int x = 0; x < nx; ++x)
            for (int y = 0; y < ny; ++y) m[y] += at(x, y);
        return m;
    }

    void validate() const {
        if (nx < 1 || ny < 1 || w.size() != static_cast<std::size_t>(nx) * ny)
            throw ShapeMismatch("product measure weights do not match the grid");
        double s = 0.0;
        for (double v : w) {
            if (!(v >= 0.0)) throw InvalidParams("measure weights must be nonnegative");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-12) throw InvalidParams("measure weights must sum to 1");
    }
};

/// Row-stochastic transition matrix on X x Y (states indexed as in
/// FiniteProductMeasure).
struct FiniteKernel {
    int nx = 0, ny = 0;
    std::vector<double> p; ///< p[from * n + to], n = nx * ny

    FiniteKernel() = default;
    FiniteKernel(int a, int b) : nx(a), ny(b), p(static_cast<std::size_t>(a) * b * a * b, 0.0) {}

    int states() const noexcept { return nx * ny; }
    double& at(int from, int to) { return p[static_cast<std::size_t>(from) * states() + to]; }
    double at(int from, int to) const { return p[static_cast<std::size_t>(from) * states() + to]; }

    void validate() const {
        const int n = states();
        if (p.size() != static_cast<std::size_t>(n) * n) throw ShapeMismatch("kernel size does not match the grid");
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) {
                if (!(at(i, j) >= 0.0)) throw InvalidParams("kernel weights must be nonnegative");
                s += at(i, j);
            }
            if (std::abs(s - 1.0) > 1e-12) throw InvalidParams("kernel rows must sum to 1");
        }
    }

    /// mu P
    FiniteProductMeasure push(const FiniteProductMeasure& mu) const {
        if (mu.nx != nx || mu.ny != ny) throw ShapeMismatch("measure and kernel grids differ");
        FiniteProductMeasure out(nx, ny);
        const int n = states();
        for (int i = 0; i < n; ++i) {
            if (mu.w[i] == 0.0) continue;
            for (int j = 0; j < n; ++j) out.w[j] += mu.w[i] * at(i, j);
        }
        return out;
    }
};

/// 1/2 sum |p - q|.
inline double tv_discrete(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ShapeMismatch("tv_discrete: supports differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

/// Coupling with min(p, q) on the diagonal; the remaining mass is spread as
/// the normalized product of (p - q)^+ and (q - p)^+. Returned row-major,
/// gamma[i * n + j] = P(X = i, Y = j).
inline std::vector<double> maximal_coupling(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ShapeMismatch("maximal_coupling: supports differ in size");
    const std::size_t n = p.size();
    std::vector<double> g(n * n, 0.0), ex(n), def(n);
    double tv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = std::min(p[i], q[i]);
        g[i * n + i] = m;
        ex[i] = p[i] - m;
        def[i] = q[i] - m;
        tv += ex[i];
    }
    if (tv > 0.0)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += ex[i] * def[j] / tv;
    return g;
}

struct FiberTv {
    double lhs = 0.0; ///< tv(mu1, mu2)
    double rhs = 0.0; ///< sum_y mubar(y) tv(mu1^y, mu2^y)
};

inline void check_same_y_marginal(const FiniteProductMeasure& a, const FiniteProductMeasure& b, double tol = 1e-10) {
    if (a.nx != b.nx || a.ny != b.ny) throw ShapeMismatch("product measures live on different grids");
    auto ma = a.y_marginal(), mb = b.y_marginal();
    for (int y = 0; y < a.ny; ++y)
        if (std::abs(ma[y] - mb[y]) > tol) throw MarginalMismatch("Y-marginals differ at y index " + std::to_string(y));
}

/// Both sides of the fiber decomposition of the TV distance for measures with
/// a common Y-marginal.
inline FiberTv fiber_tv(const FiniteProductMeasure& mu1, const FiniteProductMeasure& mu2) {
    check_same_y_marginal(mu1, mu2);
    FiberTv r;
    r.lhs = tv_discrete(mu1.w, mu2.w);
    const auto bar = mu1.y_marginal();
    for (int y = 0; y < mu1.ny; ++y) {
        if (bar[y] <= 0.0) continue;
        std::vector<double> f1(mu1.nx), f2(mu1.nx);
        for (int x = 0; x < mu1.nx; ++x) {
            f1[x] = mu1.at(x, y) / bar[y];
            f2[x] = mu2.at(x, y) / bar[y];
        }
        r.rhs += bar[y] * tv_discrete(f1, f2);
    }
    return r;
}

struct ContractionReport {
    double eps = 0.0;      ///< 1 - sup over fibers and pairs of tv(delta_(x,y) P, delta_(x~,y) P)
    double tv_before = 0.0;
    double tv_after = 0.0;
    bool holds = false;    ///< tv_after <= (1 - eps) tv_before + 1e-12
};

inline ContractionReport marginal_contraction_check(const FiniteKernel& P, const FiniteProductMeasure& mu1,
                                                    const FiniteProductMeasure& mu2) {
    check_same_y_marginal(mu1, mu2);
    if (P.nx != mu1.nx || P.ny != mu1.ny) throw ShapeMismatch("measure and kernel grids differ");
    const int n = P.states();
    double sup = 0.0;
    std::vector<double> ra(n), rb(n);
    for (int y = 0; y < P.ny; ++y)
        for (int x = 0; x < P.nx; ++x)
            for (int xt = x + 1; xt < P.nx; ++xt) {
                const int i = x * P.ny + y, j = xt * P.ny + y;
                for (int k = 0; k < n; ++k) {
                    ra[k] = P.at(i, k);
                    rb[k] = P.at(j, k);
                }
                sup = std::max(sup, tv_discrete(ra, rb));
            }
    ContractionReport rep;
    rep.eps = 1.0 - sup;
    rep.tv_before = tv_discrete(mu1.w, mu2.w);
    rep.tv_after = tv_discrete(P.push(mu1).w, P.push(mu2).w);
    rep.holds = rep.tv_after <= (1.0 - rep.eps) * rep.tv_before + 1e-12;
    return rep;
}

// ---------------------------------------------------------------------------
// Sample-based TV

struct HistogramTv {
    double tv = 0.0;
    int bins = 0;
    int occupied = 0;
    double per_occupied = 0.0; ///< smaller sample size / occupied bins
};

namespace detail {

inline HistogramTv histogram_tv(const std::vector<int>& ca, const std::vector<int>& cb, std::size_t na, std::size_t nb) {
    HistogramTv r;
    r.bins = static_cast<int>(ca.size());
    double s = 0.0;
    for (std::size_t k = 0; k < ca.size(); ++k) {
        if (ca[k] > 0 || cb[k] > 0) ++r.occupied;
        s += std::abs(double(ca[k]) / na - double(cb[k]) / nb);
    }
    r.tv = 0.5 * s;
    r.per_occupied = double(std::min(na, nb)) / std::max(r.occupied, 1);
    if (r.per_occupied < 20.0)
        throw UnderSampled("histogram TV needs >= 20 samples per occupied bin, got " + std::to_string(r.per_occupied));
    return r;
}

inline int bin_of(double v, double lo, double hi, int bins) {
    // values outside [lo, hi) go to the two overflow bins 0 and bins + 1
    if (v < lo) return 0;
    if (v >= hi) return bins + 1;
    return 1 + std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins));
}

} // namespace detail

/// Histogram estimate of the TV distance between the laws behind two sample
/// sets, with `bins` equal cells on [lo, hi) plus one overflow cell per side.
/// Upward biased: sampling noise adds to |p - q| in every cell.
inline HistogramTv tv_from_samples(const std::vector<double>& a, const std::vector<double>& b, double lo, double hi,
                                   int bins) {
    if (a.empty() || b.empty()) throw UnderSampled("empty sample set");
    if (!(hi > lo) || bins < 1) throw InvalidParams("histogram range or bin count invalid");
    std::vector<int> ca(bins + 2, 0), cb(bins + 2, 0);
    for (double v : a) ++ca[detail::bin_of(v, lo, hi, bins)];
    for (double v : b) ++cb[detail::bin_of(v, lo, hi, bins)];
    return detail::histogram_tv(ca, cb, a.size(), b.size());
}

/// Two-dimensional version on [lo_x, hi_x) x [lo_y, hi_y) with bx x by cells.
inline HistogramTv tv_from_samples_2d(const std::vector<double>& ax, const std::vector<double>& ay,
                                      const std::vector<double>& bx, const std::vector<double>& by, double lo_x,
                                      double hi_x, double lo_y, double hi_y, int nbx, int nby) {
    if (ax.size() != ay.size() || bx.size() != by.size()) throw ShapeMismatch("coordinate arrays differ in length");
    if (ax.empty() || bx.empty()) throw UnderSampled("empty sample set");
    const int wx = nbx + 2, wy = nby + 2;
    std::vector<int> ca(wx * wy, 0), cb(wx * wy, 0);
    for (std::size_t i = 0; i < ax.size(); ++i)
        ++ca[detail::bin_of(ax[i], lo_x, hi_x, nbx) * wy + detail::bin_of(ay[i], lo_y, hi_y, nby)];
    for (std::size_t i = 0; i < bx.size(); ++i)
        ++cb[detail::bin_of(bx[i], lo_x, hi_x, nbx) * wy + detail::bin_of(by[i], lo_y, hi_y, nby)];
    return detail::histogram_tv(ca, cb, ax.size(), bx.size());
}

/// Samples mapped onto [0, period).
inline std::vector<double> wrap_samples(const std::vector<double>& v, double period = 1.0) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - period * std::floor(v[i] / period);
    return out;
}

// ---------------------------------------------------------------------------
// Heat-kernel mass outside a diffusive ball

struct HeatMassReport {
    Estimate estimate;
    double bound = 0.0; ///< sqrt(2) exp(-R^2 / 8)
    bool holds = false; ///< estimate <= bound + 3 SE
};

inline double heat_mass_bound(double R) { return std::sqrt(2.0) * std::exp(-R * R / 8.0); }

/// MC mass of y_t = y0 + sqrt(2 nu) B_t at torus distance >= R sqrt(nu t) from y0.
inline HeatMassReport heat_mass_bound_check(double nu, double t, double y0, double R, std::size_t n_paths,
                                            std::uint64_t seed) {
    if (!(nu > 0.0) || !(t >= 0.0)) throw InvalidParams("nu must be > 0 and t >= 0");
    if (!(R >= 1.0)) throw InvalidParams("R must be >= 1");
    if (n_paths == 0) throw InvalidParams("n_paths must be >= 1");
    HeatMassReport rep;
    rep.bound = heat_mass_bound(R);
    const double radius = R * std::sqrt(nu * t);
    const double s = std::sqrt(2.0 * nu * t);
    std::vector<double> out(n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
        PathRng g(seed, p, Channel::B);
        const double y = y0 + s * g.normal();
        out[p] = (t > 0.0 && std::abs(wrap_signed(y - y0)) >= radius) ? 1.0 : 0.0;
    });
    rep.estimate = jackknife_mean(out);
    rep.holds = rep.estimate.value <= rep.bound + 3.0 * rep.estimate.se;
    return rep;
}

// ---------------------------------------------------------------------------
// Random instances and the exact-TV suite

inline std::vector<double> random_simplex(int n, std::mt19937_64& g) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) s += (x = e(g));
    for (auto& x : v) x /= s;
    return v;
}

/// Two measures on nx x ny sharing a random Y-marginal.
inline std::pair<FiniteProductMeasure, FiniteProductMeasure> random_same_marginal_pair(int nx, int ny,
                                                                                       std::mt19937_64& g) {
    const auto bar = random_simplex(ny, g);
    FiniteProductMeasure m1(nx, ny), m2(nx, ny);
    for (int y = 0; y < ny; ++y) {
        const auto f1 = random_simplex(nx, g), f2 = random_simplex(nx, g);
        for (int x = 0; x < nx; ++x) {
            m1.at(x, y) = bar[y] * f1[x];
            m2.at(x, y) = bar[y] * f2[x];
        }
    }
    return {m1, m2};
}

inline FiniteKernel random_kernel(int nx, int ny, std::mt19937_64& g) {
    FiniteKernel P(nx, ny);
    for (int i = 0; i < P.states(); ++i) {
        const auto row = random_simplex(P.states(), g);
        for (int j = 0; j < P.states(); ++j) P.at(i, j) = row[j];
    }
    return P;
}

struct ExactTvSuite {
    int instances = 0;
    double fiber_max_err = 0.0;    ///< max |lhs - rhs| over fiber instances
    int contraction_failures = 0;  ///< kernels violating the contraction inequality
    double coupling_max_err = 0.0; ///< max |1 - diag - TV| over maximal couplings
};

/// Fiber identity on 5x7, contraction on 4x4 kernels, maximal couplings on
/// the 4x4 fibers' flattened laws; `instances` of each.
inline ExactTvSuite exact_tv_suite(int instances, std::uint64_t seed) {
    ExactTvSuite r;
    r.instances = instances;
    std::mt19937_64 g(seed);
    for (int i = 0; i < instances; ++i) {
        auto [m1, m2] = random_same_marginal_pair(5, 7, g);
        const auto f = fiber_tv(m1, m2);
        r.fiber_max_err = std::max(r.fiber_max_err, std::abs(f.lhs - f.rhs));
    }
    for (int i = 0; i < instances; ++i) {
        const auto P = random_kernel(4, 4, g);
        auto [m1, m2] = random_same_marginal_pair(4, 4, g);
        if (!marginal_contraction_check(P, m1, m2).holds) ++r.contraction_failures;
        const auto gam = maximal_coupling(m1.w, m2.w);
        const std::size_t n = m1.w.size();
        double diag = 0.0;
        for (std::size_t k = 0; k < n; ++k) diag += gam[k * n + k];
        r.coupling_max_err = std::max(r.coupling_max_err, std::abs(1.0 - diag - tv_discrete(m1.w, m2.w)));
    }
    return r;
}

} // namespace shearlab
