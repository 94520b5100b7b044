#pragma once

// Advection-diffusion solvers:
//   torus: f_t + b(y) f_x = nu (f_xx + f_yy), spectral in x and y, Strang
//          splitting with exact diffusion and exact advection sub-steps;
//   disk:  f_t + b(r) f_theta = nu (f_rr + f_r / r + f_theta_theta / r^2) with
//          no-flux boundary, Fourier in theta, cell-centred finite volumes in r
//          with Crank-Nicolson diffusion and exact phase rotation.
// Only nonzero streamwise modes are stored, so the fields are mean-free on
// every streamline by construction.

#include "shearlab/decay_curve.hpp"
#include "shearlab/errors.hpp"
#include "shearlab/fft.hpp"
#include "shearlab/profiles.hpp"
#include "shearlab/timescales.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace shearlab {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Torus field

/// Coefficients f_k(y_j) for k = 1..K at y_j = j / M. The k < 0 modes are the
/// complex conjugates, so f(x, y) = 2 Re sum_k f_k(y) e^{2 pi i k x}.
struct TorusField {
    int K = 0;
    int M = 0;
    double t = 0.0;
    std::vector<cplx> coeffs;

    TorusField() = default;
    TorusField(int K_, int M_) : K(K_), M(M_), coeffs(static_cast<std::size_t>(K_) * M_) {
        if (K_ < 1 || M_ < 2) throw InvalidParams("torus field needs K >= 1 and M >= 2");
    }

    cplx& at(int k, int j) { return coeffs[static_cast<std::size_t>(k - 1) * M + j]; }
    const cplx& at(int k, int j) const { return coeffs[static_cast<std::size_t>(k - 1) * M + j]; }
    double y(int j) const { return static_cast<double>(j) / M; }

    /// Mode k = `k` with profile g(y): f = 2 Re(e^{2 pi i k x} g(y)).
    static TorusField single_mode(int K, int M, const std::function<cplx(double)>& g, int k = 1) {
        TorusField f(K, M);
        if (k < 1 || k > K) throw InvalidParams("mode index out of range");
        for (int j = 0; j < M; ++j) f.at(k, j) = g(f.y(j));
        return f;
    }

    /// Samples a real function on an Nx x M grid and keeps modes 1..K.
    static TorusField from_physical(const std::function<double(double, double)>& fn, int K, int M, int Nx = 0) {
        TorusField f(K, M);
        if (Nx <= 0) Nx = std::max(4 * K + 4, 32);
        for (int j = 0; j < M; ++j) {
            const double y = f.y(j);
            for (int i = 0; i < Nx; ++i) {
                const double x = static_cast<double>(i) / Nx;
                const double v = fn(x, y);
                for (int k = 1; k <= K; ++k) f.at(k, j) += v * std::polar(1.0 / Nx, -kTwoPi * k * x);
            }
        }
        return f;
    }

    /// Random mean-free field with smooth y dependence (y wavenumbers |m| <= my).
    static TorusField random(int K, int M, std::uint64_t seed, int my = 4) {
        TorusField f(K, M);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> N01(0.0, 1.0);
        for (int k = 1; k <= K; ++k) {
            for (int m = -my; m <= my; ++m) {
                const cplx a(N01(rng), N01(rng));
                for (int j = 0; j < M; ++j) f.at(k, j) += a * std::polar(1.0, kTwoPi * m * f.y(j));
            }
        }
        return f;
    }

    /// Full spectrum over k in [-K, K] \ {0}, index (k + K) with k = 0 unused.
    std::vector<cplx> full_spectrum_row(int j) const {
        std::vector<cplx> row(2 * K + 1);
        for (int k = 1; k <= K; ++k) {
            row[K + k] = at(k, j);
            row[K - k] = std::conj(at(k, j));
        }
        return row;
    }

    double physical(double x, int j) const {
        double s = 0.0;
        for (int k = 1; k <= K; ++k) s += 2.0 * (at(k, j) * std::polar(1.0, kTwoPi * k * x)).real();
        return s;
    }
};

struct StreamlineNorms {
    std::vector<double> linf_y;
    double l2 = 0.0;
    double linf = 0.0;
};

inline double l2_norm(const TorusField& f) {
    double s = 0.0;
    for (const auto& c : f.coeffs) s += std::norm(c);
    return std::sqrt(2.0 * s / f.M);
}

/// sup over x of |f(x, y_j)|; exact for K = 1, sampled on `nx` points otherwise.
inline double linf_at(const TorusField& f, int j, int nx = 0) {
    if (f.K == 1) return 2.0 * std::abs(f.at(1, j));
    if (nx <= 0) nx = std::max(16 * f.K, 64);
    double m = 0.0;
    for (int i = 0; i < nx; ++i) m = std::max(m, std::abs(f.physical(static_cast<double>(i) / nx, j)));
    return m;
}

inline StreamlineNorms streamline_norms(const TorusField& f, int nx = 0) {
    StreamlineNorms n;
    n.linf_y.resize(f.M);
    for (int j = 0; j < f.M; ++j) {
        n.linf_y[j] = linf_at(f, j, nx);
        n.linf = std::max(n.linf, n.linf_y[j]);
    }
    n.l2 = l2_norm(f);
    return n;
}

/// f(x, y) at an arbitrary point using trigonometric interpolation in y.
inline double evaluate(const TorusField& f, double x, double y) {
    BatchedFft fft(f.M, 1);
    double s = 0.0;
    std::vector<cplx> row(f.M);
    for (int k = 1; k <= f.K; ++k) {
        for (int j = 0; j < f.M; ++j) row[j] = f.at(k, j);
        fft.forward(row.data());
        cplx v = 0.0;
        for (int q = 0; q < f.M; ++q) {
            const int m = q <= f.M / 2 ? q : q - f.M;
            if (f.M % 2 == 0 && q == f.M / 2) {
                // Nyquist mode split symmetrically between +m and -m
                v += row[q] / static_cast<double>(f.M) * std::cos(kTwoPi * m * y);
                continue;
            }
            v += row[q] / static_cast<double>(f.M) * std::polar(1.0, kTwoPi * m * y);
        }
        s += 2.0 * (v * std::polar(1.0, kTwoPi * k * x)).real();
    }
    return s;
}

/// Smallest power of two M with M * min ell_nu >= 8.
inline int recommended_M(const ShearProfile& prof, double nu, int at_least = 32);

namespace detail {

inline std::vector<double> resolution_probe_grid(const ShearProfile& prof, int n) {
    std::vector<double> g;
    if (prof.kind() == DomainKind::torus) {
        for (int i = 0; i < n; ++i) g.push_back(static_cast<double>(i) / n);
    } else {
        // the singular core of a vortex is governed by the phase rule instead
        const double lo = prof.family() == Family::vortex ? 0.1 : 0.0;
        for (int i = 0; i < n; ++i) g.push_back(lo + (1.0 - lo) * (i + 0.5) / n);
    }
    for (double p : prof.distinguished_points()) {
        if (prof.family() == Family::vortex && p < 0.1) continue;
        if (prof.in_domain(p)) g.push_back(p);
    }
    return g;
}

} // namespace detail

/// min over a probe grid of ell_nu(y); +inf when the profile gives no enhancement.
inline double min_ell(const ShearProfile& prof, double nu, int n = 512) {
    if (nu <= 0.0 || prof.family() == Family::constant) return std::numeric_limits<double>::infinity();
    double m = std::numeric_limits<double>::infinity();
    for (double y : detail::resolution_probe_grid(prof, n)) {
        try {
            m = std::min(m, std::sqrt(nu * local_timescale(prof, nu, y)));
        } catch (const NoEnhancement&) {
        }
    }
    return m;
}

inline int recommended_M(const ShearProfile& prof, double nu, int at_least) {
    const double ell = min_ell(prof, nu);
    int M = std::max(at_least, 2);
    if (std::isfinite(ell)) {
        const double need = 8.0 / ell;
        while (M < need) M *= 2;
    }
    return static_cast<int>(std::bit_ceil(static_cast<unsigned>(M)));
}

struct TorusOptions {
    double t_end = 1.0;
    double dt = 0.01;
    bool hypoelliptic = false;
    int record_every = 1;            ///< steps between recorded norms
    std::vector<double> probe_y;      ///< locations with per-y sup-norm curves
    double stop_ratio = 0.0;          ///< stop once every tracked norm / initial < stop_ratio (0 disables)
    bool check_resolution = true;
};

struct TorusRun {
    TorusField field;
    DecayCurve l2{{}, {}, "l2"};
    DecayCurve linf{{}, {}, "linf"};
    std::vector<double> probe_y;      ///< grid locations actually used
    std::vector<DecayCurve> probes;
    bool stopped_early = false;
    int steps = 0;
};

/// Time-step limits for the torus scheme.
struct TorusStepLimits {
    double advection = std::numeric_limits<double>::infinity();
    double diffusion = std::numeric_limits<double>::infinity();
    double ell_min = std::numeric_limits<double>::infinity();
};

inline TorusStepLimits torus_step_limits(const ShearProfile& prof, double nu, int K, int M, bool hypoelliptic) {
    TorusStepLimits lim;
    double maxb = 0.0;
    for (int j = 0; j < M; ++j) maxb = std::max(maxb, std::abs(prof.value(static_cast<double>(j) / M)));
    if (maxb > 0.0) lim.advection = 0.05 / (K * maxb);
    lim.ell_min = min_ell(prof, nu);
    if (nu > 0.0 && std::isfinite(lim.ell_min)) {
        const double kx = hypoelliptic ? 0.0 : std::pow(kTwoPi * K, 2);
        lim.diffusion = 0.1 / (nu * (kx + 1.0 / (lim.ell_min * lim.ell_min)));
    }
    return lim;
}

class TorusSolver {
public:
    TorusSolver(const ShearProfile& prof, double nu, int K, int M, bool hypoelliptic)
        : K_(K), M_(M), nu_(nu), hypo_(hypoelliptic), fft_(M, K), b_(M) {
        if (prof.kind() != DomainKind::torus) throw InvalidParams("evolve_torus needs a torus profile");
        for (int j = 0; j < M; ++j) b_[j] = prof.value(static_cast<double>(j) / M);
    }

    void prepare(double dt) {
        if (dt == dt_) return;
        dt_ = dt;
        half_ = diffusion_multiplier(0.5 * dt);
        full_ = diffusion_multiplier(dt);
        phase_.resize(static_cast<std::size_t>(K_) * M_);
        for (int k = 1; k <= K_; ++k)
            for (int j = 0; j < M_; ++j)
                phase_[static_cast<std::size_t>(k - 1) * M_ + j] = std::polar(1.0, -kTwoPi * k * b_[j] * dt);
    }

    void diffuse(TorusField& f, bool half) const {
        if (nu_ == 0.0) return;
        const auto& mult = half ? half_ : full_;
        fft_.forward(f.coeffs.data());
        for (std::size_t i = 0; i < f.coeffs.size(); ++i) f.coeffs[i] *= mult[i];
        fft_.backward(f.coeffs.data());
    }

    void advect(TorusField& f) const {
        for (std::size_t i = 0; i < f.coeffs.size(); ++i) f.coeffs[i] *= phase_[i];
    }

private:
    std::vector<double> diffusion_multiplier(double tau) const {
        std::vector<double> m(static_cast<std::size_t>(K_) * M_);
        for (int k = 1; k <= K_; ++k) {
            const double kx2 = hypo_ ? 0.0 : std::pow(kTwoPi * k, 2);
            for (int q = 0; q < M_; ++q) {
                const int wy = q <= M_ / 2 ? q : M_ - q;
                const double lam = nu_ * (kx2 + std::pow(kTwoPi * wy, 2));
                m[static_cast<std::size_t>(k - 1) * M_ + q] = std::exp(-lam * tau) / M_;
            }
        }
        return m;
    }

    int K_, M_;
    double nu_;
    bool hypo_;
    BatchedFft fft_;
    std::vector<double> b_;
    double dt_ = -1.0;
    std::vector<double> half_, full_;
    std::vector<cplx> phase_;
};

/// Strang splitting: half diffusion, exact advection phase, half diffusion.
/// Consecutive half diffusions between recorded steps are merged.
inline TorusRun evolve_torus(const ShearProfile& prof, double nu, const TorusField& field0, const TorusOptions& opt) {
    if (!(nu >= 0.0)) throw InvalidParams("nu must be nonnegative");
    if (!(opt.dt > 0.0) || !(opt.t_end >= 0.0)) throw InvalidParams("dt must be positive and t_end nonnegative");
    if (opt.record_every < 1) throw InvalidParams("record_every must be positive");
    const int K = field0.K, M = field0.M;
    const auto lim = torus_step_limits(prof, nu, K, M, opt.hypoelliptic);
    if (opt.check_resolution && std::isfinite(lim.ell_min) && lim.ell_min * M < 4.0)
        throw ResolutionError("ell_nu = " + std::to_string(lim.ell_min) + " spans fewer than 4 cells at M = " +
                              std::to_string(M) + "; need M >= " + std::to_string(recommended_M(prof, nu)));
    if (opt.dt > lim.advection * (1 + 1e-12))
        throw CFLError("dt = " + std::to_string(opt.dt) + " exceeds 0.05 / (K max|b|) = " + std::to_string(lim.advection));
    if (opt.dt > lim.diffusion * (1 + 1e-12))
        throw CFLError("dt = " + std::to_string(opt.dt) + " exceeds the splitting bound " + std::to_string(lim.diffusion));

    TorusRun run;
    run.field = field0;
    TorusField& f = run.field;
    const double t0 = f.t;
    int steps = opt.t_end > 0.0 ? static_cast<int>(std::ceil(opt.t_end / opt.dt - 1e-9)) : 0;
    const double dt = steps > 0 ? opt.t_end / steps : opt.dt;

    std::vector<int> probe_idx;
    for (double y : opt.probe_y) {
        int j = static_cast<int>(std::lround(wrap_unit(y) * M)) % M;
        probe_idx.push_back(j);
        run.probe_y.push_back(static_cast<double>(j) / M);
        run.probes.push_back(DecayCurve{{}, {}, "linf_y"});
    }
    std::vector<double> start(probe_idx.size());
    double l2_0 = 0.0;
    auto record = [&](double t) {
        auto l2 = l2_norm(f);
        double linf = 0.0;
        for (int j = 0; j < M; ++j) linf = std::max(linf, linf_at(f, j));
        run.l2.push(t, l2);
        run.linf.push(t, linf);
        for (std::size_t p = 0; p < probe_idx.size(); ++p) run.probes[p].push(t, linf_at(f, probe_idx[p]));
    };
    auto below_stop = [&]() {
        if (opt.stop_ratio <= 0.0) return false;
        if (run.l2.values.back() > opt.stop_ratio * l2_0) return false;
        for (std::size_t p = 0; p < probe_idx.size(); ++p)
            if (run.probes[p].values.back() > opt.stop_ratio * start[p]) return false;
        return true;
    };
    record(t0);
    l2_0 = run.l2.values.front();
    for (std::size_t p = 0; p < probe_idx.size(); ++p) start[p] = run.probes[p].values.front();
    if (steps == 0) return run;

    TorusSolver solver(prof, nu, K, M, opt.hypoelliptic);
    solver.prepare(dt);
    solver.diffuse(f, true);
    for (int s = 1; s <= steps; ++s) {
        solver.advect(f);
        const bool rec = s % opt.record_every == 0 || s == steps;
        if (!rec) {
            solver.diffuse(f, false);
            continue;
        }
        solver.diffuse(f, true);
        f.t = t0 + s * dt;
        record(f.t);
        run.steps = s;
        if (s < steps && below_stop()) {
            run.stopped_early = true;
            break;
        }
        if (s < steps) solver.diffuse(f, true);
    }
    return run;
}

inline TorusRun evolve_torus(const ShearProfile& prof, double nu, const TorusField& field0, double t_end, double dt,
                             bool hypoelliptic = false) {
    TorusOptions o;
    o.t_end = t_end;
    o.dt = dt;
    o.hypoelliptic = hypoelliptic;
    return evolve_torus(prof, nu, field0, o);
}

// ---------------------------------------------------------------------------
// Disk field

/// Coefficients f_m(r_j), m = 1..Mtheta, at cell centres r_j = (j + 1/2) / P.
struct DiskField {
    int Mtheta = 0;
    int P = 0;
    double t = 0.0;
    std::vector<cplx> coeffs;

    DiskField() = default;
    DiskField(int Mt, int P_) : Mtheta(Mt), P(P_), coeffs(static_cast<std::size_t>(Mt) * P_) {
        if (Mt < 1 || P_ < 4) throw InvalidParams("disk field needs Mtheta >= 1 and P >= 4");
    }
    cplx& at(int m, int j) { return coeffs[static_cast<std::size_t>(m - 1) * P + j]; }
    const cplx& at(int m, int j) const { return coeffs[static_cast<std::size_t>(m - 1) * P + j]; }
    double r(int j) const { return (j + 0.5) / P; }

    static DiskField single_mode(int Mt, int P, const std::function<cplx(double)>& g, int m = 1) {
        DiskField f(Mt, P);
        if (m < 1 || m > Mt) throw InvalidParams("mode index out of range");
        for (int j = 0; j < P; ++j) f.at(m, j) = g(f.r(j));
        return f;
    }
};

inline double l2_norm(const DiskField& f) {
    double s = 0.0;
    for (int m = 1; m <= f.Mtheta; ++m)
        for (int j = 0; j < f.P; ++j) s += std::norm(f.at(m, j)) * f.r(j) / f.P;
    return std::sqrt(2.0 * kTwoPi * s);
}

inline double linf_at(const DiskField& f, int j, int nth = 0) {
    if (f.Mtheta == 1) return 2.0 * std::abs(f.at(1, j));
    if (nth <= 0) nth = std::max(16 * f.Mtheta, 64);
    double mx = 0.0;
    for (int i = 0; i < nth; ++i) {
        const double th = kTwoPi * i / nth;
        double s = 0.0;
        for (int m = 1; m <= f.Mtheta; ++m) s += 2.0 * (f.at(m, j) * std::polar(1.0, m * th)).real();
        mx = std::max(mx, std::abs(s));
    }
    return mx;
}

struct DiskOptions {
    double t_end = 1.0;
    double dt = 0.01;
    int startup_steps = 2; ///< leading steps done as two backward-Euler half steps
    int record_every = 1;
    double stop_ratio = 0.0;
    bool check_resolution = true;
};

struct DiskRun {
    DiskField field;
    DecayCurve l2{{}, {}, "l2"};
    DecayCurve linf{{}, {}, "linf"};
    bool stopped_early = false;
    int steps = 0;
};

/// Tridiagonal finite-volume operator nu (d_rr + d_r / r - m^2 / r^2) with zero
/// flux through r = 0 and r = 1.
struct RadialOperator {
    std::vector<double> lower, diag, upper;

    RadialOperator(int P, int m, double nu) : lower(P, 0.0), diag(P, 0.0), upper(P, 0.0) {
        const double dr = 1.0 / P;
        for (int j = 0; j < P; ++j) {
            const double r = (j + 0.5) * dr;
            const double rm = j * dr, rp = (j + 1) * dr;
            const double a = j == 0 ? 0.0 : nu * rm / (r * dr * dr);
            const double c = j == P - 1 ? 0.0 : nu * rp / (r * dr * dr);
            lower[j] = a;
            upper[j] = c;
            diag[j] = -(a + c) - nu * m * m / (r * r);
        }
    }
};

/// Theta-scheme stepper (I - theta tau L) x = (I + (1 - theta) tau L) f for one
/// mode; theta = 1/2 is Crank-Nicolson, theta = 1 backward Euler.
class RadialStepper {
public:
    RadialStepper(const RadialOperator& L, double tau, double theta = 0.5) : L_(L), tau_(tau), theta_(theta) {
        const std::size_t P = L.diag.size();
        cp_.resize(P);
        den_.resize(P);
        for (std::size_t j = 0; j < P; ++j) {
            const double a = -theta * tau * L.lower[j];
            const double b = 1.0 - theta * tau * L.diag[j];
            const double c = -theta * tau * L.upper[j];
            const double d = j == 0 ? b : b - a * cp_[j - 1];
            if (std::abs(d) < 1e-300) throw SolveFailure("singular radial step matrix");
            den_[j] = d;
            cp_[j] = c / d;
        }
    }

    void apply(cplx* f, std::vector<cplx>& work) const {
        const std::size_t P = L_.diag.size();
        const double e = (1.0 - theta_) * tau_;
        work.resize(P);
        for (std::size_t j = 0; j < P; ++j) {
            cplx rhs = (1.0 + e * L_.diag[j]) * f[j];
            if (j > 0) rhs += e * L_.lower[j] * f[j - 1];
            if (j + 1 < P) rhs += e * L_.upper[j] * f[j + 1];
            work[j] = rhs;
        }
        work[0] /= den_[0];
        for (std::size_t j = 1; j < P; ++j) {
            const double a = -theta_ * tau_ * L_.lower[j];
            work[j] = (work[j] - a * work[j - 1]) / den_[j];
        }
        f[P - 1] = work[P - 1];
        for (std::size_t j = P - 1; j-- > 0;) f[j] = work[j] - cp_[j] * f[j + 1];
    }

private:
    RadialOperator L_;
    double tau_, theta_;
    std::vector<double> cp_, den_;
};

/// Strang splitting per theta mode: half phase rotation, Crank-Nicolson
/// diffusion over dt, half phase rotation (adjacent halves merged).
inline DiskRun evolve_disk(const ShearProfile& prof, double nu, const DiskField& field0, const DiskOptions& opt) {
    if (prof.kind() == DomainKind::torus) throw InvalidParams("evolve_disk needs a radial profile");
    if (!(nu >= 0.0)) throw InvalidParams("nu must be nonnegative");
    if (!(opt.dt > 0.0) || !(opt.t_end >= 0.0)) throw InvalidParams("dt must be positive and t_end nonnegative");
    const int Mt = field0.Mtheta, P = field0.P;
    std::vector<double> b(P);
    double maxb = 0.0;
    for (int j = 0; j < P; ++j) {
        b[j] = prof.value(field0.r(j));
        maxb = std::max(maxb, std::abs(b[j]));
    }
    if (prof.family() == Family::vortex) {
        if (opt.dt * Mt * std::abs(b[0]) >= 0.1)
            throw SingularProfileResolution("dt * m * b(r_1) = " + std::to_string(opt.dt * Mt * std::abs(b[0])) +
                                            " must stay below 0.1");
    } else if (maxb > 0.0 && opt.dt * Mt * maxb > 0.05 * (1 + 1e-12)) {
        throw CFLError("dt exceeds 0.05 / (m max|b|)");
    }
    if (opt.check_resolution) {
        const double ell = min_ell(prof, nu);
        if (std::isfinite(ell) && ell * P < 4.0)
            throw ResolutionError("ell_nu = " + std::to_string(ell) + " spans fewer than 4 radial cells at P = " +
                                  std::to_string(P));
    }

    DiskRun run;
    run.field = field0;
    DiskField& f = run.field;
    const double t0 = f.t;
    const int steps = opt.t_end > 0.0 ? static_cast<int>(std::ceil(opt.t_end / opt.dt - 1e-9)) : 0;
    const double dt = steps > 0 ? opt.t_end / steps : opt.dt;
    auto record = [&](double t) {
        run.l2.push(t, l2_norm(f));
        double linf = 0.0;
        for (int j = 0; j < P; ++j) linf = std::max(linf, linf_at(f, j));
        run.linf.push(t, linf);
    };
    record(t0);
    const double l2_0 = run.l2.values.front();
    if (steps == 0) return run;

    // Crank-Nicolson, started with backward-Euler half steps (Rannacher) so
    // stiff components of rough data are damped instead of oscillating.
    std::vector<RadialStepper> cn, be;
    cn.reserve(Mt);
    be.reserve(Mt);
    for (int m = 1; m <= Mt; ++m) {
        RadialOperator L(P, m, nu);
        cn.emplace_back(L, dt, 0.5);
        be.emplace_back(L, 0.5 * dt, 1.0);
    }
    std::vector<cplx> half(static_cast<std::size_t>(Mt) * P), full(half.size());
    for (int m = 1; m <= Mt; ++m)
        for (int j = 0; j < P; ++j) {
            half[static_cast<std::size_t>(m - 1) * P + j] = std::polar(1.0, -m * b[j] * 0.5 * dt);
            full[static_cast<std::size_t>(m - 1) * P + j] = std::polar(1.0, -m * b[j] * dt);
        }
    auto rotate = [&](const std::vector<cplx>& ph) {
        for (std::size_t i = 0; i < f.coeffs.size(); ++i) f.coeffs[i] *= ph[i];
    };
    std::vector<cplx> work;
    rotate(half);
    for (int s = 1; s <= steps; ++s) {
        if (nu > 0.0) {
            for (int m = 1; m <= Mt; ++m) {
                if (s <= opt.startup_steps) {
                    be[m - 1].apply(&f.at(m, 0), work);
                    be[m - 1].apply(&f.at(m, 0), work);
                } else {
                    cn[m - 1].apply(&f.at(m, 0), work);
                }
            }
        }
        const bool rec = s % opt.record_every == 0 || s == steps;
        if (!rec) {
            rotate(full);
            continue;
        }
        rotate(half);
        f.t = t0 + s * dt;
        record(f.t);
        run.steps = s;
        if (s < steps && opt.stop_ratio > 0.0 && run.l2.values.back() < opt.stop_ratio * l2_0) {
            run.stopped_early = true;
            break;
        }
        if (s < steps) rotate(half);
    }
    return run;
}

inline DiskRun evolve_disk(const ShearProfile& prof, double nu, const DiskField& field0, double t_end, double dt) {
    DiskOptions o;
    o.t_end = t_end;
    o.dt = dt;
    return evolve_disk(prof, nu, field0, o);
}

// ---------------------------------------------------------------------------
// Binary snapshots: 4-byte magic, int64 modes, int64 points, f64 nu, f64 t,
// then (re, im) pairs mode-major, all little-endian.

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw InvalidParams("truncated snapshot");
    return v;
}

template <class Field>
void write_snapshot_impl(const std::string& path, const char* magic, std::int64_t modes, std::int64_t pts,
                         double nu, const Field& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidParams("cannot open " + path);
    os.write(magic, 4);
    put_le(os, modes);
    put_le(os, pts);
    put_le(os, nu);
    put_le(os, f.t);
    for (const auto& c : f.coeffs) {
        put_le(os, c.real());
        put_le(os, c.imag());
    }
}

} // namespace detail

inline void write_snapshot(const std::string& path, const TorusField& f, double nu) {
    detail::write_snapshot_impl(path, "SHLT", f.K, f.M, nu, f);
}

inline void write_snapshot(const std::string& path, const DiskField& f, double nu) {
    detail::write_snapshot_impl(path, "SHLD", f.Mtheta, f.P, nu, f);
}

inline TorusField read_torus_snapshot(const std::string& path, double* nu_out = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidParams("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SHLT", 4) != 0) throw InvalidParams(path + " is not a torus snapshot");
    const auto K = detail::get_le<std::int64_t>(is);
    const auto M = detail::get_le<std::int64_t>(is);
    const double nu = detail::get_le<double>(is);
    TorusField f(static_cast<int>(K), static_cast<int>(M));
    f.t = detail::get_le<double>(is);
    for (auto& c : f.coeffs) {
        const double re = detail::get_le<double>(is);
        const double im = detail::get_le<double>(is);
        c = cplx(re, im);
    }
    if (nu_out) *nu_out = nu;
    return f;
}

} // namespace shearlab
