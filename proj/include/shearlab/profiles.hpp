#pragma once

// Shear profile families b(y) on the torus and b(r) for radial flows, with
// closed-form derivatives and registries of the distinguished points
// (critical points of b and points where b' is singular or discontinuous).

#include "shearlab/errors.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace shearlab {

enum class DomainKind { torus, radial_plane, radial_disk };

enum class Family {
    poly_crit,
    flat_crit,
    holder_singular,
    triangle,
    radial_power,
    radial_exp,
    vortex,
    custom_table,
    constant,
};

inline constexpr int kInfiniteOrder = -1;

/// b' vanishes to order `order` at `location`; kInfiniteOrder for flat points.
struct CriticalPoint {
    double location;
    int order;
    bool infinite_order() const noexcept { return order == kInfiniteOrder; }
};

/// b(ybar + h) - b(ybar) ~ |h|^alpha log^beta(1/|h|). alpha == 1 marks a kink
/// (finite, nonzero one-sided derivatives of opposite sign).
struct SingularPoint {
    double location;
    double alpha;
    double beta;
};

using ProfileParams = std::map<std::string, double>;

inline std::string to_string(Family f) {
    switch (f) {
    case Family::poly_crit: return "poly-crit";
    case Family::flat_crit: return "flat-crit";
    case Family::holder_singular: return "holder-singular";
    case Family::triangle: return "triangle";
    case Family::radial_power: return "radial-power";
    case Family::radial_exp: return "radial-exp";
    case Family::vortex: return "vortex";
    case Family::custom_table: return "custom-table";
    case Family::constant: return "constant";
    }
    return "unknown";
}

inline std::string to_string(DomainKind k) {
    switch (k) {
    case DomainKind::torus: return "torus";
    case DomainKind::radial_plane: return "plane";
    case DomainKind::radial_disk: return "disk";
    }
    return "unknown";
}

inline Family family_from_string(const std::string& name) {
    static const std::map<std::string, Family> table = {
        {"poly-crit", Family::poly_crit},       {"flat-crit", Family::flat_crit},
        {"holder-singular", Family::holder_singular}, {"triangle", Family::triangle},
        {"radial-power", Family::radial_power}, {"radial-exp", Family::radial_exp},
        {"vortex", Family::vortex},             {"custom-table", Family::custom_table},
        {"constant", Family::constant},
    };
    auto it = table.find(name);
    if (it == table.end()) throw UnsupportedFamily("unknown profile family '" + name + "'");
    return it->second;
}

inline DomainKind domain_from_string(const std::string& name) {
    if (name == "torus") return DomainKind::torus;
    if (name == "plane" || name == "radial-plane") return DomainKind::radial_plane;
    if (name == "disk" || name == "radial-disk") return DomainKind::radial_disk;
    throw InvalidParams("unknown domain kind '" + name + "'");
}

inline bool is_radial(DomainKind k) noexcept { return k != DomainKind::torus; }

/// Wrap onto [0, 1).
inline double wrap_unit(double y) noexcept {
    double w = y - std::floor(y);
    return w >= 1.0 ? 0.0 : w;
}

/// Signed representative of y in [-1/2, 1/2).
inline double wrap_signed(double y) noexcept {
    return y - std::floor(y + 0.5);
}

class ShearProfile {
public:
    DomainKind kind() const noexcept { return kind_; }
    Family family() const noexcept { return family_; }
    const ProfileParams& params() const noexcept { return params_; }
    double param(const std::string& key) const { return params_.at(key); }
    const std::vector<CriticalPoint>& critical_points() const noexcept { return critical_; }
    const std::vector<SingularPoint>& singular_points() const noexcept { return singular_; }
    /// Critical and singular locations plus the radial boundaries r = 0 (and r = 1 on the disk).
    const std::vector<double>& distinguished_points() const noexcept { return distinguished_; }
    double h0() const noexcept { return h0_; }
    /// Characteristic magnitude of b used to scale tolerances.
    double scale() const noexcept { return scale_; }
    const std::vector<double>& table() const noexcept { return table_; }

    /// Largest order of vanishing among finite-order critical points; 0 if none.
    int max_finite_order() const noexcept {
        int n = 0;
        for (const auto& c : critical_) n = std::max(n, c.order);
        return n;
    }
    bool has_flat_point() const noexcept {
        return std::any_of(critical_.begin(), critical_.end(),
                           [](const CriticalPoint& c) { return c.infinite_order(); });
    }

    bool in_domain(double loc) const noexcept {
        switch (kind_) {
        case DomainKind::torus: return std::isfinite(loc);
        case DomainKind::radial_plane: return loc >= 0.0 && std::isfinite(loc);
        case DomainKind::radial_disk: return loc >= 0.0 && loc <= 1.0;
        }
        return false;
    }

    /// Domain length used for gap computations (1 on the torus and disk).
    double canonical(double loc) const noexcept { return kind_ == DomainKind::torus ? wrap_unit(loc) : loc; }

    /// Distance between two locations (circular on the torus).
    double distance(double a, double b) const noexcept {
        if (kind_ == DomainKind::torus) return std::abs(wrap_signed(a - b));
        return std::abs(a - b);
    }

    /// b, b' or b'' at `loc`, evaluated from the family's closed form.
    double eval(double loc, int deriv_order = 0) const {
        if (deriv_order < 0 || deriv_order > 2)
            throw InvalidParams("deriv_order must be 0, 1 or 2");
        if (!in_domain(loc)) throw InvalidParams("location " + std::to_string(loc) + " outside domain");
        const double y = canonical(loc);
        if (deriv_order >= 1) {
            for (const auto& s : singular_) {
                if (distance(y, s.location) < 1e-14)
                    throw SingularDerivative("derivative requested at singular point " +
                                             std::to_string(s.location));
            }
        }
        return eval_unchecked(y, deriv_order);
    }

    double operator()(double loc) const { return eval(loc, 0); }

    /// Fast path used inside simulation loops: no domain or singularity checks.
    double value(double loc) const noexcept { return eval_unchecked(canonical(loc), 0); }

    /// Direction pointing away from the nearest distinguished point.
    int iota(double loc) const noexcept {
        const double y = canonical(loc);
        if (distinguished_.empty()) return 1;
        double best = std::numeric_limits<double>::infinity();
        int dir = 1;
        for (double p : distinguished_) {
            double off = kind_ == DomainKind::torus ? wrap_signed(y - p) : y - p;
            if (std::abs(off) < best - 1e-15) {
                best = std::abs(off);
                dir = off >= 0.0 ? 1 : -1;
            }
        }
        if (kind_ == DomainKind::radial_disk && y >= 1.0) dir = -1;
        if (is_radial(kind_) && y <= 0.0) dir = 1;
        return dir;
    }

    /// Directions for which no distinguished point lies strictly between loc
    /// and loc + dir*h0 (and the segment stays inside the domain).
    std::vector<int> valid_directions(double loc) const {
        std::vector<int> dirs;
        const double y = canonical(loc);
        for (int dir : {1, -1}) {
            if (segment_clear(y, dir, h0_)) dirs.push_back(dir);
        }
        if (dirs.empty()) dirs.push_back(iota(loc));
        return dirs;
    }

    bool segment_clear(double y, int dir, double len) const noexcept {
        constexpr double tol = 1e-12;
        if (kind_ == DomainKind::radial_plane && y + dir * len < -tol) return false;
        if (kind_ == DomainKind::radial_disk && (y + dir * len < -tol || y + dir * len > 1.0 + tol))
            return false;
        for (double p : distinguished_) {
            double off = kind_ == DomainKind::torus ? wrap_unit(dir * (p - y)) : dir * (p - y);
            if (off > tol && off < len - tol) return false;
        }
        return true;
    }

private:
    friend ShearProfile make_profile(Family, const ProfileParams&, std::optional<DomainKind>);
    friend ShearProfile make_custom_table(const std::vector<double>&, DomainKind);

    using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;

    double eval_unchecked(double y, int d) const noexcept {
        constexpr double tau = 2.0 * std::numbers::pi;
        switch (family_) {
        case Family::poly_crit: {
            const int n = order_n_;
            const double s = std::sin(tau * y), c = std::cos(tau * y);
            if (n == 1) {
                if (d == 0) return s;
                if (d == 1) return tau * c;
                return -tau * tau * s;
            }
            const int e = n + 1;
            if (d == 0) return std::pow(s, e);
            if (d == 1) return e * std::pow(s, e - 1) * c * tau;
            return tau * tau * (e * (e - 1) * std::pow(s, e - 2) * c * c - e * std::pow(s, e));
        }
        case Family::flat_crit: {
            const double h = y - 0.5, a = std::abs(h);
            if (a == 0.0) return 0.0;
            const double p = p_, E = amp_ * std::exp(-std::pow(a, -p));
            if (d == 0) return E;
            if (d == 1) return (h > 0 ? 1.0 : -1.0) * p * std::pow(a, -p - 1.0) * E;
            return p * std::pow(a, -p - 2.0) * (p * std::pow(a, -p) - (p + 1.0)) * E;
        }
        case Family::holder_singular: {
            const double h = y - 0.5, a = std::abs(h);
            const double al = alpha_, be = beta_;
            if (a == 0.0) return 0.0;
            const double L = std::log(1.0 / a);
            if (d == 0) return std::pow(a, al) * std::pow(L, be);
            if (d == 1)
                return (h > 0 ? 1.0 : -1.0) * std::pow(a, al - 1.0) * std::pow(L, be - 1.0) * (al * L - be);
            return std::pow(a, al - 2.0) * std::pow(L, be - 2.0) *
                   (al * (al - 1.0) * L * L - be * (2.0 * al - 1.0) * L + be * (be - 1.0));
        }
        case Family::triangle: {
            const double h = y - 0.5;
            if (d == 0) return std::abs(h);
            if (d == 1) return h > 0 ? 1.0 : -1.0;
            return 0.0;
        }
        case Family::radial_power: {
            const double q = q_;
            if (d == 0) return std::pow(y, q + 1.0);
            if (d == 1) return (q + 1.0) * std::pow(y, q);
            return q == 0.0 ? 0.0 : (q + 1.0) * q * std::pow(y, q - 1.0);
        }
        case Family::radial_exp:
            return d == 0 ? std::expm1(y) : std::exp(y);
        case Family::vortex: {
            const double al = alpha_;
            if (d == 0) return std::pow(y, -al);
            if (d == 1) return -al * std::pow(y, -al - 1.0);
            return al * (al + 1.0) * std::pow(y, -al - 2.0);
        }
        case Family::custom_table: {
            const double x = kind_ == DomainKind::torus ? wrap_unit(y) : y;
            if (d == 0) return (*spline_)(x);
            if (d == 1) return spline_->prime(x);
            return spline_->double_prime(x);
        }
        case Family::constant:
            return d == 0 ? const_value_ : 0.0;
        }
        return 0.0;
    }

    void finalize() {
        std::vector<double> pts;
        for (const auto& c : critical_) pts.push_back(c.location);
        for (const auto& s : singular_) pts.push_back(s.location);
        if (is_radial(kind_)) pts.push_back(0.0);
        if (kind_ == DomainKind::radial_disk) pts.push_back(1.0);
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
                  pts.end());
        distinguished_ = pts;
        std::sort(critical_.begin(), critical_.end(),
                  [](const CriticalPoint& a, const CriticalPoint& b) { return a.location < b.location; });
        std::sort(singular_.begin(), singular_.end(),
                  [](const SingularPoint& a, const SingularPoint& b) { return a.location < b.location; });

        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < pts.size(); ++i) gap = std::min(gap, pts[i] - pts[i - 1]);
        if (kind_ == DomainKind::torus && !pts.empty()) gap = std::min(gap, pts.front() + 1.0 - pts.back());
        h0_ = std::isfinite(gap) ? 0.5 * gap : 0.5;
        h0_ = std::min(h0_, 0.5);

        const double hi = kind_ == DomainKind::radial_plane ? 2.0 : 1.0;
        double s = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            double y = hi * i / 1000.0;
            if (family_ == Family::vortex && y < 0.05) continue;
            s = std::max(s, std::abs(eval_unchecked(canonical(y), 0)));
        }
        scale_ = s > 0.0 ? s : 1.0;
    }

    DomainKind kind_ = DomainKind::torus;
    Family family_ = Family::constant;
    ProfileParams params_;
    std::vector<CriticalPoint> critical_;
    std::vector<SingularPoint> singular_;
    std::vector<double> distinguished_;
    double h0_ = 0.5;
    double scale_ = 1.0;

    int order_n_ = 1;
    double p_ = 1.0, amp_ = 1.0, alpha_ = 0.5, beta_ = 0.0, q_ = 1.0, const_value_ = 0.0;
    std::vector<double> table_;
    std::shared_ptr<const Spline> spline_;
};

namespace detail {

inline double take(const ProfileParams& params, const std::string& key, std::optional<double> fallback,
                   const std::string& family) {
    auto it = params.find(key);
    if (it != params.end()) return it->second;
    if (fallback) return *fallback;
    throw InvalidParams(family + " requires parameter '" + key + "'");
}

inline void reject_unknown(const ProfileParams& params, std::initializer_list<const char*> allowed,
                           const std::string& family) {
    for (const auto& [k, v] : params) {
        bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; });
        if (!ok) throw InvalidParams("unknown parameter '" + k + "' for family " + family);
    }
}

} // namespace detail

/// Builds a closed-form profile.
///
/// Family formulas (y on the torus [0,1), r radial):
///   poly-crit(N):         N = 1: sin(2 pi y); N >= 2: sin(2 pi y)^(N+1).
///                         Critical points 1/4, 3/4 (order 1) and, for N >= 2, 0, 1/2 (order N).
///   flat-crit(p, c):      c * exp(-|y - 1/2|^-p); flat point at 1/2, kink at 0.
///   holder-singular(alpha, beta): |y - 1/2|^alpha * log(1/|y - 1/2|)^beta; cusp at 1/2, kink at 0.
///   triangle:             |y - 1/2|; kinks at 0 and 1/2.
///   radial-power(q):      r^(q+1) on the plane (default) or disk.
///   radial-exp:           e^r - 1.
///   vortex(alpha):        r^-alpha on the disk, 0 < alpha <= 2.
///   constant(value):      b == value (no enhancement; used for reference runs).
inline ShearProfile make_profile(Family family, const ProfileParams& params,
                                 std::optional<DomainKind> domain = std::nullopt) {
    ShearProfile p;
    p.family_ = family;
    p.params_ = params;
    const std::string name = to_string(family);
    auto require_torus = [&] {
        if (domain && *domain != DomainKind::torus) throw InvalidParams(name + " is a torus family");
        p.kind_ = DomainKind::torus;
    };

    switch (family) {
    case Family::poly_crit: {
        detail::reject_unknown(params, {"N"}, name);
        require_torus();
        const double N = detail::take(params, "N", 1.0, name);
        if (N < 1 || N != std::floor(N) || N > 12) throw InvalidParams("poly-crit N must be an integer in [1, 12]");
        p.order_n_ = static_cast<int>(N);
        p.critical_ = {{0.25, 1}, {0.75, 1}};
        if (p.order_n_ >= 2) {
            p.critical_.push_back({0.0, p.order_n_});
            p.critical_.push_back({0.5, p.order_n_});
        }
        p.params_["N"] = N;
        break;
    }
    case Family::flat_crit: {
        detail::reject_unknown(params, {"p", "c"}, name);
        require_torus();
        p.p_ = detail::take(params, "p", std::nullopt, name);
        p.amp_ = detail::take(params, "c", 1.0, name);
        if (!(p.p_ > 0.0) || p.p_ > 8.0) throw InvalidParams("flat-crit p must lie in (0, 8]");
        if (!(p.amp_ > 0.0)) throw InvalidParams("flat-crit amplitude c must be positive");
        p.critical_ = {{0.5, kInfiniteOrder}};
        p.singular_ = {{0.0, 1.0, 0.0}};
        p.params_["c"] = p.amp_;
        break;
    }
    case Family::holder_singular: {
        detail::reject_unknown(params, {"alpha", "beta"}, name);
        require_torus();
        p.alpha_ = detail::take(params, "alpha", std::nullopt, name);
        p.beta_ = detail::take(params, "beta", 0.0, name);
        if (!(p.alpha_ > 0.0 && p.alpha_ < 1.0)) throw InvalidParams("holder-singular alpha must lie in (0, 1)");
        if (!(p.beta_ < p.alpha_ * std::log(2.0)))
            throw InvalidParams("holder-singular beta must be below alpha*log(2) for a monotone profile");
        p.singular_ = {{0.0, 1.0, 0.0}, {0.5, p.alpha_, p.beta_}};
        p.params_["beta"] = p.beta_;
        break;
    }
    case Family::triangle:
        detail::reject_unknown(params, {}, name);
        require_torus();
        p.singular_ = {{0.0, 1.0, 0.0}, {0.5, 1.0, 0.0}};
        break;
    case Family::radial_power: {
        detail::reject_unknown(params, {"q"}, name);
        p.kind_ = domain.value_or(DomainKind::radial_plane);
        if (p.kind_ == DomainKind::torus) throw InvalidParams("radial-power is a radial family");
        p.q_ = detail::take(params, "q", 1.0, name);
        if (!(p.q_ >= 0.0) || p.q_ > 10.0) throw InvalidParams("radial-power q must lie in [0, 10]");
        p.params_["q"] = p.q_;
        break;
    }
    case Family::radial_exp:
        detail::reject_unknown(params, {}, name);
        p.kind_ = domain.value_or(DomainKind::radial_plane);
        if (p.kind_ == DomainKind::torus) throw InvalidParams("radial-exp is a radial family");
        break;
    case Family::vortex: {
        detail::reject_unknown(params, {"alpha"}, name);
        if (domain && *domain != DomainKind::radial_disk) throw InvalidParams("vortex profiles live on the disk");
        p.kind_ = DomainKind::radial_disk;
        p.alpha_ = detail::take(params, "alpha", 1.0, name);
        if (!(p.alpha_ > 0.0 && p.alpha_ <= 2.0)) throw InvalidParams("vortex alpha must lie in (0, 2]");
        p.params_["alpha"] = p.alpha_;
        break;
    }
    case Family::constant:
        detail::reject_unknown(params, {"value"}, name);
        p.kind_ = domain.value_or(DomainKind::torus);
        p.const_value_ = detail::take(params, "value", 0.0, name);
        p.params_["value"] = p.const_value_;
        break;
    case Family::custom_table:
        throw UnsupportedFamily("custom-table profiles are built with make_custom_table");
    }
    p.finalize();
    return p;
}

/// Periodic (torus) or radial profile interpolated from equispaced samples by a
/// cubic B-spline. Torus samples sit at y_j = j/n; radial samples at r_j = j/(n-1) on [0, 1].
/// Critical points are located from sign changes of the spline derivative and
/// registered as order 1.
inline ShearProfile make_custom_table(const std::vector<double>& samples, DomainKind kind = DomainKind::torus) {
    if (samples.size() < 8) throw InvalidParams("custom-table needs at least 8 samples");
    if (kind == DomainKind::radial_plane) throw InvalidParams("custom-table supports torus or disk domains");
    ShearProfile p;
    p.family_ = Family::custom_table;
    p.kind_ = kind;
    p.table_ = samples;
    const std::size_t n = samples.size();
    if (kind == DomainKind::torus) {
        constexpr int pad = 4;
        std::vector<double> ext;
        ext.reserve(n + 2 * pad + 1);
        for (int j = -pad; j <= static_cast<int>(n) + pad; ++j) {
            int idx = ((j % static_cast<int>(n)) + static_cast<int>(n)) % static_cast<int>(n);
            ext.push_back(samples[idx]);
        }
        const double h = 1.0 / static_cast<double>(n);
        p.spline_ = std::make_shared<const ShearProfile::Spline>(ext.data(), ext.size(), -pad * h, h);
    } else {
        const double h = 1.0 / static_cast<double>(n - 1);
        p.spline_ = std::make_shared<const ShearProfile::Spline>(samples.data(), samples.size(), 0.0, h);
    }
    const int probes = static_cast<int>(8 * n);
    const double lo = 0.0, hi = 1.0;
    auto deriv = [&](double y) { return p.eval_unchecked(y, 1); };
    double prev = deriv(lo);
    for (int i = 1; i <= probes; ++i) {
        double y1 = lo + (hi - lo) * i / probes;
        if (kind == DomainKind::torus && i == probes) break;
        double cur = deriv(y1);
        if ((prev < 0.0 && cur >= 0.0) || (prev > 0.0 && cur <= 0.0)) {
            double a = lo + (hi - lo) * (i - 1) / probes, b = y1, fa = prev;
            for (int it = 0; it < 80; ++it) {
                double m = 0.5 * (a + b), fm = deriv(m);
                if ((fa < 0.0) == (fm < 0.0)) { a = m; fa = fm; } else { b = m; }
            }
            double loc = 0.5 * (a + b);
            if (kind == DomainKind::torus || (loc > 1e-9 && loc < 1.0 - 1e-9)) p.critical_.push_back({loc, 1});
        }
        prev = cur;
    }
    if (kind == DomainKind::torus) {
        // closing interval [1 - 1/probes, 1)
        double a = 1.0 - 1.0 / probes, fa = deriv(a), fb = deriv(0.0);
        if ((fa < 0.0 && fb >= 0.0) || (fa > 0.0 && fb <= 0.0)) p.critical_.push_back({0.0, 1});
    }
    p.finalize();
    return p;
}

// ---------------------------------------------------------------------------
// Minimal velocity differential

enum class EnvelopeShape { power, flat, linear, table, zero };

/// Monotone lower envelope phi of |b(y + iota(y) h) - b(y)| on [0, h0].
struct VelocityDifferential {
    double h0 = 0.5;
    EnvelopeShape shape = EnvelopeShape::zero;
    double exponent = 1.0; ///< power: phi = c h^exponent; flat: phi = c exp(-h^-exponent)
    double c = 0.0;
    std::vector<double> table_h, table_phi;
    std::function<int(double)> iota = [](double) { return 1; };

    double phi(double h) const {
        if (h <= 0.0) return 0.0;
        switch (shape) {
        case EnvelopeShape::power: return c * std::pow(h, exponent);
        case EnvelopeShape::linear: return c * h;
        case EnvelopeShape::flat: return c * std::exp(-std::pow(h, -exponent));
        case EnvelopeShape::zero: return 0.0;
        case EnvelopeShape::table: {
            if (table_h.empty()) return 0.0;
            if (h >= table_h.back()) {
                // linear continuation beyond h0 keeps phi increasing
                const std::size_t n = table_h.size();
                double slope = n > 1 ? (table_phi[n - 1] - table_phi[n - 2]) / (table_h[n - 1] - table_h[n - 2]) : 0.0;
                return table_phi.back() + std::max(slope, 0.0) * (h - table_h.back());
            }
            auto it = std::upper_bound(table_h.begin(), table_h.end(), h);
            if (it == table_h.begin()) return table_phi.front() * h / table_h.front();
            std::size_t i = static_cast<std::size_t>(it - table_h.begin());
            double t = (h - table_h[i - 1]) / (table_h[i] - table_h[i - 1]);
            return table_phi[i - 1] + t * (table_phi[i] - table_phi[i - 1]);
        }
        }
        return 0.0;
    }

    /// Shape with unit constant; phi = c * unit_shape.
    double unit_shape(double h) const {
        switch (shape) {
        case EnvelopeShape::power: return std::pow(h, exponent);
        case EnvelopeShape::linear: return h;
        case EnvelopeShape::flat: return std::exp(-std::pow(h, -exponent));
        default: return 1.0;
        }
    }

    static VelocityDifferential power_law(double c, double exponent, double h0 = 0.5) {
        VelocityDifferential d;
        d.h0 = h0;
        d.shape = exponent == 1.0 ? EnvelopeShape::linear : EnvelopeShape::power;
        d.exponent = exponent;
        d.c = c;
        return d;
    }
};

namespace detail {

/// Sample locations for envelope calibration: a uniform grid plus points
/// clustered around each distinguished point.
inline std::vector<double> envelope_grid(const ShearProfile& prof, int n) {
    std::vector<double> ys;
    double lo = 0.0, hi = 1.0;
    if (prof.kind() == DomainKind::radial_plane) hi = 3.0;
    for (int i = 0; i < n; ++i) {
        double y = lo + (hi - lo) * i / (prof.kind() == DomainKind::torus ? n : n - 1);
        ys.push_back(y);
    }
    for (double p : prof.distinguished_points()) {
        for (double e : {0.0, 1e-6, 1e-4, 1e-3, 1e-2, 3e-2}) {
            for (double s : {-1.0, 1.0}) {
                double y = p + s * e;
                if (prof.in_domain(y)) ys.push_back(prof.canonical(y));
            }
        }
    }
    if (prof.family() == Family::vortex) {
        ys.erase(std::remove_if(ys.begin(), ys.end(), [](double r) { return r < 1e-3; }), ys.end());
    }
    std::sort(ys.begin(), ys.end());
    return ys;
}

} // namespace detail

/// Computes (h0, phi, iota) for `prof`. The constant in phi is the dense-grid
/// minimum of |b(y + iota h) - b(y)| / unit_shape(h), shaved by 1e-3 relative.
inline VelocityDifferential minimal_differential(const ShearProfile& prof, int ny = 1200, int nh = 400) {
    VelocityDifferential d;
    d.h0 = prof.h0();
    d.iota = [prof](double y) { return prof.iota(y); };
    switch (prof.family()) {
    case Family::constant:
        throw DegenerateProfile("constant shear has no velocity differential");
    case Family::poly_crit:
        d.shape = EnvelopeShape::power;
        d.exponent = prof.max_finite_order() + 1.0;
        break;
    case Family::flat_crit:
        d.shape = EnvelopeShape::flat;
        d.exponent = prof.param("p");
        break;
    case Family::holder_singular:
    case Family::triangle:
    case Family::radial_exp:
    case Family::vortex:
        d.shape = EnvelopeShape::linear;
        break;
    case Family::radial_power: {
        const double q = prof.param("q");
        d.shape = q == 0.0 ? EnvelopeShape::linear : EnvelopeShape::power;
        d.exponent = q + 1.0;
        break;
    }
    case Family::custom_table:
        d.shape = EnvelopeShape::table;
        break;
    }

    const auto ys = detail::envelope_grid(prof, ny);
    std::vector<double> hs(nh);
    for (int j = 0; j < nh; ++j) hs[j] = d.h0 * (j + 1) / nh;

    if (d.shape == EnvelopeShape::table) {
        std::vector<double> m(nh, std::numeric_limits<double>::infinity());
        for (double y : ys) {
            const int dir = prof.iota(y);
            const double by = prof.value(y);
            for (int j = 0; j < nh; ++j) {
                double yh = y + dir * hs[j];
                if (!prof.in_domain(yh)) continue;
                m[j] = std::min(m[j], std::abs(prof.value(yh) - by));
            }
        }
        // largest nondecreasing minorant
        for (int j = nh - 2; j >= 0; --j) m[j] = std::min(m[j], m[j + 1]);
        if (!(m.back() > 0.0)) throw DegenerateProfile("velocity differential vanishes identically");
        d.table_h = hs;
        d.table_phi.resize(nh);
        for (int j = 0; j < nh; ++j) d.table_phi[j] = (1.0 - 1e-3) * m[j];
        d.c = 1.0;
        return d;
    }

    double cmin = std::numeric_limits<double>::infinity();
    for (double y : ys) {
        const int dir = prof.iota(y);
        const double by = prof.value(y);
        for (double h : hs) {
            const double yh = y + dir * h;
            if (!prof.in_domain(yh)) continue;
            const double shape = d.unit_shape(h);
            if (!(shape > 1e-280)) continue;
            const double diff = std::abs(prof.value(yh) - by);
            cmin = std::min(cmin, diff / shape);
        }
    }
    if (!(cmin > 0.0) || !std::isfinite(cmin)) throw DegenerateProfile("velocity differential vanishes on an interval");
    d.c = (1.0 - 1e-3) * cmin;
    return d;
}

} // namespace shearlab
