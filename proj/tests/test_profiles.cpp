#include "shearlab/profiles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace shearlab;

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

ShearProfile sin_profile() { return make_profile(Family::poly_crit, {{"N", 1}}); }

// five-point central stencils
double central_diff(const ShearProfile& p, double y, int order, double h) {
    auto b = [&](double z) { return p.value(z); };
    if (order == 1) return (-b(y + 2 * h) + 8 * b(y + h) - 8 * b(y - h) + b(y - 2 * h)) / (12 * h);
    return (-b(y + 2 * h) + 16 * b(y + h) - 30 * b(y) + 16 * b(y - h) - b(y - 2 * h)) / (12 * h * h);
}

std::vector<ShearProfile> closed_form_zoo() {
    return {
        sin_profile(),
        make_profile(Family::poly_crit, {{"N", 2}}),
        make_profile(Family::poly_crit, {{"N", 3}}),
        make_profile(Family::flat_crit, {{"p", 2}}),
        make_profile(Family::holder_singular, {{"alpha", 0.5}, {"beta", 0.2}}),
        make_profile(Family::triangle, {}),
        make_profile(Family::radial_power, {{"q", 1}}),
        make_profile(Family::radial_power, {{"q", 1}}, DomainKind::radial_disk),
        make_profile(Family::radial_exp, {}),
        make_profile(Family::vortex, {{"alpha", 1}}),
    };
}

} // namespace

TEST(Profiles, SinDerivativeAtZero) {
    EXPECT_NEAR(sin_profile().eval(0.0, 1), kTau, 1e-14);
}

TEST(Profiles, SinCriticalRegistry) {
    auto p = sin_profile();
    ASSERT_EQ(p.critical_points().size(), 2u);
    EXPECT_DOUBLE_EQ(p.critical_points()[0].location, 0.25);
    EXPECT_DOUBLE_EQ(p.critical_points()[1].location, 0.75);
    EXPECT_EQ(p.critical_points()[0].order, 1);
    EXPECT_EQ(p.max_finite_order(), 1);
    EXPECT_DOUBLE_EQ(p.h0(), 0.25);
}

TEST(Profiles, VortexValueAtHalf) {
    auto p = make_profile(Family::vortex, {{"alpha", 1}});
    EXPECT_EQ(p.kind(), DomainKind::radial_disk);
    EXPECT_TRUE(p.critical_points().empty());
    EXPECT_DOUBLE_EQ(p.eval(0.5, 0), 2.0);
}

TEST(Profiles, FlatCritIncrementIsExpMinusHundred) {
    auto p = make_profile(Family::flat_crit, {{"p", 2}});
    ASSERT_TRUE(p.has_flat_point());
    const double y1 = p.critical_points()[0].location;
    const double h = (y1 + 0.1) - y1;
    EXPECT_NEAR(p.eval(y1 + 0.1, 0), p.eval(y1, 0) + std::exp(-1.0 / (h * h)), 1e-12 * std::exp(-100.0));
    EXPECT_NEAR(p.eval(y1 + 0.1, 0) / std::exp(-100.0), 1.0, 1e-12);
}

TEST(Profiles, RejectsOutOfRangeParameters) {
    EXPECT_THROW(make_profile(Family::holder_singular, {{"alpha", 1.2}}), InvalidParams);
    EXPECT_THROW(make_profile(Family::vortex, {{"alpha", 2.5}}), InvalidParams);
    EXPECT_THROW(make_profile(Family::flat_crit, {{"p", -1}}), InvalidParams);
    EXPECT_THROW(make_profile(Family::flat_crit, {}), InvalidParams);
    EXPECT_THROW(make_profile(Family::poly_crit, {{"N", 1.5}}), InvalidParams);
    EXPECT_THROW(make_profile(Family::poly_crit, {{"M", 1}}), InvalidParams);
    EXPECT_THROW(family_from_string("spiral"), UnsupportedFamily);
    EXPECT_THROW(make_profile(Family::custom_table, {}), UnsupportedFamily);
}

TEST(Profiles, SingularDerivativeAtRegisteredPoint) {
    auto tri = make_profile(Family::triangle, {});
    EXPECT_THROW(tri.eval(0.5, 1), SingularDerivative);
    EXPECT_THROW(tri.eval(0.0, 2), SingularDerivative);
    EXPECT_NO_THROW(tri.eval(0.5, 0));
    auto h = make_profile(Family::holder_singular, {{"alpha", 0.5}});
    EXPECT_THROW(h.eval(0.5, 1), SingularDerivative);
}

TEST(Profiles, DerivativeOrderValidated) {
    EXPECT_THROW(sin_profile().eval(0.1, 3), InvalidParams);
    EXPECT_THROW(make_profile(Family::vortex, {{"alpha", 1}}).eval(1.5, 0), InvalidParams);
}

TEST(Profiles, ClosedFormMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    for (const auto& p : closed_form_zoo()) {
        std::uniform_real_distribution<double> U(is_radial(p.kind()) ? 0.05 : 0.0, is_radial(p.kind()) ? 0.95 : 1.0);
        for (int i = 0; i < 200; ++i) {
            double y = U(rng);
            double dist = 1.0;
            for (double d : p.distinguished_points()) dist = std::min(dist, p.distance(y, d));
            if (dist < 0.02) continue;
            for (int order : {1, 2}) {
                const double h = std::min(order == 1 ? 1e-4 : 1e-3, 0.01 * dist);
                const double exact = p.eval(y, order);
                const double fd = central_diff(p, y, order, h);
                const double scale = std::max(std::abs(exact), 1.0);
                EXPECT_NEAR(exact, fd, 1e-6 * scale)
                    << to_string(p.family()) << " " << to_string(p.kind()) << " y=" << y << " order=" << order;
            }
        }
    }
}

TEST(Profiles, CriticalPointsVanishToRegisteredOrder) {
    for (int N : {1, 2, 3}) {
        auto p = make_profile(Family::poly_crit, {{"N", double(N)}});
        const double scale = p.scale();
        for (const auto& c : p.critical_points()) {
            const double y = c.location;
            // b^(j) for j >= 3 by central differences of the exact b''
            auto deriv = [&](int j) {
                if (j <= 2) return p.eval(y, j);
                const double h = 1e-3;
                auto b2 = [&](double z) { return p.eval(p.canonical(z), 2); };
                if (j == 3) return (b2(y + h) - b2(y - h)) / (2 * h);
                return (b2(y + h) - 2 * b2(y) + b2(y - h)) / (h * h);
            };
            for (int j = 1; j <= c.order; ++j)
                EXPECT_LT(std::abs(deriv(j)), j <= 2 ? 1e-6 * scale : 1e-3 * std::pow(kTau, j))
                    << "N=" << N << " y=" << y << " j=" << j;
            EXPECT_GT(std::abs(deriv(c.order + 1)), 1e-3 * scale) << "N=" << N << " y=" << y;
        }
    }
}

TEST(Profiles, TorusProfilesArePeriodic) {
    for (const auto& p : closed_form_zoo()) {
        if (p.kind() != DomainKind::torus) continue;
        EXPECT_LT(std::abs(p.value(0.0) - p.value(1.0 - 1e-15)), 1e-12 * p.scale()) << to_string(p.family());
    }
}

TEST(Profiles, RadialPlaneSlopeBoundedBelowAtLargeR) {
    for (auto p : {make_profile(Family::radial_power, {{"q", 1}}), make_profile(Family::radial_exp, {})}) {
        for (double r = 1.0; r < 50.0; r += 0.5) EXPECT_GT(std::abs(p.eval(r, 1)), 0.5);
    }
}

TEST(Profiles, DistinguishedPointsSortedAndInside) {
    for (const auto& p : closed_form_zoo()) {
        const auto& d = p.distinguished_points();
        for (std::size_t i = 1; i < d.size(); ++i) EXPECT_LT(d[i - 1], d[i]);
        for (double x : d) EXPECT_TRUE(p.in_domain(x));
        for (const auto& c : p.critical_points()) {
            if (is_radial(p.kind())) {
                EXPECT_GT(c.location, 0.0);
            }
        }
    }
}

TEST(Profiles, HolderSecondDerivativeSign) {
    // b'' from the product rule on |h|^a L^b; compare at several offsets.
    auto p = make_profile(Family::holder_singular, {{"alpha", 0.3}, {"beta", 0.1}});
    for (double h : {0.01, 0.05, 0.2}) {
        const double y = 0.5 + h;
        const double fd = (p.eval(y + 1e-6, 1) - p.eval(y - 1e-6, 1)) / 2e-6;
        EXPECT_NEAR(p.eval(y, 2), fd, 1e-5 * std::abs(fd));
    }
}

TEST(MinimalDifferential, SinEnvelopeIsQuadratic) {
    auto p = sin_profile();
    auto d = minimal_differential(p);
    EXPECT_EQ(d.shape, EnvelopeShape::power);
    EXPECT_DOUBLE_EQ(d.exponent, 2.0);
    // independent oracle on a different grid
    double oracle = 1e300;
    for (int i = 0; i < 997; ++i) {
        double y = (i + 0.37) / 997.0;
        int dir = p.iota(y);
        for (int j = 1; j <= 500; ++j) {
            double h = p.h0() * j / 500.0;
            oracle = std::min(oracle, std::abs(p.value(y + dir * h) - p.value(y)) / (h * h));
        }
    }
    EXPECT_LE(d.c, oracle);
    EXPECT_GE(d.c, 0.97 * oracle);
}

TEST(MinimalDifferential, TriangleIsLinearAndIotaFlips) {
    auto p = make_profile(Family::triangle, {});
    auto d = minimal_differential(p);
    EXPECT_EQ(d.shape, EnvelopeShape::linear);
    EXPECT_NEAR(d.c, 1.0, 2e-3);
    EXPECT_EQ(d.iota(0.49), -1);
    EXPECT_EQ(d.iota(0.51), 1);
    EXPECT_EQ(d.iota(0.01), 1);
    EXPECT_EQ(d.iota(0.99), -1);
}

TEST(MinimalDifferential, ConstantIsDegenerate) {
    auto p = make_profile(Family::constant, {{"value", 1.0}});
    EXPECT_THROW(minimal_differential(p), DegenerateProfile);
}

TEST(MinimalDifferential, EnvelopeHoldsOnRandomPairs) {
    std::mt19937_64 rng(11);
    for (const auto& p : closed_form_zoo()) {
        auto d = minimal_differential(p);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (int i = 0; i < 10000; ++i) {
            double y = U(rng);
            if (p.family() == Family::vortex && y < 0.01) continue;
            double h = d.h0 * std::max(U(rng), 1e-9);
            double yh = y + d.iota(y) * h;
            if (!p.in_domain(yh)) continue;
            EXPECT_GE(std::abs(p.value(yh) - p.value(y)), d.phi(h) - 1e-12)
                << to_string(p.family()) << " y=" << y << " h=" << h;
        }
    }
}

TEST(MinimalDifferential, PhiIsZeroAtOriginAndIncreasing) {
    for (const auto& p : closed_form_zoo()) {
        auto d = minimal_differential(p);
        EXPECT_EQ(d.phi(0.0), 0.0);
        double prev = 0.0;
        for (int j = 1; j <= 1000; ++j) {
            double v = d.phi(d.h0 * j / 1000.0);
            if (p.family() == Family::flat_crit && prev == 0.0 && v == 0.0) continue;
            EXPECT_GT(v, prev) << to_string(p.family());
            prev = v;
        }
    }
}

TEST(MinimalDifferential, IncrementMonotoneAlongIota) {
    for (const auto& p : closed_form_zoo()) {
        for (int i = 0; i < 200; ++i) {
            double y = is_radial(p.kind()) ? 0.02 + 0.96 * i / 200.0 : i / 200.0;
            int dir = p.iota(y);
            double prev = 0.0;
            for (int j = 1; j <= 200; ++j) {
                double yh = y + dir * p.h0() * j / 200.0;
                if (!p.in_domain(yh)) break;
                double v = std::abs(p.value(yh) - p.value(y));
                EXPECT_GE(v, prev - 1e-12 * p.scale()) << to_string(p.family()) << " y=" << y;
                prev = v;
            }
        }
    }
}

TEST(CustomTable, SplineReproducesSamples) {
    std::vector<double> s(256);
    for (int j = 0; j < 256; ++j) s[j] = std::sin(kTau * j / 256.0);
    auto p = make_custom_table(s);
    for (double y : {0.0, 0.13, 0.5, 0.77, 0.999}) {
        EXPECT_NEAR(p.value(y), std::sin(kTau * y), 1e-6);
        EXPECT_NEAR(p.eval(y, 1), kTau * std::cos(kTau * y), 1e-3);
    }
    ASSERT_EQ(p.critical_points().size(), 2u);
    EXPECT_NEAR(p.critical_points()[0].location, 0.25, 1e-4);
    auto d = minimal_differential(p);
    EXPECT_EQ(d.shape, EnvelopeShape::table);
    EXPECT_GT(d.phi(0.1), 0.0);
}

TEST(Serialization, FamilyNamesRoundTrip) {
    for (auto f : {Family::poly_crit, Family::flat_crit, Family::holder_singular, Family::triangle,
                   Family::radial_power, Family::radial_exp, Family::vortex, Family::custom_table,
                   Family::constant})
        EXPECT_EQ(family_from_string(to_string(f)), f);
}
