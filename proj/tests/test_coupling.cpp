#include "shearlab/coupling.hpp"
#include "shearlab/measures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace shearlab;

namespace {

ShearProfile triangle() { return make_profile(Family::triangle, {}); }
ShearProfile sine() { return make_profile(Family::poly_crit, {{"N", 1}}); }

} // namespace

TEST(CoupleTorus, EqualStartsAreCoupledAtOnce) {
    auto o = couple_torus(triangle(), 1e-4, 0.3, 0.3, 0.2, 1);
    EXPECT_TRUE(o.coupled);
    EXPECT_EQ(o.couple_time, 0.0);
    EXPECT_EQ(o.cost, 0.0);
    auto w = couple_torus(triangle(), 1e-4, 0.3, 1.3, 0.2, 1);
    EXPECT_TRUE(w.coupled);
}

TEST(CoupleTorus, TriangleFractionIsNuUniform) {
    CouplingBatch b4 = couple_torus_batch(triangle(), 1e-4, 0.0, 0.1, 0.2, 1000, 1);
    CouplingBatch b5 = couple_torus_batch(triangle(), 1e-5, 0.0, 0.1, 0.2, 1000, 1);
    EXPECT_GE(b4.fraction.value, 0.05);
    EXPECT_GE(b5.fraction.value, 0.05);
    EXPECT_LE(std::max(b4.fraction.value, b5.fraction.value) / std::min(b4.fraction.value, b5.fraction.value), 2.0);
    EXPECT_LE(std::max(b4.max_cost, b5.max_cost) / std::min(b4.max_cost, b5.max_cost), 2.0);
    // step 1 costs at most 1, step 2 a bounded multiple
    EXPECT_LE(b4.max_cost, 1.0 + 1.0);
}

TEST(CoupleTorus, CriticalPointMedianTime) {
    auto b = couple_torus_batch(sine(), 1e-4, 0.0, 0.1, 0.25, 400, 7);
    ASSERT_GT(b.fraction.value, 0.0);
    EXPECT_LE(b.median_time, 8 * b.t_nu);
}

TEST(CoupleTorus, SharedNoiseWithoutControl) {
    CouplingOptions o;
    o.controls_off = true;
    o.trace = true;
    auto r = couple_torus(sine(), 1e-3, 0.0, 0.2, 0.1, 5, o);
    EXPECT_FALSE(r.coupled);
    ASSERT_GT(r.trace.size(), 100u);
    for (const auto& s : r.trace) {
        EXPECT_NEAR(s.b_tilde, s.b, 1e-12);
        EXPECT_NEAR(std::abs(s.rho), 0.2, 1e-12);
        EXPECT_EQ(s.cost, 0.0);
    }
}

TEST(CoupleTorus, ShrinkPhaseKeepsIdentityAndCostGrows) {
    CouplingOptions o;
    o.trace = true;
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        auto r = couple_torus(triangle(), 1e-4, 0.0, 0.1, 0.2, seed, o);
        double prev_cost = 0.0, prev_h = 0.0;
        for (std::size_t i = 0; i < r.trace.size(); ++i) {
            const auto& s = r.trace[i];
            EXPECT_GE(s.cost, prev_cost);
            EXPECT_TRUE(std::isfinite(s.cost));
            if (s.phase == Phase::shrink && i > 0) {
                const double dt = s.t - r.trace[i - 1].t;
                const double slope = std::abs(s.h - prev_h) / dt;
                EXPECT_LE(std::abs(s.h - r.ell * std::sqrt(std::max(s.rho, 0.0))), 5 * dt * slope + 1e-12);
                ++checked;
            }
            prev_cost = s.cost;
            prev_h = s.h;
        }
        if (r.coupled) {
            EXPECT_EQ(r.trace.back().a, r.trace.back().a_tilde);
            EXPECT_EQ(r.trace.back().b, r.trace.back().b_tilde);
            EXPECT_FALSE(std::isnan(r.tau0));
            EXPECT_FALSE(std::isnan(r.tau1));
            EXPECT_LE(r.tau0, r.tau1);
            EXPECT_LE(r.tau1, r.tau2);
        }
    }
    EXPECT_GT(checked, 100);
}

TEST(CoupleTorus, CoupledPairsStayTogether) {
    CouplingOptions o;
    o.run_to_cap = true;
    int coupled = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        auto r = couple_torus(triangle(), 1e-3, 0.0, 0.1, 0.2, seed, o);
        if (!r.coupled) continue;
        ++coupled;
        EXPECT_EQ(r.end_a, r.end_a_tilde);
        EXPECT_EQ(r.end_b, r.end_b_tilde);
    }
    EXPECT_GT(coupled, 0);
}

TEST(CoupleTorus, CouplingInequality) {
    CouplingOptions o;
    o.run_to_cap = true;
    const std::size_t n = 4000;
    auto b = couple_torus_batch(sine(), 1e-3, 0.0, 0.1, 0.25, n, 100, o);
    std::vector<double> xa, xb;
    for (const auto& r : b.outcomes) {
        xa.push_back(r.end_a);
        xb.push_back(r.end_a_tilde);
    }
    auto tv = tv_from_samples(wrap_samples(xa), wrap_samples(xb), 0.0, 1.0, 10);
    const double uncoupled = 1.0 - b.fraction.value;
    EXPECT_LE(tv.tv, uncoupled + 3 * b.fraction.se);
    EXPECT_GE(uncoupled, 0.0);
}

TEST(CoupleTorus, CoarseStepIsRejected) {
    CouplingOptions o;
    const double t_nu = local_timescale(triangle(), 1e-4, 0.2);
    o.dt = t_nu / 50;
    EXPECT_THROW(couple_torus(triangle(), 1e-4, 0.0, 0.1, 0.2, 1, o), ResolutionError);
}

TEST(CoupleTorus, FlatWindowUsesCaseTwo) {
    auto flat = make_profile(Family::flat_crit, {{"p", 2}});
    auto r = couple_torus(flat, 1e-4, 0.0, 0.1, 0.5, 3);
    EXPECT_EQ(r.case_id, 2);
    EXPECT_TRUE(r.has_flag("case2"));
    auto s = couple_torus(flat, 1e-4, 0.0, 0.1, 0.3, 3);
    EXPECT_EQ(s.case_id, 1);
}

TEST(CoupleRadial, EqualAnglesAreCoupledAtOnce) {
    auto sq = make_profile(Family::radial_power, {{"q", 1}}, DomainKind::radial_plane);
    auto o = couple_radial(sq, 1e-4, 0.5, 1.0, 1.0, 1);
    EXPECT_TRUE(o.coupled);
    EXPECT_EQ(o.cost, 0.0);
    EXPECT_THROW(couple_radial(sq, 1e-4, 0.0, 0.0, 0.1, 1), InvalidParams);
}

TEST(CoupleRadial, SquareProfileFractionIsNuStable) {
    auto sq = make_profile(Family::radial_power, {{"q", 1}}, DomainKind::radial_plane);
    auto b4 = couple_radial_batch(sq, 1e-4, 0.5, 0.0, 0.1, 1000, 1);
    auto b5 = couple_radial_batch(sq, 1e-5, 0.5, 0.0, 0.1, 1000, 1);
    EXPECT_GE(b4.fraction.value, 0.02);
    EXPECT_GE(b5.fraction.value, 0.02);
    EXPECT_LE(std::max(b4.fraction.value, b5.fraction.value) / std::min(b4.fraction.value, b5.fraction.value), 2.0);
    EXPECT_LE(std::max(b4.max_cost, b5.max_cost) / std::min(b4.max_cost, b5.max_cost), 2.0);
}

TEST(CoupleRadial, VortexOnDiskNeverTouchesBoundaryWhenCoupled) {
    auto vx = make_profile(Family::vortex, {{"alpha", 1}});
    CouplingOptions o;
    o.reflect = true;
    auto b = couple_radial_batch(vx, 1e-4, 0.5, 0.0, 0.1, 1000, 1, o);
    EXPECT_GE(b.fraction.value, 0.02);
    for (const auto& r : b.outcomes)
        if (r.coupled) {
            EXPECT_FALSE(r.has_flag("boundary"));
        }
}

TEST(CoupleRadial, StagesInOrder) {
    auto sq = make_profile(Family::radial_power, {{"q", 1}}, DomainKind::radial_plane);
    CouplingOptions o;
    o.trace = true;
    int coupled = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        auto r = couple_radial(sq, 1e-4, 0.5, 0.0, 0.1, seed, o);
        if (!r.coupled) continue;
        ++coupled;
        EXPECT_LE(r.tau0, r.tau1);
        EXPECT_LE(r.tau1, r.tau2);
        EXPECT_LE(r.tau2, r.tau3);
        EXPECT_EQ(r.couple_time, r.tau3);
        EXPECT_EQ(r.trace.back().a, r.trace.back().a_tilde);
        EXPECT_EQ(r.trace.back().b, r.trace.back().b_tilde);
        double prev = 0.0;
        for (const auto& s : r.trace) {
            EXPECT_GE(s.cost, prev);
            prev = s.cost;
            if (s.phase == Phase::waiting) {
                EXPECT_EQ(s.control, 0.0);
            }
        }
    }
    EXPECT_GT(coupled, 0);
}

TEST(Girsanov, Certificate) {
    EXPECT_DOUBLE_EQ(girsanov_certificate(1.0, 0.0), 0.75);
    EXPECT_NEAR(girsanov_certificate(0.05, 2.0), 1 - 0.25 * 0.0025 * std::exp(-4.0), 1e-15);
    EXPECT_NEAR(girsanov_certificate(0.05, 2.0), 0.9999886, 1e-7);
    EXPECT_THROW(girsanov_certificate(0.0, 1.0), InvalidParams);
    EXPECT_THROW(girsanov_certificate(1.5, 1.0), InvalidParams);
    EXPECT_THROW(girsanov_certificate(0.5, -1.0), InvalidParams);
}

TEST(Girsanov, GaussianToySweep) {
    for (double gap : {0.01, 0.1, 0.5, 1.0, 3.0})
        for (double T : {0.1, 1.0, 10.0}) {
            GaussianToy toy{gap, T};
            EXPECT_LE(toy.tv(), toy.certificate()) << gap << " " << T;
        }
    GaussianToy zero{0.0, 1.0};
    EXPECT_EQ(zero.tv(), 0.0);
    EXPECT_EQ(zero.cost(), 0.0);
}
