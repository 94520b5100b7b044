#include "shearlab/measures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace shearlab;

namespace {

auto same_marginal_pair(int a, int b, std::mt19937_64& g) { return random_same_marginal_pair(a, b, g); }

} // namespace

TEST(TvDiscrete, Examples) {
    EXPECT_EQ(tv_discrete({0.2, 0.8}, {0.2, 0.8}), 0.0);
    EXPECT_NEAR(tv_discrete({0.7, 0.3}, {0.4, 0.6}), 0.3, 1e-15);
    EXPECT_EQ(tv_discrete({1, 0, 0}, {0, 0.5, 0.5}), 1.0);
    EXPECT_THROW(tv_discrete({1.0}, {0.5, 0.5}), ShapeMismatch);
}

TEST(TvDiscrete, DualityOverSignTests) {
    std::mt19937_64 g(1);
    for (int n = 1; n <= 12; ++n) {
        auto p = random_simplex(n, g), q = random_simplex(n, g);
        // sup over f in {-1, 1}^n of (1/2) sum f (p - q)
        double best = -1.0;
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += ((mask >> i) & 1 ? 1.0 : -1.0) * (p[i] - q[i]);
            best = std::max(best, 0.5 * s);
        }
        EXPECT_NEAR(best, tv_discrete(p, q), 1e-14);
    }
}

TEST(MaximalCoupling, MarginalsAndDiagonal) {
    auto g = maximal_coupling({0.7, 0.3}, {0.4, 0.6});
    EXPECT_NEAR(g[0] + g[3], 0.7, 1e-15);
    EXPECT_NEAR(g[0] + g[1], 0.7, 1e-15);
    EXPECT_NEAR(g[0] + g[2], 0.4, 1e-15);
    auto same = maximal_coupling({0.25, 0.75}, {0.25, 0.75});
    EXPECT_EQ(same[1], 0.0);
    EXPECT_EQ(same[2], 0.0);
    auto pts = maximal_coupling({1, 0, 0}, {0, 0, 1});
    EXPECT_EQ(pts[0 * 3 + 2], 1.0);
    EXPECT_THROW(maximal_coupling({1.0}, {0.5, 0.5}), ShapeMismatch);
}

TEST(MaximalCoupling, AchievesMinimumOverCouplings) {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 4;
        auto p = random_simplex(n, gen), q = random_simplex(n, gen);
        const double tv = tv_discrete(p, q);
        auto gam = maximal_coupling(p, q);
        double diag = 0.0;
        for (int i = 0; i < n; ++i) {
            diag += gam[i * n + i];
            double row = 0.0, col = 0.0;
            for (int j = 0; j < n; ++j) {
                row += gam[i * n + j];
                col += gam[j * n + i];
            }
            EXPECT_NEAR(row, p[i], 1e-12);
            EXPECT_NEAR(col, q[i], 1e-12);
        }
        EXPECT_NEAR(1.0 - diag, tv, 1e-12);
        // random couplings from the north-west corner rule on shuffled orders
        for (int k = 0; k < 500; ++k) {
            std::vector<int> pi(n), qi(n);
            for (int i = 0; i < n; ++i) pi[i] = qi[i] = i;
            std::shuffle(pi.begin(), pi.end(), gen);
            std::shuffle(qi.begin(), qi.end(), gen);
            std::vector<double> pr = p, qr = q;
            double offdiag = 0.0;
            int a = 0, b = 0;
            while (a < n && b < n) {
                const double m = std::min(pr[pi[a]], qr[qi[b]]);
                if (pi[a] != qi[b]) offdiag += m;
                pr[pi[a]] -= m;
                qr[qi[b]] -= m;
                if (pr[pi[a]] <= 1e-15) ++a;
                else ++b;
            }
            EXPECT_GE(offdiag, tv - 1e-12);
        }
    }
}

TEST(FiberTv, Examples) {
    std::mt19937_64 g(3);
    auto [m1, m2] = same_marginal_pair(5, 7, g);
    auto r = fiber_tv(m1, m1);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_EQ(r.rhs, 0.0);
    FiniteProductMeasure a(3, 1), b(3, 1);
    a.w = {0.5, 0.5, 0.0};
    b.w = {0.0, 0.5, 0.5};
    auto single = fiber_tv(a, b);
    EXPECT_NEAR(single.lhs, tv_discrete(a.w, b.w), 1e-15);
    EXPECT_NEAR(single.rhs, tv_discrete(a.w, b.w), 1e-15);
}

TEST(FiberTv, RandomInstancesAgree) {
    std::mt19937_64 g(4);
    for (int i = 0; i < 200; ++i) {
        auto [m1, m2] = same_marginal_pair(5, 7, g);
        m1.validate();
        auto r = fiber_tv(m1, m2);
        EXPECT_NEAR(r.lhs, r.rhs, 1e-12);
    }
}

TEST(FiberTv, RejectsDifferentMarginals) {
    FiniteProductMeasure a(2, 2), b(2, 2);
    a.w = {0.25, 0.25, 0.25, 0.25};
    b.w = {0.5, 0.0, 0.5, 0.0};
    EXPECT_THROW(fiber_tv(a, b), MarginalMismatch);
}

TEST(MarginalContraction, ResampleAndIdentity) {
    std::mt19937_64 g(5);
    auto [m1, m2] = same_marginal_pair(3, 2, g);
    FiniteKernel resample(3, 2), id(3, 2);
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 2; ++y) {
            const int i = x * 2 + y;
            id.at(i, i) = 1.0;
            for (int xx = 0; xx < 3; ++xx) resample.at(i, xx * 2 + y) = 1.0 / 3;
        }
    resample.validate();
    auto r = marginal_contraction_check(resample, m1, m2);
    EXPECT_NEAR(r.eps, 1.0, 1e-15);
    EXPECT_NEAR(r.tv_after, 0.0, 1e-15);
    EXPECT_TRUE(r.holds);
    auto s = marginal_contraction_check(id, m1, m2);
    EXPECT_EQ(s.eps, 0.0);
    EXPECT_NEAR(s.tv_after, s.tv_before, 1e-15);
    EXPECT_TRUE(s.holds);
}

TEST(MarginalContraction, RandomKernels) {
    std::mt19937_64 g(6);
    for (int i = 0; i < 200; ++i) {
        auto P = random_kernel(4, 4, g);
        auto [m1, m2] = same_marginal_pair(4, 4, g);
        auto r = marginal_contraction_check(P, m1, m2);
        EXPECT_TRUE(r.holds) << r.tv_after << " vs " << (1 - r.eps) * r.tv_before;
    }
}

TEST(TvFromSamples, IdenticalAndDisjoint) {
    std::vector<double> a(1000), b(1000);
    for (int i = 0; i < 1000; ++i) {
        a[i] = i / 1000.0;
        b[i] = 2.0 + i / 1000.0;
    }
    EXPECT_EQ(tv_from_samples(a, a, 0.0, 1.0, 10).tv, 0.0);
    EXPECT_NEAR(tv_from_samples(a, b, 0.0, 3.0, 6).tv, 1.0, 1e-15);
    EXPECT_THROW(tv_from_samples(a, a, 0.0, 1.0, 100), UnderSampled);
}

TEST(TvFromSamples, ShiftedGaussians) {
    std::mt19937_64 g(7);
    std::normal_distribution<double> n01(0.0, 1.0);
    const int n = 1000000;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        a[i] = n01(g);
        b[i] = 1.0 + n01(g);
    }
    const double exact = 2 * normal_cdf(0.5) - 1;
    EXPECT_NEAR(exact, 0.3829, 1e-4);
    auto r = tv_from_samples(a, b, -6.0, 7.0, 200);
    EXPECT_NEAR(r.tv, exact, 0.01);
    EXPECT_GE(r.per_occupied, 20.0);
}

TEST(TvFromSamples, WrappingNeverIncreases) {
    std::mt19937_64 g(8);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (double shift : {0.1, 0.3, 0.5, 1.0}) {
        std::vector<double> a(200000), b(200000);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = 0.4 * n01(g);
            b[i] = shift + 0.4 * n01(g);
        }
        // bins aligned with the unit period
        const double line = tv_from_samples(a, b, -3.0, 4.0, 7 * 20).tv;
        const double torus = tv_from_samples(wrap_samples(a), wrap_samples(b), 0.0, 1.0, 20).tv;
        EXPECT_LE(torus, line + 1e-12) << shift;
    }
}

TEST(TvFromSamples, TwoDimensional) {
    std::vector<double> x(4000), y(4000);
    for (int i = 0; i < 4000; ++i) {
        x[i] = (i % 40) / 40.0;
        y[i] = (i / 40) / 100.0;
    }
    EXPECT_EQ(tv_from_samples_2d(x, y, x, y, 0, 1, 0, 1, 4, 4).tv, 0.0);
    std::vector<double> y2(y);
    for (auto& v : y2) v = 1.5;
    EXPECT_NEAR(tv_from_samples_2d(x, y, x, y2, 0, 1, 0, 1, 4, 4).tv, 1.0, 1e-15);
}

TEST(HeatMass, BoundAndGaussianTail) {
    EXPECT_NEAR(heat_mass_bound(4.0), 0.19139, 1e-5);
    auto r = heat_mass_bound_check(1e-4, 1.0, 0.3, 2.0, 400000, 1);
    EXPECT_NEAR(r.estimate.value, 2 * (1 - normal_cdf(std::sqrt(2.0))), 4 * r.estimate.se);
    EXPECT_NEAR(r.bound, 0.858, 1e-3);
    EXPECT_TRUE(r.holds);
    auto z = heat_mass_bound_check(1e-4, 0.0, 0.3, 2.0, 1000, 1);
    EXPECT_EQ(z.estimate.value, 0.0);
    for (double R : {2.0, 3.0, 4.0}) EXPECT_TRUE(heat_mass_bound_check(1e-3, 2.0, 0.5, R, 200000, 2).holds);
    EXPECT_THROW(heat_mass_bound_check(1e-3, 1.0, 0.0, 0.5, 10, 1), InvalidParams);
}

TEST(ExactTvSuite, AllInstancesPass) {
    auto r = exact_tv_suite(200, 9);
    EXPECT_LE(r.fiber_max_err, 1e-12);
    EXPECT_EQ(r.contraction_failures, 0);
    EXPECT_LE(r.coupling_max_err, 1e-12);
}
