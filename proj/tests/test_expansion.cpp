#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "exbern/expansion.hpp"
#include "exbern/nonlinear.hpp"
#include "test_util.hpp"

using namespace exbern;

namespace {

const std::vector<Window> windows{{8.0, 16.0}, {16.0, 32.0}, {32.0, 64.0}};

const AnnularGrid& fine_grid() {
    static const auto g = build_grid(1.0, 64.0, 256, 128);
    return g;
}

}  // namespace

TEST(Fit, HalfSquareIsInTheBasis) {
    const auto g = build_grid(1.0, 64.0, 128, 32);
    const auto ex = fit_expansion(sample(g, [](Vec2 x) { return 0.5 * norm2(x); }), windows);
    EXPECT_NEAR(ex.A.m11, 1.0, 1e-10);
    EXPECT_NEAR(ex.A.m12, 0.0, 1e-10);
    EXPECT_NEAR(ex.A.m22, 1.0, 1e-10);
    for (double v : {ex.b.x, ex.b.y, ex.d, ex.c, ex.e.x, ex.e.y}) EXPECT_NEAR(v, 0.0, 1e-10);
    EXPECT_TRUE(ex.residual_fit.degenerate);
}

TEST(Fit, FullBasisMember) {
    const auto g = build_grid(1.0, 64.0, 128, 32);
    const auto ex = fit_expansion(
        sample(g, [](Vec2 x) { return 0.5 * norm2(x) + std::log(norm(x)) + 3.0 + x.x / norm2(x); }), windows);
    EXPECT_NEAR(ex.d, 1.0, 1e-10);
    EXPECT_NEAR(ex.c, 3.0, 1e-10);
    EXPECT_NEAR(ex.e.x, 1.0, 1e-10);
    EXPECT_NEAR(ex.e.y, 0.0, 1e-10);
    for (const auto& w : ex.windows) EXPECT_LT(w.condition, 1e10);
}

TEST(Fit, RandomBasisCombination) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    const auto g = build_grid(1.0, 64.0, 128, 32);
    for (int t = 0; t < 5; ++t) {
        std::array<double, expansion_basis_size> z{};
        for (auto& v : z) v = d(rng);
        const auto u = sample(g, [&](Vec2 x) {
            const auto b = expansion_basis(x);
            double s = 0.0;
            for (int k = 0; k < expansion_basis_size; ++k) s += z[k] * b[k];
            return s;
        });
        const auto ex = fit_expansion(u, windows);
        const auto& got = ex.windows.back().coefficients;
        for (int k = 0; k < expansion_basis_size; ++k) EXPECT_NEAR(got[k], z[k], 1e-8 * (1.0 + std::abs(z[k])));
    }
}

TEST(Fit, RadialMongeAmpereSample) {
    const auto ex = fit_expansion(radial_ma_field(fine_grid(), 2.0), windows);
    EXPECT_NEAR(ex.d, 1.0, 1e-3);
    EXPECT_NEAR(ex.c, 0.5 + std::log(2.0), 1e-2);
    EXPECT_NEAR((ex.A - Sym2::identity()).norm(), 0.0, 1e-6);
    EXPECT_GE(ex.residual_fit.exponent, 1.0);
    // residuals shrink with radius
    for (std::size_t k = 1; k < ex.windows.size(); ++k) EXPECT_LT(ex.windows[k].residual, ex.windows[k - 1].residual);
}

TEST(Fit, WindowPreconditions) {
    const auto g = build_grid(1.0, 64.0, 64, 32);
    const auto u = sample(g, [](Vec2 x) { return 0.5 * norm2(x); });
    expect_error(ErrorCode::insufficient_window, [&] { fit_expansion(u, {{8, 16}, {16, 32}}); });
    expect_error(ErrorCode::window_outside_grid, [&] { fit_expansion(u, {{8, 16}, {16, 32}, {32, 128}}); });
    expect_error(ErrorCode::insufficient_window, [&] { fit_expansion(u, {{8, 8.5}, {16, 32}, {32, 64}}); });
    FitOptions strict;
    strict.max_condition = 10.0;
    expect_error(ErrorCode::ill_conditioned_window, [&] { fit_expansion(u, windows, strict); });
}

TEST(HessianLimit, QuadraticPlusLog) {
    const auto g = build_grid(1.0, 64.0, 256, 64);
    const auto hl = hessian_limit(
        sample(g, [](Vec2 x) { return 0.5 * (x.x * x.x + 2.0 * x.y * x.y) + std::log(norm(x)); }), windows);
    EXPECT_NEAR(hl.A.m11, 1.0, 1e-6);
    EXPECT_NEAR(hl.A.m12, 0.0, 1e-6);
    EXPECT_NEAR(hl.A.m22, 2.0, 1e-6);
    EXPECT_NEAR(hl.fit.exponent, 2.0, 0.1);
}

TEST(HessianLimit, RadialMongeAmpere) {
    const auto hl = hessian_limit(radial_ma_field(fine_grid(), 2.0), windows);
    EXPECT_NEAR((hl.A - Sym2::identity()).norm(), 0.0, 1e-6);
    EXPECT_NEAR(hl.fit.exponent, 2.0, 0.2);
}

TEST(HessianLimit, SlowSyntheticDecay) {
    const auto g = build_grid(1.0, 1024.0, 321, 64);
    const auto hl = hessian_limit(sample(g, [](Vec2 x) { return 0.5 * norm2(x) + std::pow(norm(x), 1.6); }),
                                  {{16, 32}, {32, 64}, {64, 128}, {128, 256}, {256, 512}, {512, 1024}});
    EXPECT_NEAR(hl.fit.exponent, 0.4, 0.02);
}

TEST(Laurent, FundamentalSolution) {
    const auto g = build_grid(1.0, 256.0, 65, 128);
    const auto lc = laurent_coefficients(sample(g, [](Vec2 x) { return std::log(norm(x)); }), 16.0, 4);
    EXPECT_NEAR(lc.a(-1).real(), 1.0, 1e-10);
    EXPECT_NEAR(lc.a(-1).imag(), 0.0, 1e-10);
    for (int k : {0, -2, -3, -4}) EXPECT_LT(std::abs(lc.a(k)), 1e-10);
    EXPECT_NEAR(lc.d(), 1.0, 1e-10);
}

TEST(Laurent, LinearFunction) {
    const auto g = build_grid(1.0, 256.0, 65, 128);
    LaurentOptions opt;
    opt.exact_gradient = [](Vec2) { return Vec2{1.0, 0.0}; };
    const auto lc = laurent_coefficients(sample(g, [](Vec2 x) { return x.x; }), 16.0, 2, opt);
    EXPECT_NEAR(lc.b().x, 1.0, 1e-12);
    EXPECT_NEAR(lc.b().y, 0.0, 1e-12);
    EXPECT_LT(std::abs(lc.a(-1)), 1e-12);
}

TEST(Laurent, InversePoint) {
    const auto g = build_grid(1.0, 256.0, 65, 128);
    LaurentOptions opt;
    opt.exact_gradient = [](Vec2 x) {
        const double r4 = norm2(x) * norm2(x);
        return Vec2{(x.y * x.y - x.x * x.x) / r4, -2.0 * x.x * x.y / r4};
    };
    const auto lc = laurent_coefficients(sample(g, [](Vec2 x) { return x.x / norm2(x); }), 16.0, 4, opt);
    EXPECT_NEAR(lc.a(-2).real(), -1.0, 1e-10);
    EXPECT_NEAR(lc.a(-2).imag(), 0.0, 1e-10);
    for (int k : {0, -1, -3, -4}) EXPECT_LT(std::abs(lc.a(k)), 1e-10);
}

TEST(Laurent, ResidueIsRealForRealHarmonicInput) {
    const auto g = build_grid(1.0, 64.0, 96, 64);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        const double c1 = d(rng), c2 = d(rng), c3 = d(rng), c4 = d(rng);
        const Vec2 x0{0.3 * d(rng), 0.3 * d(rng)};
        const auto u = sample(g, [&](Vec2 x) {
            return c1 * std::log(norm(x - x0)) + c2 * x.y / norm2(x) + c3 * (x.x * x.x - x.y * x.y) / 100.0 + c4 * x.x;
        });
        for (double R : {8.0, 16.0, 32.0}) {
            const auto lc = laurent_coefficients(u, g.radius(g.nearest_ring(R)), 2);
            EXPECT_LE(std::abs(lc.a(-1).imag()), 1e-8);
            EXPECT_NEAR(lc.a(-1).real(), c1, 1e-4);
        }
    }
}

TEST(Laurent, RejectsNonHarmonicAndOffGridRadius) {
    const auto g = build_grid(1.0, 64.0, 96, 64);
    const auto u = sample(g, [](Vec2 x) { return 0.5 * norm2(x); });
    expect_error(ErrorCode::not_harmonic, [&] { laurent_coefficients(u, g.radius(40), 2); });
    LaurentOptions opt;
    opt.subtract_quadratic = Sym2::identity();
    EXPECT_NO_THROW(laurent_coefficients(u, g.radius(40), 2, opt));
    expect_error(ErrorCode::radius_not_on_grid, [&] { laurent_coefficients(u, 0.5 * (g.radius(3) + g.radius(4)), 2); });
}

TEST(Divergence, ClosedFormCancellations) {
    const auto g = build_grid(1.0, 64.0, 128, 64);
    const auto q = d_from_divergence(sample(g, [](Vec2 x) { return 0.5 * norm2(x); }), Sym2::identity(), 64.0);
    // the area term sums cancelling values over an annulus of area ~1.3e4
    const double roundoff = 1e-12 * pi * 64.0 * 64.0;
    EXPECT_NEAR(q.d, 0.0, roundoff);
    EXPECT_NEAR(q.flux_inner, 2.0 * pi, 1e-10);
    EXPECT_NEAR(q.area_term, 0.0, roundoff);
    const auto l = d_from_divergence(sample(g, [](Vec2 x) { return 0.5 * norm2(x) + std::log(norm(x)); }),
                                     Sym2::identity(), 64.0);
    EXPECT_NEAR(l.d, 1.0, roundoff);
    EXPECT_NEAR(l.flux_inner, 4.0 * pi, 1e-10);
}

TEST(Divergence, RadialMongeAmpereSample) {
    for (double a : {1.0, 2.0}) {
        const auto q = d_from_divergence(radial_ma_field(fine_grid(), a), Sym2::identity(), 64.0);
        EXPECT_NEAR(q.d, a / 2.0, 1e-4) << "a = " << a;
        EXPECT_LE(std::abs(q.d - q.d_raw), q.truncation + 1e-15);
    }
}

TEST(Divergence, RadiusMustLieOnGrid) {
    const auto g = build_grid(1.0, 64.0, 128, 64);
    const auto u = sample(g, [](Vec2 x) { return 0.5 * norm2(x); });
    expect_error(ErrorCode::window_outside_grid, [&] { d_from_divergence(u, Sym2::identity(), 0.5); });
}

TEST(Bootstrap, HalfNeedsOneStep) {
    const auto s = bootstrap_schedule(0.5);
    EXPECT_EQ(s.n, 1);
    EXPECT_TRUE(valid_schedule(s));
    // the literal formula with epsilon = 0.1 gives delta = 0.1
    const auto lit = literal_bootstrap_schedule(0.5, 0.1);
    EXPECT_EQ(lit.n, 1);
    EXPECT_NEAR(lit.delta, 0.1, 1e-15);
}

TEST(Bootstrap, LargeAlphaNeedsNoStep) {
    const auto s = bootstrap_schedule(0.9);
    EXPECT_EQ(s.n, 0);
    EXPECT_NEAR(s.delta, 0.1, 1e-3);
    EXPECT_TRUE(valid_schedule(s));
}

// alpha = 2 - sqrt 3: n = 2; with epsilon = 0.02, delta = 1 - 4 alpha + 0.06 = -0.0117968...
TEST(Bootstrap, LiteralFormulaCounterexample) {
    const double alpha = 2.0 - std::sqrt(3.0);
    const auto lit = literal_bootstrap_schedule(alpha, 0.02);
    EXPECT_EQ(lit.n, 2);
    EXPECT_NEAR(lit.delta, -0.011796769724490, 1e-12);
    EXPECT_FALSE(valid_schedule(lit));
    const auto s = bootstrap_schedule(alpha);
    EXPECT_EQ(s.n, 2);
    EXPECT_NEAR(s.epsilon, 0.044765589908164, 1e-13);
    EXPECT_NEAR(s.delta, 1.0 / 16.0, 1e-15);
    EXPECT_TRUE(valid_schedule(s));
}

TEST(Bootstrap, AlwaysValid) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(0.01, 0.99);
    for (int k = 0; k < 1000; ++k) {
        const double a = d(rng);
        const auto s = bootstrap_schedule(a);
        ASSERT_TRUE(valid_schedule(s)) << "alpha = " << a;
        EXPECT_GT(s.delta, 0.0);
        EXPECT_LT(s.delta, 0.125);
    }
    expect_error(ErrorCode::domain_error, [] { bootstrap_schedule(1.0); });
    expect_error(ErrorCode::domain_error, [] { bootstrap_schedule(0.0); });
}

// With the exact expansion A = I, d = a/2, c = a/4 + (a/2) log 2 the remainder
// is a^2 / (16 r^2) + O(r^-4), so |D^k phi| ~ r^-(2+k).
TEST(DerivativeDecay, RadialMongeAmpereRemainder) {
    const double a = 2.0;
    const auto u = radial_ma_field(fine_grid(), a);
    ExpansionCoefficients exact;
    exact.A = Sym2::identity();
    exact.d = a / 2.0;
    exact.c = a / 4.0 + 0.5 * a * std::log(2.0);
    const auto dd = derivative_decay(u, exact, windows);
    EXPECT_NEAR(dd.orders[0].exponent, 3.0, 0.1);
    EXPECT_NEAR(dd.orders[1].exponent, 4.0, 0.1);
    EXPECT_NEAR(dd.orders[2].exponent, 5.0, 0.2);
    // exact |phi'| = |u'(r) - r - a / (2 r)|, maximized over the rings of the first window
    const auto& g = fine_grid();
    double sup = 0.0;
    for (int i = 1; i + 1 < g.n_r(); ++i) {
        const double r = g.radius(i);
        if (r < 8.0 || r > 16.0) continue;
        sup = std::max(sup, std::abs(radial_ma_reference(a, r).du - r - 0.5 * a / r));
    }
    EXPECT_NEAR(dd.orders[0].windows.front().deviation, sup, 1e-3 * sup);

    // a fitted expansion only steepens the apparent decay through its small d error
    const auto fitted = derivative_decay(u, fit_expansion(u, windows), windows);
    for (int k = 0; k < 3; ++k) EXPECT_GE(fitted.orders[k].exponent, 2.9 + k);
}
