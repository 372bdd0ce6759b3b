#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "exbern/nonlinear.hpp"
#include "exbern/qcmap.hpp"
#include "test_util.hpp"

using namespace exbern;

TEST(Holder, ExactValues) {
    EXPECT_EQ(holder_exponent(1.0), 1.0);
    EXPECT_EQ(holder_exponent(1.25), 0.5);
    EXPECT_NEAR(holder_exponent(2.0), 0.2679491924311227, 1e-15);
    expect_error(ErrorCode::domain_error, [] { holder_exponent(0.99); });
    expect_error(ErrorCode::domain_error, [] { holder_exponent(std::nan("")); });
}

TEST(Holder, SatisfiesQuadraticIdentity) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> d(1.0, 100.0);
    for (int k = 0; k < 1000; ++k) {
        const double K = d(rng);
        const double a = holder_exponent(K);
        EXPECT_NEAR(a + 1.0 / a, 2.0 * K, 1e-12 * K);
        EXPECT_GT(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
}

TEST(Holder, DecreasesWithK) {
    double prev = 1.0;
    for (double K = 1.01; K < 50.0; K *= 1.3) {
        const double a = holder_exponent(K);
        EXPECT_LT(a, prev);
        prev = a;
    }
}

TEST(Dilatation, IdentityIsConformal) {
    const auto g = build_grid(1.0, 4.0, 32, 32);
    const auto w = sample_mapping(g, [](Vec2 x) { return x; });
    const auto exact = dilatation_field(w, [](Vec2) { return Jacobian2{1, 0, 0, 1}; });
    EXPECT_EQ(exact.K_min, 1.0);
    EXPECT_EQ(exact.K_min, 1.0);
    EXPECT_EQ(exact.alpha, 1.0);
    EXPECT_FALSE(exact.orientation_failure);
    const auto st = dilatation_field(w);
    EXPECT_NEAR(st.K_min, 1.0, 5e-2);
    EXPECT_FALSE(st.orientation_failure);
}

// Stencil dilatation of the identity approaches 1 at second order.
TEST(Dilatation, StencilJacobianConverges) {
    std::vector<double> h, e;
    for (int n : {32, 64, 128}) {
        const auto g = build_grid(1.0, 4.0, n, n);
        const auto rep = dilatation_field(sample_mapping(g, [](Vec2 x) { return x; }));
        h.push_back(g.h_radial());
        e.push_back(rep.K_min - 1.0);
    }
    EXPECT_GE(exbern::testing::order_of(h, e), 1.8);
}

TEST(Dilatation, AnisotropicStretch) {
    const auto g = build_grid(1.0, 4.0, 32, 32);
    const auto w = sample_mapping(g, [](Vec2 x) { return Vec2{x.x, 2.0 * x.y}; });
    const auto exact = dilatation_field(w, [](Vec2) { return Jacobian2{1, 0, 0, 2}; });
    EXPECT_DOUBLE_EQ(exact.K_min, 1.25);
    EXPECT_DOUBLE_EQ(exact.alpha, 0.5);
    const auto st = dilatation_field(w);
    EXPECT_NEAR(st.K_min, 1.25, 5e-2);
}

// grad(|x|^2/2 + log|x|) is the radial map r + 1/r; at |x| = sqrt 2 the local K is 5/3.
// u lies in the fitted family, so its stencil Hessian is the exact Jacobian of the map.
TEST(Dilatation, RadialMapOracle) {
    const auto g = build_grid(1.0, 2.0, 65, 64);
    const auto i = g.ring_of(std::sqrt(2.0));
    ASSERT_TRUE(i.has_value());
    const auto u = sample(g, [](Vec2 x) { return 0.5 * norm2(x) + std::log(norm(x)); });
    const auto H = hessian(u);
    std::vector<Jacobian2> jac(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) jac[k] = Jacobian2{H.at(k).m11, H.at(k).m12, H.at(k).m12, H.at(k).m22};
    const auto rep = detail::dilatation_from(g, jac);
    for (int j = 0; j < g.n_theta(); ++j) EXPECT_NEAR(rep.K_field[g.index(*i, j)], 5.0 / 3.0, 1e-8);
    const auto st = dilatation_field(gradient(u));
    for (int j = 0; j < g.n_theta(); ++j) EXPECT_NEAR(st.K_field[g.index(*i, j)], 5.0 / 3.0, 1e-2);
}

TEST(Dilatation, InvariantUnderRotationAndScaling) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    for (int t = 0; t < 200; ++t) {
        Jacobian2 m{d(rng), d(rng), d(rng), d(rng)};
        if (m.det() <= 0.0) std::swap(m.p1, m.p2);
        if (m.det() <= 0.0) continue;
        const double K = dilatation(m);
        const double phi = d(rng), s = 0.1 + std::abs(d(rng));
        const double c = std::cos(phi), sn = std::sin(phi);
        // rotate the target, rotate the source, scale
        const Jacobian2 rt{c * m.p1 - sn * m.q1, c * m.p2 - sn * m.q2, sn * m.p1 + c * m.q1, sn * m.p2 + c * m.q2};
        const Jacobian2 rs{m.p1 * c + m.p2 * sn, -m.p1 * sn + m.p2 * c, m.q1 * c + m.q2 * sn, -m.q1 * sn + m.q2 * c};
        const Jacobian2 sc{s * m.p1, s * m.p2, s * m.q1, s * m.q2};
        EXPECT_NEAR(dilatation(rt), K, 1e-12 * K);
        EXPECT_NEAR(dilatation(rs), K, 1e-12 * K);
        EXPECT_NEAR(dilatation(sc), K, 1e-12 * K);
        EXPECT_GE(K, 1.0 - 1e-15);
    }
}

TEST(Dilatation, FlagsOrientationFailure) {
    const auto g = build_grid(1.0, 4.0, 16, 16);
    const auto rep = dilatation_field(sample_mapping(g, [](Vec2 x) { return Vec2{x.x, -x.y}; }));
    EXPECT_TRUE(rep.orientation_failure);
    EXPECT_EQ(rep.failed_nodes, static_cast<std::size_t>(14 * 16));
    EXPECT_TRUE(std::isnan(rep.K_field[g.index(3, 3)]));
    EXPECT_LT(rep.jacobian_min, 0.0);
}

TEST(KelvinConjugate, ConstantAndInversion) {
    const auto g = build_grid(1.0, 8.0, 20, 16);
    const auto c = kelvin_conjugate(sample_mapping(g, [](Vec2) { return Vec2{1.0, 0.0}; }));
    EXPECT_NEAR(c.grid().r_inner(), 1.0 / 8.0, 1e-15);
    EXPECT_NEAR(c.grid().r_outer(), 1.0, 1e-15);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_EQ(c.p()[k], 0.0);
        EXPECT_EQ(c.q()[k], 1.0);
    }
    const auto inv = kelvin_conjugate(sample_mapping(g, [](Vec2 x) { return kelvin_point(x); }));
    const auto& ig = inv.grid();
    for (int i = 0; i < ig.n_r(); ++i)
        for (int j = 0; j < ig.n_theta(); ++j) {
            const Vec2 y = ig.point(i, j);
            EXPECT_NEAR(inv(i, j).x, y.y, 1e-14);
            EXPECT_NEAR(inv(i, j).y, y.x, 1e-14);
        }
}

TEST(KelvinConjugate, IsAnInvolution) {
    const auto g = build_grid(1.0, 8.0, 20, 16);
    const auto w = sample_mapping(g, [](Vec2 x) { return Vec2{std::sin(x.x) + x.y, x.x * x.y}; });
    const auto ww = kelvin_conjugate(kelvin_conjugate(w));
    ASSERT_TRUE(ww.grid().same_layout(g));
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_NEAR(ww.p()[k], w.p()[k], 1e-15);
        EXPECT_NEAR(ww.q()[k], w.q()[k], 1e-15);
    }
}

TEST(KelvinConjugate, NeedsLogGrid) {
    const auto g = build_grid(1.0, 8.0, 20, 16, Spacing::uniform_radial);
    expect_error(ErrorCode::unsupported_grid, [&] { kelvin_conjugate(PlanarMapping(g, std::vector<double>(g.size()), std::vector<double>(g.size()))); });
}

TEST(KelvinIdentities, ExactDerivatives) {
    const auto g = build_grid(1.0, 4.0, 32, 32);
    const auto id = verify_kelvin_identities(sample_mapping(g, [](Vec2 x) { return x; }),
                                             [](Vec2) { return Jacobian2{1, 0, 0, 1}; });
    EXPECT_LE(id.energy, 1e-12);
    EXPECT_LE(id.jacobian, 1e-12);
    const auto z2 = verify_kelvin_identities(
        sample_mapping(g, [](Vec2 x) { return Vec2{x.x * x.x - x.y * x.y, 2 * x.x * x.y}; }),
        [](Vec2 x) { return Jacobian2{2 * x.x, -2 * x.y, 2 * x.y, 2 * x.x}; });
    EXPECT_LE(z2.energy, 1e-10);
    EXPECT_LE(z2.jacobian, 1e-10);
}

TEST(KelvinIdentities, StencilResidualsConverge) {
    std::vector<double> h, e;
    for (int n : {32, 64, 128}) {
        const auto g = build_grid(1.0, 4.0, n, n);
        const auto r = verify_kelvin_identities(
            sample_mapping(g, [](Vec2 x) { return Vec2{x.x * x.x - x.y * x.y, 2 * x.x * x.y}; }));
        h.push_back(g.h_radial());
        e.push_back(std::max(r.energy, r.jacobian));
    }
    EXPECT_GE(exbern::testing::order_of(h, e), 1.8);
}

TEST(LimitAndDecay, ConstantIsDegenerate) {
    const auto g = build_grid(1.0, 64.0, 64, 32);
    const auto fit = limit_and_decay(sample_mapping(g, [](Vec2) { return Vec2{3.0, -1.0}; }), {4, 8, 16, 32});
    EXPECT_TRUE(fit.degenerate);
    EXPECT_TRUE(std::isinf(fit.exponent));
    ASSERT_EQ(fit.limit.size(), 2u);
    EXPECT_NEAR(fit.limit[0], 3.0, 1e-14);
    EXPECT_NEAR(fit.limit[1], -1.0, 1e-14);
}

TEST(LimitAndDecay, SyntheticPowerLaw) {
    const auto g = build_grid(1.0, 1024.0, 161, 32);
    const auto fit = limit_and_decay(sample_mapping(g, [](Vec2 x) { return std::pow(norm(x), -1.5) * x; }),
                                     {8, 16, 32, 64, 128, 256});
    EXPECT_NEAR(fit.exponent, 0.5, 0.025);
}

TEST(LimitAndDecay, RadialMongeAmpereGradient) {
    const auto g = build_grid(1.0, 1024.0, 161, 32);
    const auto w = sample_mapping(g, [](Vec2 x) { return radial_ma_gradient(2.0, x) - x; });
    const auto fit = limit_and_decay(w, {8, 16, 32, 64, 128, 256});
    EXPECT_NEAR(fit.exponent, 1.0, 0.05);
}

TEST(LimitAndDecay, Preconditions) {
    const auto g = build_grid(1.0, 64.0, 64, 32);
    const auto w = sample_mapping(g, [](Vec2 x) { return x; });
    expect_error(ErrorCode::insufficient_window, [&] { limit_and_decay(w, {4, 8, 16}); });
    expect_error(ErrorCode::window_outside_grid, [&] { limit_and_decay(w, {4, 8, 16, 128}); });
}
