#include <gtest/gtest.h>

#include <cmath>

#include "exbern/nonlinear.hpp"
#include "test_util.hpp"

using namespace exbern;
using exbern::testing::order_of;

namespace {

ScalarField half_square(const AnnularGrid& g) {
    return sample(g, [](Vec2 x) { return 0.5 * norm2(x); });
}

double sup_error(const ScalarField& u, double a) {
    const auto& g = u.grid();
    double err = 0.0;
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j)
            err = std::max(err, std::abs(u(i, j) - radial_ma_reference(a, norm(g.point(i, j))).u));
    return err;
}

NewtonResult radial_solve(const FullyNonlinearSpec& spec, const AnnularGrid& g, double a, NewtonOptions opt = {}) {
    const auto ref = [a](Vec2 x) { return radial_ma_reference(a, norm(x)).u; };
    return newton_solve(spec, g, ring_values(g, 0, ref), ring_values(g, g.n_r() - 1, ref), half_square(g), opt);
}

}  // namespace

TEST(RadialReference, ZeroParameterIsHalfSquare) {
    for (double r : {1.0, 2.5, 40.0}) {
        const auto p = radial_ma_reference(0.0, r);
        EXPECT_DOUBLE_EQ(p.u, 0.5 * r * r);
        EXPECT_DOUBLE_EQ(p.du, r);
        EXPECT_DOUBLE_EQ(p.d2u, 1.0);
    }
}

TEST(RadialReference, SolvesMongeAmpere) {
    for (double a : {0.5, 1.0, 2.0})
        for (const Vec2 x : {Vec2{1.0, 0.0}, Vec2{2.0, -3.0}, Vec2{-30.0, 11.0}}) {
            EXPECT_NEAR(radial_ma_hessian(a, x).det(), 1.0, 1e-13);
            const double r = norm(x), h = 1e-5;
            const double fd = (radial_ma_reference(a, r + h).u - radial_ma_reference(a, r - h).u) / (2 * h);
            EXPECT_NEAR(fd, radial_ma_reference(a, r).du, 1e-8 * r);
        }
}

// u - r^2/2 - log r -> 1/2 + log 2 for a = 2
TEST(RadialReference, ConstantTermAsymptotics) {
    const double r = 1e4;
    const double u = radial_ma_reference(2.0, r).u;
    EXPECT_NEAR(u - 0.5 * r * r - std::log(r), 0.5 + std::log(2.0), 1e-7);
    expect_error(ErrorCode::domain_error, [] { radial_ma_reference(-1.0, 2.0); });
}

TEST(Specs, SpecialLagrangianMatchesMongeAmpereOnConvexBranch) {
    const auto sl = special_lagrangian_spec(pi / 2);
    const auto ma = monge_ampere_spec();
    for (const Sym2 m : {from_eigen(2.0, 0.5, 0.3), from_eigen(1.0, 1.0, 0.0), from_eigen(4.0, 0.25, -1.0)}) {
        EXPECT_NEAR(ma.evaluate(m), 0.0, 1e-15);
        EXPECT_NEAR(sl.evaluate(m), 0.0, 1e-15);
    }
    expect_error(ErrorCode::domain_error, [] { special_lagrangian_spec(4.0); });
}

TEST(Specs, DerivativesMatchFiniteDifferences) {
    const Sym2 m = from_eigen(1.7, 0.6, 0.4);
    for (const auto& spec : {monge_ampere_spec(), special_lagrangian_spec(1.0), linear_trace_spec(2.0)}) {
        const Sym2 d = spec.derivative(m);
        const double h = 1e-6;
        const Sym2 e11{1, 0, 0}, e12{0, 1, 0}, e22{0, 0, 1};
        EXPECT_NEAR((spec.evaluate(m + h * e11) - spec.evaluate(m - h * e11)) / (2 * h), d.m11, 1e-8) << spec.name;
        EXPECT_NEAR((spec.evaluate(m + h * e12) - spec.evaluate(m - h * e12)) / (2 * h), 2.0 * d.m12, 1e-8) << spec.name;
        EXPECT_NEAR((spec.evaluate(m + h * e22) - spec.evaluate(m - h * e22)) / (2 * h), d.m22, 1e-8) << spec.name;
    }
}

TEST(Specs, SpecialLagrangianDerivativeThroughCoalescence) {
    const auto sl = special_lagrangian_spec(1.0);
    const Sym2 a = sl.derivative(from_eigen(1.0, 1.0 + 1e-10, 0.2));
    const Sym2 b = sl.derivative(from_eigen(1.0, 1.0 + 1e-6, 0.2));
    EXPECT_NEAR(a.m11, 0.5, 1e-9);
    EXPECT_NEAR(a.m22, 0.5, 1e-9);
    EXPECT_NEAR((a - b).norm(), 0.0, 1e-6);
}

TEST(Newton, AffineOperatorTakesOneStep) {
    const auto g = build_grid(1.0, 4.0, 24, 24);
    const auto ref = [](Vec2 x) { return 0.5 * norm2(x); };
    const auto res = newton_solve(linear_trace_spec(2.0), g, ring_values(g, 0, ref), ring_values(g, g.n_r() - 1, ref),
                                  ScalarField(g));
    EXPECT_TRUE(res.converged());
    EXPECT_EQ(res.iterations, 1);
    ASSERT_EQ(res.trace.size(), 1u);
    EXPECT_TRUE(res.trace[0].boundary_lift);
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j) EXPECT_NEAR(res.u(i, j), ref(g.point(i, j)), 1e-10);
}

TEST(Newton, MongeAmpereRadialConvergence) {
    std::vector<double> h, e;
    for (int n : {32, 64, 128}) {
        const auto g = build_grid(1.0, 16.0, n, n / 2);
        const auto res = radial_solve(monge_ampere_spec(), g, 1.0);
        ASSERT_TRUE(res.converged()) << to_string(res.status);
        EXPECT_LT(res.residual, 1e-10);
        EXPECT_LE(res.iterations, 12);
        EXPECT_NEAR(equation_residual(monge_ampere_spec(), res.u), res.residual, 1e-15);
        h.push_back(g.h_radial());
        e.push_back(sup_error(res.u, 1.0));
    }
    EXPECT_GE(order_of(h, e), 1.8);
}

TEST(Newton, ResidualDecreasesAlongTrace) {
    const auto g = build_grid(1.0, 16.0, 64, 32);
    const auto res = radial_solve(monge_ampere_spec(), g, 2.0);
    ASSERT_TRUE(res.converged());
    for (std::size_t k = 2; k < res.trace.size(); ++k) EXPECT_LE(res.trace[k].residual, res.trace[k - 1].residual);
    for (const auto& s : res.trace) EXPECT_GT(s.min_eigenvalue, 0.0);
}

TEST(Newton, SpecialLagrangianAgreesWithMongeAmpere) {
    const auto g = build_grid(1.0, 16.0, 64, 32);
    const auto ma = radial_solve(monge_ampere_spec(), g, 1.0);
    const auto sl = radial_solve(special_lagrangian_spec(pi / 2), g, 1.0);
    ASSERT_TRUE(ma.converged());
    ASSERT_TRUE(sl.converged());
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(sl.u.values()[k], ma.u.values()[k], 1e-8);
}

TEST(Newton, ReportsMaxIterations) {
    const auto g = build_grid(1.0, 16.0, 32, 16);
    NewtonOptions opt;
    opt.max_iters = 1;
    const auto res = radial_solve(monge_ampere_spec(), g, 2.0, opt);
    EXPECT_EQ(res.status, NewtonStatus::max_iters_exceeded);
    EXPECT_EQ(res.iterations, 1);
    EXPECT_FALSE(res.trace.empty());
}

TEST(Newton, ReportsEllipticityLoss) {
    const auto g = build_grid(1.0, 4.0, 16, 16);
    const auto ref = [](Vec2 x) { return 0.5 * norm2(x); };
    const auto concave = sample(g, [](Vec2 x) { return -0.5 * norm2(x); });
    const auto res =
        newton_solve(monge_ampere_spec(), g, ring_values(g, 0, ref), ring_values(g, g.n_r() - 1, ref), concave);
    EXPECT_EQ(res.status, NewtonStatus::ellipticity_lost);
    EXPECT_FALSE(res.trace.empty());
    EXPECT_EQ(to_string(res.status), "ellipticity-lost");
}

TEST(Newton, RejectsMismatchedGrids) {
    const auto g = build_grid(1.0, 4.0, 16, 16);
    const std::vector<double> b(16, 0.0);
    expect_error(ErrorCode::grid_mismatch,
                 [&] { newton_solve(monge_ampere_spec(), g, b, b, half_square(build_grid(1.0, 4.0, 16, 32))); });
}
