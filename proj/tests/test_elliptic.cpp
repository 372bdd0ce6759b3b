#include <gtest/gtest.h>

#include <cmath>

#include "exbern/elliptic.hpp"
#include "exbern/nonlinear.hpp"
#include "test_util.hpp"

using namespace exbern;
using exbern::testing::order_of;

TEST(Ellipticity, Constants) {
    const auto g = build_grid(1.0, 2.0, 8, 16);
    const auto id = ellipticity_constants(constant_coefficients(g, Sym2::identity()).a);
    EXPECT_DOUBLE_EQ(id.lambda, 1.0);
    EXPECT_DOUBLE_EQ(id.Lambda, 1.0);
    EXPECT_DOUBLE_EQ(id.gamma, 1.0);
    const auto d = constant_coefficients(g, Sym2::diag(1.0, 3.0));
    EXPECT_DOUBLE_EQ(d.lambda, 1.0);
    EXPECT_DOUBLE_EQ(d.Lambda, 3.0);
    EXPECT_DOUBLE_EQ(d.gamma, 3.0);
    expect_error(ErrorCode::not_elliptic, [&] { constant_coefficients(g, Sym2::diag(1.0, -0.5)); });
    expect_error(ErrorCode::not_elliptic, [&] { constant_coefficients(g, Sym2::diag(0.0, 1.0)); });
}

// Cofactor of the radial Monge-Ampere Hessian with a = 1 at r = 1:
// u'(1) = sqrt 2, u''(1) = 1/sqrt 2, so the eigenvalues are {1/sqrt 2, sqrt 2}.
TEST(Ellipticity, MongeAmpereCofactorAtUnitRadius) {
    const Sym2 cof = radial_ma_hessian(1.0, {1.0, 0.0}).cofactor();
    const Sym2 arr[] = {cof};
    const auto c = ellipticity_constants(std::span<const Sym2>(arr));
    EXPECT_NEAR(c.lambda, 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(c.Lambda, std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(c.gamma, 2.0, 1e-14);
}

namespace {

double solve_error(const AnnularGrid& g, Sym2 a, double f, const std::function<double(Vec2)>& exact) {
    const auto u = solve_linear_dirichlet(constant_coefficients(g, a), sample(g, [f](Vec2) { return f; }),
                                          ring_values(g, 0, exact), ring_values(g, g.n_r() - 1, exact));
    double err = 0.0;
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j) err = std::max(err, std::abs(u(i, j) - exact(g.point(i, j))));
    return err;
}

}  // namespace

TEST(LinearSolve, RadialQuadraticIsExact) {
    const auto g = build_grid(1.0, 4.0, 32, 32);
    EXPECT_LT(solve_error(g, Sym2::identity(), 4.0, [](Vec2 x) { return norm2(x); }), 1e-10);
}

TEST(LinearSolve, LogIsExactWithFittedStencils) {
    const auto g = build_grid(1.0, 64.0, 64, 32);
    EXPECT_LT(solve_error(g, Sym2::identity(), 0.0, [](Vec2 x) { return std::log(norm(x)); }), 1e-10);
}

// Standard stencils also reproduce log r on a log grid; the dipole carries the error.
TEST(LinearSolve, StandardStencilsConverge) {
    std::vector<double> h, e;
    for (int n : {32, 64, 128}) {
        const auto g = build_grid(1.0, 4.0, n, n, Spacing::log_radial, Scheme::standard);
        h.push_back(g.h_radial());
        e.push_back(solve_error(g, Sym2::identity(), 0.0, [](Vec2 x) { return std::log(norm(x)) + x.y / norm2(x); }));
    }
    EXPECT_GE(order_of(h, e), 1.8);
}

// 1 * u_11 + 3 * u_22 = 0 for u = x1^2 - x2^2 / 3
TEST(LinearSolve, AnisotropicManufacturedSolution) {
    auto exact = [](Vec2 x) { return x.x * x.x - x.y * x.y / 3.0; };
    EXPECT_LT(solve_error(build_grid(1.0, 4.0, 32, 32), Sym2::diag(1.0, 3.0), 0.0, exact), 1e-10);
    std::vector<double> h, e;
    for (int n : {32, 64, 128}) {
        const auto g = build_grid(1.0, 4.0, n, n, Spacing::log_radial, Scheme::standard);
        h.push_back(g.h_radial());
        e.push_back(solve_error(g, Sym2::diag(1.0, 3.0), 0.0, exact));
    }
    EXPECT_LT(e.back(), 1e-2);
    EXPECT_GE(order_of(h, e), 1.8);
}

TEST(LinearSolve, UniformGrid) {
    std::vector<double> h, e;
    for (int n : {32, 64, 128}) {
        const auto g = build_grid(1.0, 3.0, n, n, Spacing::uniform_radial);
        h.push_back(g.h_radial());
        e.push_back(solve_error(g, Sym2::identity(), 0.0, [](Vec2 x) { return x.x / norm2(x) + std::log(norm(x)); }));
    }
    EXPECT_GE(order_of(h, e), 1.8);
}

TEST(LinearSolve, IsLinear) {
    const auto g = build_grid(1.0, 4.0, 24, 24);
    const auto a = linear_coefficients(g, [](Vec2 x) { return from_eigen(1.0, 2.0, 0.3 * x.x); });
    const auto f1 = sample(g, [](Vec2 x) { return std::sin(x.x); });
    const auto f2 = sample(g, [](Vec2 x) { return x.y * x.y; });
    const auto g1 = ring_values(g, 0, [](Vec2 x) { return x.x; });
    const auto h1 = ring_values(g, g.n_r() - 1, [](Vec2 x) { return x.x * x.y; });
    const auto g2 = ring_values(g, 0, [](Vec2 x) { return 1.0 + x.y; });
    const auto h2 = ring_values(g, g.n_r() - 1, [](Vec2 x) { return std::cos(x.y); });
    std::vector<double> fs(g.size()), gs(g1.size()), hs(h1.size());
    for (std::size_t k = 0; k < fs.size(); ++k) fs[k] = 2.0 * f1.values()[k] - f2.values()[k];
    for (std::size_t k = 0; k < gs.size(); ++k) {
        gs[k] = 2.0 * g1[k] - g2[k];
        hs[k] = 2.0 * h1[k] - h2[k];
    }
    const auto u1 = solve_linear_dirichlet(a, f1, g1, h1);
    const auto u2 = solve_linear_dirichlet(a, f2, g2, h2);
    const auto us = solve_linear_dirichlet(a, ScalarField(g, fs), gs, hs);
    for (std::size_t k = 0; k < g.size(); ++k)
        EXPECT_NEAR(us.values()[k], 2.0 * u1.values()[k] - u2.values()[k], 1e-11);
}

TEST(LinearSolve, MaximumPrinciple) {
    const auto g = build_grid(1.0, 8.0, 32, 32);
    const auto gi = ring_values(g, 0, [](Vec2 x) { return std::sin(3.0 * std::atan2(x.y, x.x)); });
    const auto go = ring_values(g, g.n_r() - 1, [](Vec2 x) { return 0.5 * std::cos(std::atan2(x.y, x.x)); });
    const auto u = solve_linear_dirichlet(constant_coefficients(g, Sym2::identity()), ScalarField(g), gi, go);
    double lo = 1e300, hi = -1e300;
    for (double v : gi) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : go) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : u.values()) {
        EXPECT_LE(v, hi + 1e-12);
        EXPECT_GE(v, lo - 1e-12);
    }
}

TEST(LinearSolve, RejectsMismatchedInput) {
    const auto g = build_grid(1.0, 4.0, 16, 16);
    const auto h = build_grid(1.0, 4.0, 16, 32);
    const std::vector<double> b(16, 0.0);
    expect_error(ErrorCode::grid_mismatch,
                 [&] { solve_linear_dirichlet(constant_coefficients(g, Sym2::identity()), ScalarField(h), b, b); });
    expect_error(ErrorCode::invalid_dimension, [&] {
        solve_linear_dirichlet(constant_coefficients(g, Sym2::identity()), ScalarField(g), std::vector<double>(3), b);
    });
}

TEST(Potential, ZeroDensity) {
    const auto g = build_grid(1.0, 4.0, 8, 16);
    const std::vector<Vec2> t{{2.0, 0.0}, {0.0, 3.0}};
    const auto r = newtonian_potential(ScalarField(g), t);
    EXPECT_EQ(r.values, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(r.log_mass, 0.0);
}

// f = |y|^-4 on 1 <= |y| <= 8: u(r) = log(r)/2 + 1/(4 r^2) - 1/4 for r <= 8.
TEST(Potential, RadialOracleConverges) {
    const std::vector<Vec2> t{{1.0, 0.0}, {1.5, 0.2}, {2.0, -1.0}, {4.0, 3.0}, {-5.5, 2.5}, {7.9, 0.0}};
    std::vector<double> h, e;
    for (int n : {16, 32, 64}) {
        const auto g = build_grid(1.0, 8.0, n, n);
        const auto f = sample(g, [](Vec2 y) { return 1.0 / (norm2(y) * norm2(y)); });
        const auto r = newtonian_potential(f, t);
        double err = 0.0;
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double rr = norm(t[k]);
            err = std::max(err, std::abs(r.values[k] - (0.5 * std::log(rr) + 0.25 / (rr * rr) - 0.25)));
        }
        h.push_back(g.h_radial());
        e.push_back(err);
        EXPECT_NEAR(r.log_mass, 0.5 * (1.0 - 1.0 / 64.0), 5.0 * g.h_radial() * g.h_radial());
    }
    EXPECT_LT(e.back(), 2e-3);
    EXPECT_GE(order_of(h, e), 1.8);
}

TEST(Potential, TargetsAtNodesEdgesAndOutside) {
    const auto g = build_grid(1.0, 4.0, 24, 24);
    const auto f = sample(g, [](Vec2 y) { return 1.0 + 0.1 * y.x; });
    const double mid = 0.5 * (g.radius(5) + g.radius(6));
    const std::vector<Vec2> t{g.point(5, 3), {mid, 0.0}, {0.3, 0.1}, {10.0, -3.0}};
    const auto r = newtonian_potential(f, t);
    for (double v : r.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(Potential, DiscreteLaplacianMatchesDensity) {
    std::vector<double> h, e;
    for (int n : {24, 48}) {
        const auto g = build_grid(1.0, 8.0, n, n);
        const auto f = sample(g, [](Vec2 y) { return 1.0 / (norm2(y) * norm2(y)); });
        const auto lap = laplacian(newtonian_potential_field(f));
        double err = 0.0;
        for (int i = 1; i + 1 < n; ++i) {
            if (g.radius(i) < 1.5) continue;
            for (int j = 0; j < n; ++j) err = std::max(err, std::abs(lap(i, j) - f(i, j)));
        }
        h.push_back(g.h_radial());
        e.push_back(err);
    }
    EXPECT_GE(order_of(h, e), 1.8);
}

TEST(Growth, FitOfPowerLaw) {
    const std::vector<double> r{2, 4, 8, 16}, v{3 * std::pow(2, 0.4), 3 * std::pow(4, 0.4), 3 * std::pow(8, 0.4),
                                                 3 * std::pow(16, 0.4)};
    const auto fit = fit_growth(r, v);
    EXPECT_NEAR(fit.exponent, 0.4, 1e-12);
    expect_error(ErrorCode::insufficient_window, [] { fit_growth(std::vector<double>{1.0}, std::vector<double>{1.0}); });
}
