// Solve det D^2 u = 1 outside the unit disk with radial boundary data and
// read off the asymptotic expansion of the solution.

#include <cmath>
#include <cstdio>

#include "exbern/exbern.hpp"

using namespace exbern;

int main(int argc, char** argv) {
    const double a = argc > 1 ? std::atof(argv[1]) : 2.0;
    const auto g = build_grid(1.0, 64.0, 256, 128);
    auto exact = [a](Vec2 x) { return radial_ma_reference(a, norm(x)).u; };

    const auto res = newton_solve(monge_ampere_spec(), g, ring_values(g, 0, exact), ring_values(g, g.n_r() - 1, exact),
                                  sample(g, [](Vec2 x) { return 0.5 * norm2(x); }));
    std::printf("newton: %s after %d solves, residual %.2e\n", to_string(res.status).c_str(), res.iterations,
                res.residual);
    for (const auto& s : res.trace) std::printf("  step %.4f  residual %.3e\n", s.step, s.residual);

    const std::vector<Window> windows{{8, 16}, {16, 32}, {32, 64}};
    const auto ex = fit_expansion(res.u, windows);
    std::printf("A = [%.6f %.6f; %.6f %.6f]\n", ex.A.m11, ex.A.m12, ex.A.m12, ex.A.m22);
    std::printf("d = %.6f   (radial value %.6f)\n", ex.d, a / 2.0);
    std::printf("c = %.6f   (radial value %.6f)\n", ex.c, a / 4.0 + 0.5 * a * std::log(2.0));
    std::printf("remainder decays like r^-%.2f\n", ex.residual_fit.exponent);

    const auto K = dilatation_field(gradient(res.u));
    std::printf("gradient map is K-quasiconformal with K = %.4f, Hoelder exponent %.4f\n", K.K_min, K.alpha);
}
