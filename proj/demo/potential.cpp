// Log potential of f = |y|^-4 on an annulus, compared with its closed form.

#include <cmath>
#include <cstdio>
#include <vector>

#include "exbern/exbern.hpp"

using namespace exbern;

int main() {
    const std::vector<Vec2> targets{{1.0, 0.0}, {1.5, 0.2}, {3.0, -2.0}, {-6.0, 4.5}};
    std::printf("%6s %12s %12s\n", "n", "max error", "log mass");
    for (int n : {16, 32, 64}) {
        const auto g = build_grid(1.0, 8.0, n, n);
        const auto f = sample(g, [](Vec2 y) { return 1.0 / (norm2(y) * norm2(y)); });
        const auto pot = newtonian_potential(f, targets);
        double err = 0.0;
        for (std::size_t k = 0; k < targets.size(); ++k) {
            const double r = norm(targets[k]);
            err = std::max(err, std::abs(pot.values[k] - (0.5 * std::log(r) + 0.25 / (r * r) - 0.25)));
        }
        std::printf("%6d %12.3e %12.8f\n", n, err, pot.log_mass);
    }
    std::printf("exact log mass %.8f\n", 0.5 * (1.0 - 1.0 / 64.0));
}
