// Print the bootstrap schedule (n, epsilon, delta) for a few Hoelder exponents.

#include <cmath>
#include <cstdio>

#include "exbern/exbern.hpp"

using namespace exbern;

int main() {
    std::printf("%10s %4s %12s %12s\n", "alpha", "n", "epsilon", "delta");
    for (double K : {1.05, 1.25, 2.0, 4.0, 10.0}) {
        const double alpha = holder_exponent(K);
        const auto s = bootstrap_schedule(alpha);
        std::printf("%10.6f %4d %12.8f %12.8f\n", alpha, s.n, s.epsilon, s.delta);
    }
    const auto lit = literal_bootstrap_schedule(2.0 - std::sqrt(3.0), 0.02);
    std::printf("fixed epsilon 0.02 at alpha = 2 - sqrt 3: n = %d, delta = %.6f (%s)\n", lit.n, lit.delta,
                valid_schedule(lit) ? "valid" : "invalid");
}
