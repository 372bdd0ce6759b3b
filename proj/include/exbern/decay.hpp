#pragma once

// Power-law decay fits |w(x) - w_inf| ~ C |x|^{-p} by log-log least squares.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "exbern/error.hpp"

namespace exbern {

struct DecayWindow {
    double radius;
    double deviation;
};

struct DecayFit {
    double exponent = 0.0;  // +inf when the deviations vanish
    double log_constant = 0.0;
    std::vector<double> limit;  // scalar, vector or matrix entries, as produced
    std::vector<DecayWindow> windows;
    double r_squared = 0.0;
    bool degenerate = false;
};

/// Least squares fit of log(deviation) = log C - p log(radius).
/// Deviations below `floor` are treated as exact zeros; if fewer than two
/// usable windows remain the fit is degenerate (exponent = +inf).
inline DecayFit fit_power_law(std::vector<DecayWindow> windows, std::vector<double> limit, double floor) {
    if (windows.size() < 2) fail(ErrorCode::insufficient_window, "power-law fit needs at least two windows");
    for (std::size_t k = 1; k < windows.size(); ++k)
        if (!(windows[k].radius > windows[k - 1].radius))
            fail(ErrorCode::insufficient_window, "decay windows must be strictly increasing in radius");

    DecayFit fit;
    fit.limit = std::move(limit);
    fit.windows = std::move(windows);

    std::vector<double> xs, ys;
    for (const auto& w : fit.windows) {
        if (w.deviation > floor) {
            xs.push_back(std::log(w.radius));
            ys.push_back(std::log(w.deviation));
        }
    }
    if (xs.size() < 2) {
        fit.degenerate = true;
        fit.exponent = std::numeric_limits<double>::infinity();
        fit.log_constant = -std::numeric_limits<double>::infinity();
        fit.r_squared = 1.0;
        return fit;
    }
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        mx += xs[k];
        my += ys[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ys[k] - my);
        syy += (ys[k] - my) * (ys[k] - my);
    }
    const double slope = sxy / sxx;
    fit.exponent = -slope;
    fit.log_constant = my - slope * mx;
    fit.r_squared = syy > 0.0 ? std::min(1.0, (sxy * sxy) / (sxx * syy)) : 1.0;
    return fit;
}

/// Aitken delta-squared extrapolation of a convergent sequence of vector
/// estimates m0, m1, m2 sampled at geometrically spaced radii. Returns nothing
/// unless the differences shrink by a common factor in (0, 1).
inline std::optional<std::vector<double>> aitken_limit(const std::vector<double>& m0, const std::vector<double>& m1,
                                                       const std::vector<double>& m2, double noise) {
    const std::size_t n = m0.size();
    double d11 = 0.0, d21 = 0.0, d22 = 0.0;
    std::vector<double> d1(n), d2(n);
    for (std::size_t k = 0; k < n; ++k) {
        d1[k] = m1[k] - m0[k];
        d2[k] = m2[k] - m1[k];
        d11 += d1[k] * d1[k];
        d21 += d2[k] * d1[k];
        d22 += d2[k] * d2[k];
    }
    if (std::sqrt(d11) <= noise || std::sqrt(d22) <= noise) return std::nullopt;
    const double rho = d21 / d11;
    if (!(rho > 0.0 && rho < 0.95)) return std::nullopt;
    // the second difference must be (nearly) parallel to the first
    double off = 0.0;
    for (std::size_t k = 0; k < n; ++k) off += (d2[k] - rho * d1[k]) * (d2[k] - rho * d1[k]);
    if (std::sqrt(off) > 1e-2 * std::sqrt(d22)) return std::nullopt;
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = m2[k] + rho / (1.0 - rho) * d2[k];
    return out;
}

}  // namespace exbern
