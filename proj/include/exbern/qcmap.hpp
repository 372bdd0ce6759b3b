#pragma once

// Quasiconformal analysis of planar mappings sampled on annular grids:
// dilatation, the Hoelder exponent K - sqrt(K^2 - 1), Kelvin conjugation and
// limit-at-infinity fits.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "exbern/decay.hpp"
#include "exbern/error.hpp"
#include "exbern/grid.hpp"
#include "exbern/types.hpp"

namespace exbern {

/// Exact Jacobian of a mapping at a point.
using DerivativeProvider = std::function<Jacobian2(Vec2)>;

struct DilatationReport {
    double K_min = 1.0;
    std::vector<double> K_field;  // NaN where the Jacobian is not positive
    double jacobian_min = 0.0;
    double alpha = 1.0;
    bool orientation_failure = false;
    std::size_t failed_nodes = 0;
};

/// Hoelder exponent of a K-quasiconformal mapping, K - sqrt(K^2 - 1).
inline double holder_exponent(double K) {
    if (!(K >= 1.0) || !std::isfinite(K)) fail(ErrorCode::domain_error, "holder_exponent needs K >= 1");
    // 1 / (K + sqrt(K^2 - 1)) avoids cancellation for large K
    return 1.0 / (K + std::sqrt((K - 1.0) * (K + 1.0)));
}

/// Pointwise dilatation (|grad p|^2 + |grad q|^2) / (2 J), NaN when J <= 0.
inline double dilatation(const Jacobian2& d) {
    const double J = d.det();
    if (!(J > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return d.frobenius2() / (2.0 * J);
}

/// Stencil Jacobian of w at every node.
inline std::vector<Jacobian2> jacobian_field(const PlanarMapping& w) {
    const auto gp = gradient(w.p_field());
    const auto gq = gradient(w.q_field());
    std::vector<Jacobian2> out(w.grid().size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = {gp.p()[k], gp.q()[k], gq.p()[k], gq.q()[k]};
    return out;
}

namespace detail {
inline DilatationReport dilatation_from(const AnnularGrid& g, const std::vector<Jacobian2>& jac) {
    DilatationReport rep;
    rep.K_field.assign(g.size(), std::numeric_limits<double>::quiet_NaN());
    rep.jacobian_min = std::numeric_limits<double>::infinity();
    double kmax = 1.0;
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j) {
            const auto k = g.index(i, j);
            const double J = jac[k].det();
            rep.jacobian_min = std::min(rep.jacobian_min, J);
            const double K = dilatation(jac[k]);
            rep.K_field[k] = K;
            // boundary rings carry one-sided stencils; the supremum is taken inside
            if (g.is_boundary_ring(i)) continue;
            if (std::isnan(K)) {
                rep.orientation_failure = true;
                ++rep.failed_nodes;
            } else {
                kmax = std::max(kmax, K);
            }
        }
    rep.K_min = kmax;
    rep.alpha = holder_exponent(kmax);
    return rep;
}
}  // namespace detail

/// Dilatation of w. Without a provider the Jacobian comes from grid stencils.
inline DilatationReport dilatation_field(const PlanarMapping& w, const DerivativeProvider& exact = nullptr) {
    const auto& g = w.grid();
    if (!exact) return detail::dilatation_from(g, jacobian_field(w));
    std::vector<Jacobian2> jac(g.size());
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j) jac[g.index(i, j)] = exact(g.point(i, j));
    return detail::dilatation_from(g, jac);
}

/// Grid of the Kelvin image {1/r_outer <= |x| <= 1/r_inner}. Image ring k is
/// the inversion of source ring n_r - 1 - k.
inline AnnularGrid kelvin_image_grid(const AnnularGrid& g) {
    if (g.spacing() != Spacing::log_radial)
        fail(ErrorCode::unsupported_grid, "Kelvin conjugation needs a log-radial grid so that nodes map to nodes");
    return AnnularGrid(1.0 / g.r_outer(), 1.0 / g.r_inner(), g.n_r(), g.n_theta(), g.spacing(), g.scheme());
}

/// w~ = (q~, p~) with p~(x) = p(x / |x|^2), sampled on the image grid.
inline PlanarMapping kelvin_conjugate(const PlanarMapping& w) {
    const auto& g = w.grid();
    AnnularGrid img = kelvin_image_grid(g);
    std::vector<double> p(g.size()), q(g.size());
    for (int k = 0; k < g.n_r(); ++k)
        for (int j = 0; j < g.n_theta(); ++j) {
            const Vec2 v = w(g.n_r() - 1 - k, j);
            p[img.index(k, j)] = v.y;
            q[img.index(k, j)] = v.x;
        }
    return PlanarMapping(std::move(img), std::move(p), std::move(q));
}

struct KelvinResiduals {
    double energy = 0.0;    // | |grad p~|^2 + |grad q~|^2 - |x|^-4 (|grad p|^2 + |grad q|^2) |
    double jacobian = 0.0;  // | p~_1 q~_2 - p~_2 q~_1 + |x|^-4 (p_1 q_2 - p_2 q_1) |
};

/// Chain rule for p~(y) = p(y / |y|^2): grad p~(y) = D(y) grad p(x), with the
/// symmetric inversion differential D(y) = (|y|^2 I - 2 y y^T) / |y|^4.
inline Jacobian2 kelvin_pullback(const Jacobian2& d, Vec2 y) {
    const double r2 = norm2(y);
    const double r4 = r2 * r2;
    const Sym2 D{(r2 - 2.0 * y.x * y.x) / r4, -2.0 * y.x * y.y / r4, (r2 - 2.0 * y.y * y.y) / r4};
    const Vec2 gp = D.apply({d.p1, d.p2});
    const Vec2 gq = D.apply({d.q1, d.q2});
    return {gp.x, gp.y, gq.x, gq.y};
}

namespace detail {
inline KelvinResiduals kelvin_residuals(const Jacobian2& src, const Jacobian2& img, Vec2 y) {
    const double r2 = norm2(y);
    const double f = 1.0 / (r2 * r2);
    return {std::abs(img.frobenius2() - f * src.frobenius2()), std::abs(img.det() + f * src.det())};
}
}  // namespace detail

/// Both identities with exact derivatives of w, evaluated at every image node.
inline KelvinResiduals verify_kelvin_identities(const PlanarMapping& w, const DerivativeProvider& exact) {
    const auto& g = w.grid();
    const AnnularGrid img = kelvin_image_grid(g);
    KelvinResiduals out;
    for (int k = 0; k < g.n_r(); ++k)
        for (int j = 0; j < g.n_theta(); ++j) {
            const Vec2 y = img.point(k, j);
            const Jacobian2 src = exact(kelvin_point(y));
            const auto r = detail::kelvin_residuals(src, kelvin_pullback(src, y), y);
            out.energy = std::max(out.energy, r.energy);
            out.jacobian = std::max(out.jacobian, r.jacobian);
        }
    return out;
}

/// Both identities with stencil derivatives on the source and image grids.
/// Boundary rings are skipped because their one-sided stencils differ.
inline KelvinResiduals verify_kelvin_identities(const PlanarMapping& w) {
    const auto& g = w.grid();
    const auto conj = kelvin_conjugate(w);
    const auto& img = conj.grid();
    const auto src = jacobian_field(w);
    const auto dst = jacobian_field(conj.swapped());  // (p~, q~)
    KelvinResiduals out;
    for (int k = 1; k + 1 < g.n_r(); ++k)
        for (int j = 0; j < g.n_theta(); ++j) {
            const auto r = detail::kelvin_residuals(src[g.index(g.n_r() - 1 - k, j)], dst[img.index(k, j)],
                                                    img.point(k, j));
            out.energy = std::max(out.energy, r.energy);
            out.jacobian = std::max(out.jacobian, r.jacobian);
        }
    return out;
}

/// Limit of w at infinity and the decay of sup_{|x|=R} |w - w_inf| over the
/// given radii (snapped to the nearest rings). The limit is the angular mean on
/// the outermost ring, refined by Aitken extrapolation over the last three
/// rings when their means converge geometrically.
inline DecayFit limit_and_decay(const PlanarMapping& w, const std::vector<double>& radii) {
    const auto& g = w.grid();
    if (radii.size() < 4) fail(ErrorCode::insufficient_window, "limit_and_decay needs at least four radii");
    std::vector<int> rings;
    for (double r : radii) {
        if (!g.contains_radius(r))
            fail(ErrorCode::window_outside_grid, "radius " + std::to_string(r) + " lies outside the grid");
        rings.push_back(g.nearest_ring(r));
    }
    for (std::size_t k = 1; k < rings.size(); ++k)
        if (rings[k] <= rings[k - 1])
            fail(ErrorCode::insufficient_window, "radii must map to strictly increasing grid rings");

    auto ring_mean = [&](int i) {
        double sp = 0.0, sq = 0.0;
        for (int j = 0; j < g.n_theta(); ++j) {
            sp += w(i, j).x;
            sq += w(i, j).y;
        }
        return std::vector<double>{sp / g.n_theta(), sq / g.n_theta()};
    };
    const std::size_t n = rings.size();
    std::vector<double> limit = ring_mean(rings[n - 1]);
    double scale = 1.0;
    for (int i : rings)
        for (int j = 0; j < g.n_theta(); ++j) scale = std::max(scale, norm(w(i, j)));
    if (auto refined = aitken_limit(ring_mean(rings[n - 3]), ring_mean(rings[n - 2]), limit, 1e-12 * scale))
        limit = *refined;

    std::vector<DecayWindow> wins;
    for (int i : rings) {
        double dev = 0.0;
        for (int j = 0; j < g.n_theta(); ++j) dev = std::max(dev, norm(w(i, j) - Vec2{limit[0], limit[1]}));
        wins.push_back({g.radius(i), dev});
    }
    return fit_power_law(std::move(wins), std::move(limit), 1e-12 * scale);
}

}  // namespace exbern
