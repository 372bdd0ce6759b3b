#pragma once

// Asymptotic expansion u = x^T A x / 2 + b.x + d log|x| + c + e.x/|x|^2 + ...
// of exterior solutions: windowed least squares, Hessian limits, Laurent
// coefficients of u_1 - i u_2, the divergence formula for d, and the
// exponent schedule used to bootstrap decay rates.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "exbern/decay.hpp"
#include "exbern/error.hpp"
#include "exbern/grid.hpp"
#include "exbern/qcmap.hpp"
#include "exbern/types.hpp"

namespace exbern {

struct Window {
    double r_lo;
    double r_hi;
};

inline constexpr int expansion_basis_size = 9;

/// {x1^2/2, x1 x2, x2^2/2, x1, x2, log|x|, 1, x1/|x|^2, x2/|x|^2}
inline std::array<double, expansion_basis_size> expansion_basis(Vec2 x) {
    const double r2 = norm2(x);
    return {0.5 * x.x * x.x, x.x * x.y, 0.5 * x.y * x.y, x.x, x.y, 0.5 * std::log(r2), 1.0, x.x / r2, x.y / r2};
}

struct WindowFit {
    Window window;
    int rings = 0;
    double condition = 0.0;
    std::array<double, expansion_basis_size> coefficients{};
    double residual = 0.0;  // sup |u - fit| over the window
};

struct ExpansionCoefficients {
    Sym2 A;
    Vec2 b;
    double d = 0.0;
    double c = 0.0;
    Vec2 e;
    DecayFit residual_fit;
    std::vector<WindowFit> windows;

    double operator()(Vec2 x) const {
        const double r2 = norm2(x);
        return 0.5 * A.quadratic_form(x) + dot(b, x) + 0.5 * d * std::log(r2) + c + dot(e, x) / r2;
    }
};

namespace detail {

inline std::vector<int> window_rings(const AnnularGrid& g, Window w) {
    if (!(w.r_lo < w.r_hi) || !g.contains_radius(w.r_lo, 1e-9) || !g.contains_radius(w.r_hi, 1e-9))
        fail(ErrorCode::window_outside_grid, "window [" + std::to_string(w.r_lo) + ", " + std::to_string(w.r_hi) +
                                                 "] is not inside the grid [" + std::to_string(g.r_inner()) + ", " +
                                                 std::to_string(g.r_outer()) + "]");
    std::vector<int> rings;
    for (int i = 0; i < g.n_r(); ++i) {
        const double r = g.radius(i);
        if (r >= w.r_lo * (1.0 - 1e-9) && r <= w.r_hi * (1.0 + 1e-9)) rings.push_back(i);
    }
    return rings;
}

inline void check_windows(const AnnularGrid& g, const std::vector<Window>& windows, std::size_t min_count,
                          int min_rings) {
    if (windows.size() < min_count)
        fail(ErrorCode::insufficient_window,
             "need at least " + std::to_string(min_count) + " windows, got " + std::to_string(windows.size()));
    for (std::size_t k = 0; k < windows.size(); ++k) {
        const auto rings = window_rings(g, windows[k]);
        if (static_cast<int>(rings.size()) < min_rings)
            fail(ErrorCode::insufficient_window, "window " + std::to_string(k) + " spans " +
                                                     std::to_string(rings.size()) + " rings, need " +
                                                     std::to_string(min_rings));
        if (k > 0 && !(windows[k].r_lo > windows[k - 1].r_lo))
            fail(ErrorCode::insufficient_window, "windows must be ordered by increasing radius");
    }
}

// weight making the discrete sum uniform in (log r, theta)
inline double log_measure_weight(const AnnularGrid& g, int i) {
    return g.spacing() == Spacing::log_radial ? 1.0 : 1.0 / g.radius(i);
}

inline WindowFit fit_window(const ScalarField& u, Window w, double max_condition) {
    const auto& g = u.grid();
    const auto rings = window_rings(g, w);
    const auto rows = static_cast<Eigen::Index>(rings.size()) * g.n_theta();
    Eigen::MatrixXd M(rows, expansion_basis_size);
    Eigen::VectorXd y(rows);
    Eigen::Index row = 0;
    for (int i : rings) {
        const double sw = std::sqrt(log_measure_weight(g, i));
        for (int j = 0; j < g.n_theta(); ++j, ++row) {
            const auto phi = expansion_basis(g.point(i, j));
            for (int k = 0; k < expansion_basis_size; ++k) M(row, k) = sw * phi[k];
            y(row) = sw * u(i, j);
        }
    }
    Eigen::VectorXd scale(expansion_basis_size);
    for (int k = 0; k < expansion_basis_size; ++k) {
        scale(k) = M.col(k).norm();
        if (scale(k) > 0.0) M.col(k) /= scale(k);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(cond <= max_condition))
        fail(ErrorCode::ill_conditioned_window, "window [" + std::to_string(w.r_lo) + ", " + std::to_string(w.r_hi) +
                                                    "] has condition estimate " + std::to_string(cond));
    const Eigen::VectorXd z = M.householderQr().solve(y);

    WindowFit out;
    out.window = w;
    out.rings = static_cast<int>(rings.size());
    out.condition = cond;
    for (int k = 0; k < expansion_basis_size; ++k) out.coefficients[k] = z(k) / scale(k);
    for (int i : rings)
        for (int j = 0; j < g.n_theta(); ++j) {
            const auto phi = expansion_basis(g.point(i, j));
            double v = 0.0;
            for (int k = 0; k < expansion_basis_size; ++k) v += out.coefficients[k] * phi[k];
            out.residual = std::max(out.residual, std::abs(u(i, j) - v));
        }
    return out;
}

inline ExpansionCoefficients from_basis(const std::array<double, expansion_basis_size>& z) {
    ExpansionCoefficients e;
    e.A = {z[0], z[1], z[2]};
    e.b = {z[3], z[4]};
    e.d = z[5];
    e.c = z[6];
    e.e = {z[7], z[8]};
    return e;
}

inline double field_scale(const ScalarField& u) {
    double s = 1.0;
    for (double v : u.values()) s = std::max(s, std::abs(v));
    return s;
}

}  // namespace detail

struct FitOptions {
    double max_condition = 1e10;
    int min_rings = 8;
};

/// Least squares fit of the nine-function expansion on each window (uniform
/// weight in (log r, theta), normalized columns, Householder QR). Coefficients
/// come from the outermost window; residual_fit is the power law of each
/// window's own sup residual against its inner radius.
inline ExpansionCoefficients fit_expansion(const ScalarField& u, const std::vector<Window>& windows,
                                           const FitOptions& opt = {}) {
    const auto& g = u.grid();
    detail::check_windows(g, windows, 3, opt.min_rings);
    std::vector<WindowFit> fits;
    for (const auto& w : windows) fits.push_back(detail::fit_window(u, w, opt.max_condition));
    auto out = detail::from_basis(fits.back().coefficients);
    std::vector<DecayWindow> dw;
    for (const auto& f : fits) dw.push_back({f.window.r_lo, f.residual});
    const auto& z = fits.back().coefficients;
    out.residual_fit =
        fit_power_law(std::move(dw), std::vector<double>(z.begin(), z.end()), 1e-12 * detail::field_scale(u));
    out.windows = std::move(fits);
    return out;
}

struct HessianLimit {
    Sym2 A;
    DecayFit fit;
};

/// Limit of D^2 u: mean of the stencil Hessian over the outermost window
/// (uniform in (log r, theta)), refined by Aitken extrapolation over the last
/// three window means when they converge geometrically. The fit records
/// sup |D^2 u - A| (Frobenius) per window against the window's inner radius.
inline HessianLimit hessian_limit(const ScalarField& u, const std::vector<Window>& windows,
                                  const FitOptions& opt = {}) {
    const auto& g = u.grid();
    detail::check_windows(g, windows, 3, opt.min_rings);
    const auto H = hessian(u);
    std::vector<std::vector<double>> means;
    double scale = 1.0;
    for (const auto& w : windows) {
        double s11 = 0.0, s12 = 0.0, s22 = 0.0, sw = 0.0;
        for (int i : detail::window_rings(g, w)) {
            const double wt = detail::log_measure_weight(g, i);
            for (int j = 0; j < g.n_theta(); ++j) {
                const Sym2 h = H(i, j);
                s11 += wt * h.m11;
                s12 += wt * h.m12;
                s22 += wt * h.m22;
                sw += wt;
                scale = std::max(scale, h.norm());
            }
        }
        means.push_back({s11 / sw, s12 / sw, s22 / sw});
    }
    std::vector<double> lim = means.back();
    const std::size_t n = means.size();
    if (auto refined = aitken_limit(means[n - 3], means[n - 2], means[n - 1], 1e-11 * scale)) lim = *refined;
    const Sym2 A{lim[0], lim[1], lim[2]};
    std::vector<DecayWindow> dw;
    for (const auto& w : windows) {
        double dev = 0.0;
        for (int i : detail::window_rings(g, w))
            for (int j = 0; j < g.n_theta(); ++j) dev = std::max(dev, (H(i, j) - A).norm());
        dw.push_back({w.r_lo, dev});
    }
    return {A, fit_power_law(std::move(dw), std::move(lim), 1e-10 * scale)};
}

// ---------------------------------------------------------------------------
// Laurent coefficients

struct LaurentCoefficients {
    std::vector<std::complex<double>> coefficients;  // [m] holds a_{-m}
    double radius_used = 0.0;
    double harmonic_residual = 0.0;  // max |Laplacian| on the ring, when measured

    std::complex<double> a(int k) const { return coefficients.at(static_cast<std::size_t>(-k)); }
    Vec2 b() const { return {coefficients[0].real(), -coefficients[0].imag()}; }
    double d() const { return coefficients.size() > 1 ? coefficients[1].real() : 0.0; }
};

/// a_k = (1 / 2 pi i) int xi(z) z^{-k-1} dz over |z| = radius for xi = w_1 - i w_2,
/// where w is the gradient field. Trapezoidal rule on the ring's nodes.
inline LaurentCoefficients laurent_coefficients(const PlanarMapping& grad, double radius, int max_order) {
    if (max_order < 1) fail(ErrorCode::invalid_dimension, "max_order must be at least 1");
    const auto& g = grad.grid();
    const int i = require_ring(g, radius);
    const double r = g.radius(i);
    LaurentCoefficients out;
    out.radius_used = r;
    out.coefficients.assign(static_cast<std::size_t>(max_order) + 1, {0.0, 0.0});
    for (int j = 0; j < g.n_theta(); ++j) {
        const Vec2 w = grad(i, j);
        const std::complex<double> xi(w.x, -w.y);
        const std::complex<double> z(r * g.cos_theta(j), r * g.sin_theta(j));
        std::complex<double> zp(1.0, 0.0);
        for (int m = 0; m <= max_order; ++m) {
            out.coefficients[m] += xi * zp;
            zp *= z;
        }
    }
    for (auto& c : out.coefficients) c /= static_cast<double>(g.n_theta());
    return out;
}

struct LaurentOptions {
    /// Bound on max |Laplacian| relative to the ring's second-derivative scale
    /// max(|u_rr| + |u_r| / r + |u_tt| / r^2).
    double harmonic_tol = 1e-2;
    /// Quadratic part removed from u before the transform (u - x^T A x / 2).
    Sym2 subtract_quadratic{};
    /// Exact gradient of u; replaces the stencil gradient when set.
    std::function<Vec2(Vec2)> exact_gradient;
};

/// Laurent coefficients of the gradient of a scalar field that is harmonic near
/// the ring (after removing the optional quadratic part). The harmonicity
/// check uses the stencil Laplacian on that ring.
inline LaurentCoefficients laurent_coefficients(const ScalarField& u, double radius, int max_order,
                                                const LaurentOptions& opt = {}) {
    const auto& g = u.grid();
    const int i = require_ring(g, radius);
    const auto ps = polar_stencils(g, i);
    const double trA = opt.subtract_quadratic.trace();
    double lap_max = 0.0, scale = 0.0;
    {
        const double r = g.radius(i);
        for (int j = 0; j < g.n_theta(); ++j) {
            const double urr = apply(ps.u_rr, u.values(), g, j);
            const double ur = apply(ps.u_r, u.values(), g, j) / r;
            const double utt = apply(ps.u_tt, u.values(), g, j) / (r * r);
            lap_max = std::max(lap_max, std::abs(urr + ur + utt - trA));
            scale = std::max(scale, std::abs(urr) + std::abs(ur) + std::abs(utt));
        }
    }
    if (!(lap_max <= opt.harmonic_tol * scale) && lap_max > 0.0)
        fail(ErrorCode::not_harmonic, "field is not harmonic on |x| = " + std::to_string(radius) +
                                          ": max |Laplacian| = " + std::to_string(lap_max) +
                                          " against second-derivative scale " + std::to_string(scale));
    // gradient on the ring only; other rings are zero and unused
    std::vector<double> p(g.size(), 0.0), q(g.size(), 0.0);
    for (int j = 0; j < g.n_theta(); ++j) {
        const Vec2 x = g.point(i, j);
        const Vec2 d = opt.exact_gradient ? opt.exact_gradient(x) : gradient_at(u, ps, i, j);
        const Vec2 w = d - opt.subtract_quadratic.apply(x);
        p[g.index(i, j)] = w.x;
        q[g.index(i, j)] = w.y;
    }
    auto out = laurent_coefficients(PlanarMapping(g, std::move(p), std::move(q)), radius, max_order);
    out.harmonic_residual = lap_max;
    return out;
}

// ---------------------------------------------------------------------------
// Divergence formula for d

struct DivergenceEstimate {
    double d = 0.0;           // including the tail correction
    double d_raw = 0.0;       // truncated at R
    double tail = 0.0;        // estimated (1/2pi) int_{|x|>R} (Laplacian u - tr A)
    double truncation = 0.0;  // |d - d_raw|, the size of the truncation effect
    double flux_inner = 0.0;
    double area_term = 0.0;
    double radius = 0.0;
    double tail_exponent = 0.0;  // decay of r^2 times the ring mean of (Laplacian u - tr A)
    bool tail_fitted = false;
};

/// d = (1/2pi) [ int_{|x|=r_in} u_nu + int_{r_in<|x|<R} (Laplacian u - tr A) - tr A pi r_in^2 ].
/// The area integrand beyond R is estimated from a power-law fit of its ring
/// integrals on [R/4, R] and added when the fit is clean.
inline DivergenceEstimate d_from_divergence(const ScalarField& u, Sym2 A, double R) {
    const auto& g = u.grid();
    if (!g.contains_radius(R, 1e-9) || !(R > g.r_inner()))
        fail(ErrorCode::window_outside_grid, "divergence radius " + std::to_string(R) + " is outside the grid");
    R = std::min(R, g.r_outer());
    const double trA = A.trace();
    const auto lap = laplacian(u);
    std::vector<double> integrand(g.size());
    for (std::size_t k = 0; k < integrand.size(); ++k) integrand[k] = lap.values()[k] - trA;
    const ScalarField h(g, std::move(integrand));

    DivergenceEstimate out;
    out.radius = R;
    out.flux_inner = circle_flux_integral(u, g.r_inner());
    out.area_term = annulus_integral(h, g.r_inner(), R);
    const double omega = trA * pi * g.r_inner() * g.r_inner();
    out.d_raw = (out.flux_inner + out.area_term - omega) / (2.0 * pi);

    // tail: G(r) = r^2 int h dtheta per unit log r on a log grid (r int h dtheta
    // per unit r otherwise); fit |G| ~ C r^-q on interior rings in [R/4, R]
    const auto G = ring_integrals(h);
    const bool log_r = g.spacing() == Spacing::log_radial;
    std::vector<DecayWindow> pts;
    int sign = 0;
    bool same_sign = true;
    double gmax = 0.0;
    for (int i = 1; i + 2 < g.n_r(); ++i) {
        const double r = g.radius(i);
        if (r < 0.25 * R || r > R * (1.0 + 1e-9)) continue;
        const double v = log_r ? G[i] : G[i] * r;  // per unit log r in both cases
        const int sv = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
        if (sign == 0) sign = sv;
        if (sv == 0 || sv != sign) same_sign = false;
        gmax = std::max(gmax, std::abs(v));
        pts.push_back({r, std::abs(v)});
    }
    const double noise = 1e-9 * (1.0 + std::abs(trA) * R * R);
    if (pts.size() >= 4 && same_sign && gmax > noise) {
        const auto fit = fit_power_law(pts, {}, 0.0);
        out.tail_exponent = fit.exponent;
        if (!fit.degenerate && fit.exponent > 0.05 && fit.r_squared >= 0.9) {
            // int_R^inf C r^-q d(log r) = C R^-q / q
            const double C = std::exp(fit.log_constant);
            out.tail = sign * C * std::pow(R, -fit.exponent) / fit.exponent / (2.0 * pi);
            out.tail_fitted = true;
        }
    }
    out.d = out.d_raw + out.tail;
    out.truncation = std::abs(out.tail);
    return out;
}

// ---------------------------------------------------------------------------
// Bootstrap exponent schedule

struct BootstrapSchedule {
    double alpha = 0.0;
    double epsilon = 0.0;
    int n = 0;
    double delta = 0.0;
};

inline double bootstrap_delta(double alpha, double epsilon, int n) {
    const double p = std::ldexp(1.0, n);
    return 1.0 - p * alpha + (p - 1.0) * epsilon;
}

/// (n, epsilon) with delta = 1 - 2^n alpha + (2^n - 1) epsilon in (0, 1/8).
/// n = 0 when alpha > 7/8 already works; otherwise n is minimal with
/// 2^n alpha > 15/16 and epsilon is chosen so that delta = 1/16.
inline BootstrapSchedule bootstrap_schedule(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::domain_error, "bootstrap alpha must lie in (0, 1)");
    BootstrapSchedule s;
    s.alpha = alpha;
    if (1.0 - alpha < 0.125) {
        s.n = 0;
        s.epsilon = 1e-3 * alpha;
        s.delta = bootstrap_delta(alpha, s.epsilon, 0);
        return s;
    }
    int n = 1;
    while (std::ldexp(alpha, n) <= 15.0 / 16.0) ++n;
    const double p = std::ldexp(1.0, n);
    s.n = n;
    s.epsilon = (p * alpha - 15.0 / 16.0) / (p - 1.0);
    s.delta = bootstrap_delta(alpha, s.epsilon, n);
    return s;
}

/// The n-formula n = floor(log2((7/8 - epsilon) / (alpha - epsilon))) + 1 with
/// the caller's epsilon, without any validity check on delta.
inline BootstrapSchedule literal_bootstrap_schedule(double alpha, double epsilon) {
    if (!(alpha > epsilon && epsilon > 0.0 && epsilon < 0.875))
        fail(ErrorCode::domain_error, "literal schedule needs 0 < epsilon < alpha and epsilon < 7/8");
    BootstrapSchedule s;
    s.alpha = alpha;
    s.epsilon = epsilon;
    s.n = static_cast<int>(std::floor(std::log2((0.875 - epsilon) / (alpha - epsilon)))) + 1;
    s.delta = bootstrap_delta(alpha, epsilon, s.n);
    return s;
}

inline bool valid_schedule(const BootstrapSchedule& s) {
    return s.n >= 0 && s.epsilon > 0.0 && s.epsilon < s.alpha && s.delta > 0.0 && s.delta < 0.125 &&
           std::abs(s.delta - bootstrap_delta(s.alpha, s.epsilon, s.n)) <= 1e-14;
}

// ---------------------------------------------------------------------------
// Scaled derivative decay of the expansion remainder

struct DerivativeDecay {
    std::array<DecayFit, 3> orders;  // sup |D^k phi| per window, k = 1, 2, 3
};

/// Decay of the first three derivatives of phi = u - expansion, measured with
/// stencils (third derivatives as stencil gradients of the Hessian entries).
inline DerivativeDecay derivative_decay(const ScalarField& u, const ExpansionCoefficients& coeffs,
                                        const std::vector<Window>& windows) {
    const auto& g = u.grid();
    detail::check_windows(g, windows, 2, 3);
    std::vector<double> phi(g.size());
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j) phi[g.index(i, j)] = u(i, j) - coeffs(g.point(i, j));
    const ScalarField f(g, std::move(phi));
    const auto D1 = gradient(f);
    const auto D2 = hessian(f);
    const auto D3a = gradient(ScalarField(g, std::vector<double>(D2.m11().begin(), D2.m11().end())));
    const auto D3b = gradient(ScalarField(g, std::vector<double>(D2.m12().begin(), D2.m12().end())));
    const auto D3c = gradient(ScalarField(g, std::vector<double>(D2.m22().begin(), D2.m22().end())));
    DerivativeDecay out;
    const double floor = 1e-14 * detail::field_scale(u);
    for (int order = 0; order < 3; ++order) {
        std::vector<DecayWindow> dw;
        for (const auto& w : windows) {
            double dev = 0.0;
            for (int i : detail::window_rings(g, w)) {
                if (g.is_boundary_ring(i)) continue;
                for (int j = 0; j < g.n_theta(); ++j) {
                    const auto k = g.index(i, j);
                    double v = 0.0;
                    if (order == 0) {
                        v = norm(D1(i, j));
                    } else if (order == 1) {
                        v = D2.at(k).norm();
                    } else {
                        // |D^3 phi|^2 = sum over i,j,k of phi_ijk^2, from the three Hessian gradients
                        const Vec2 a = D3a(i, j), b = D3b(i, j), c = D3c(i, j);
                        v = std::sqrt(norm2(a) + 2.0 * norm2(b) + norm2(c));
                    }
                    dev = std::max(dev, v);
                }
            }
            dw.push_back({w.r_lo, dev});
        }
        out.orders[order] = fit_power_law(std::move(dw), {}, floor);
    }
    return out;
}

}  // namespace exbern
