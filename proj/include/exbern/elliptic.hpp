#pragma once

// Linear elliptic Dirichlet problems a_ij u_ij = f on annuli, and the
// log-kernel Newtonian potential.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "exbern/decay.hpp"
#include "exbern/error.hpp"
#include "exbern/grid.hpp"
#include "exbern/types.hpp"

namespace exbern {

struct EllipticityConstants {
    double lambda = 0.0;
    double Lambda = 0.0;
    double gamma = 1.0;
};

inline EllipticityConstants ellipticity_constants(std::span<const Sym2> a) {
    EllipticityConstants out{std::numeric_limits<double>::infinity(), 0.0, 1.0};
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto ev = eigenvalues(a[k]);
        if (!(ev[0] > 0.0))
            fail(ErrorCode::not_elliptic, "coefficient matrix at node " + std::to_string(k) +
                                              " has eigenvalue " + std::to_string(ev[0]));
        out.lambda = std::min(out.lambda, ev[0]);
        out.Lambda = std::max(out.Lambda, ev[1]);
    }
    out.gamma = out.Lambda / out.lambda;
    return out;
}

inline std::vector<Sym2> to_matrices(const SymMatrixField& a) {
    std::vector<Sym2> out(a.grid().size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = a.at(k);
    return out;
}

inline EllipticityConstants ellipticity_constants(const SymMatrixField& a) {
    return ellipticity_constants(to_matrices(a));
}

/// Coefficient field of a_11 u_11 + 2 a_12 u_12 + a_22 u_22 with its constants.
struct LinearCoefficients {
    SymMatrixField a;
    double lambda;
    double Lambda;
    double gamma;
};

inline LinearCoefficients linear_coefficients(SymMatrixField a) {
    const auto c = ellipticity_constants(a);
    return {std::move(a), c.lambda, c.Lambda, c.gamma};
}

template <class F>
LinearCoefficients linear_coefficients(const AnnularGrid& g, F&& coeff) {
    std::vector<double> a11(g.size()), a12(g.size()), a22(g.size());
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j) {
            const Sym2 m = coeff(g.point(i, j));
            const auto k = g.index(i, j);
            a11[k] = m.m11;
            a12[k] = m.m12;
            a22[k] = m.m22;
        }
    return linear_coefficients(SymMatrixField(g, std::move(a11), std::move(a12), std::move(a22)));
}

inline LinearCoefficients constant_coefficients(const AnnularGrid& g, Sym2 a) {
    return linear_coefficients(g, [a](Vec2) { return a; });
}

/// Values of fn on ring i, in angular order.
template <class F>
std::vector<double> ring_values(const AnnularGrid& g, int i, F&& fn) {
    std::vector<double> out(static_cast<std::size_t>(g.n_theta()));
    for (int j = 0; j < g.n_theta(); ++j) out[static_cast<std::size_t>(j)] = fn(g.point(i, j));
    return out;
}

inline std::vector<double> ring_values(const ScalarField& u, int i) {
    const auto& g = u.grid();
    std::vector<double> out(static_cast<std::size_t>(g.n_theta()));
    for (int j = 0; j < g.n_theta(); ++j) out[static_cast<std::size_t>(j)] = u(i, j);
    return out;
}

/// Sparse Dirichlet system on a fixed grid. The sparsity pattern and its
/// fill-reducing ordering are computed once, so repeated solves with new
/// coefficients (as in Newton's method) only refactorize.
class DirichletOperator {
public:
    explicit DirichletOperator(AnnularGrid grid) : grid_(std::move(grid)) {
        for (int i = 0; i < grid_.n_r(); ++i) ps_.push_back(polar_stencils(grid_, i));
        n_unknowns_ = static_cast<Eigen::Index>(grid_.n_r() - 2) * grid_.n_theta();
    }

    const AnnularGrid& grid() const { return grid_; }

    /// Solve sum a_ij u_ij = f at interior nodes with u = g on the boundary
    /// rings. `a` and `f` are indexed by grid node; boundary entries are unused.
    std::vector<double> solve(std::span<const Sym2> a, std::span<const double> f, std::span<const double> g_inner,
                              std::span<const double> g_outer, double* residual_out = nullptr) {
        const auto& g = grid_;
        const int nt = g.n_theta();
        if (a.size() != g.size() || f.size() != g.size())
            fail(ErrorCode::invalid_dimension, "coefficient or right-hand side size does not match the grid");
        if (g_inner.size() != static_cast<std::size_t>(nt) || g_outer.size() != static_cast<std::size_t>(nt))
            fail(ErrorCode::invalid_dimension, "boundary data must have n_theta values per ring");

        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(n_unknowns_) * 9);
        Eigen::VectorXd rhs(n_unknowns_);
        double fmax = 0.0;
        for (int i = 1; i + 1 < g.n_r(); ++i)
            for (int j = 0; j < nt; ++j) {
                const auto row = unknown(i, j);
                const auto node = g.index(i, j);
                const LocalStencil st = linear_operator_stencil(g, ps_[i], i, j, a[node]);
                double b = f[node];
                fmax = std::max(fmax, std::abs(b));
                for (int k = 0; k < st.n_rings; ++k) {
                    const int ring = st.ring0 + k;
                    for (int m = 0; m < 3; ++m) {
                        const int jj = g.wrap(j + m - 1);
                        const double w = st.w[k][m];
                        if (ring == 0) {
                            b -= w * g_inner[jj];
                        } else if (ring == g.n_r() - 1) {
                            b -= w * g_outer[jj];
                        } else {
                            // explicit zeros keep the pattern fixed between calls
                            trips.emplace_back(row, unknown(ring, jj), w);
                        }
                    }
                }
                rhs(row) = b;
            }
        Eigen::SparseMatrix<double> A(n_unknowns_, n_unknowns_);
        A.setFromTriplets(trips.begin(), trips.end());
        A.makeCompressed();
        if (!analyzed_) {
            lu_.analyzePattern(A);
            analyzed_ = true;
        }
        lu_.factorize(A);
        if (lu_.info() != Eigen::Success)
            fail(ErrorCode::singular_system, "sparse LU factorization failed: " + lu_.lastErrorMessage());
        Eigen::VectorXd x = lu_.solve(rhs);
        Eigen::VectorXd res = A * x - rhs;
        double rmax = res.lpNorm<Eigen::Infinity>();
        if (!(rmax <= 1e-10 * (1.0 + fmax))) {
            // one step of iterative refinement before giving up
            x -= lu_.solve(res);
            res = A * x - rhs;
            rmax = res.lpNorm<Eigen::Infinity>();
        }
        if (!std::isfinite(rmax) || !(rmax <= 1e-10 * (1.0 + fmax)))
            fail(ErrorCode::singular_system,
                 "linear solve residual " + std::to_string(rmax) + " exceeds tolerance; system is near singular");
        if (residual_out) *residual_out = rmax;

        std::vector<double> u(g.size());
        for (int j = 0; j < nt; ++j) {
            u[g.index(0, j)] = g_inner[j];
            u[g.index(g.n_r() - 1, j)] = g_outer[j];
        }
        for (int i = 1; i + 1 < g.n_r(); ++i)
            for (int j = 0; j < nt; ++j) u[g.index(i, j)] = x(unknown(i, j));
        return u;
    }

private:
    Eigen::Index unknown(int i, int j) const { return static_cast<Eigen::Index>(i - 1) * grid_.n_theta() + j; }

    AnnularGrid grid_;
    std::vector<PolarStencils> ps_;
    Eigen::Index n_unknowns_ = 0;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_ = false;
};

/// Discrete solution of a_ij u_ij = f with Dirichlet data on both boundary rings.
inline ScalarField solve_linear_dirichlet(const LinearCoefficients& a, const ScalarField& f,
                                          std::span<const double> g_inner, std::span<const double> g_outer) {
    const auto& g = a.a.grid();
    if (!g.same_layout(f.grid())) fail(ErrorCode::grid_mismatch, "coefficients and right-hand side use different grids");
    DirichletOperator op(g);
    auto u = op.solve(to_matrices(a.a), f.values(), g_inner, g_outer);
    return ScalarField(g, std::move(u));
}

// ---------------------------------------------------------------------------
// Newtonian potential

namespace detail {

struct GaussRule {
    std::vector<double> x;  // on [0, 1]
    std::vector<double> w;
};

inline GaussRule gauss_legendre(int n) {
    GaussRule rule;
    for (int k = 1; k <= n; ++k) {
        double z = std::cos(pi * (k - 0.25) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int m = 2; m <= n; ++m) {
                const double p2 = ((2.0 * m - 1.0) * z * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        rule.x.push_back(0.5 * (1.0 - z));
        rule.w.push_back(1.0 / ((1.0 - z * z) * dp * dp));
    }
    return rule;
}

inline const GaussRule& gauss(int n) {
    static const std::array<GaussRule, 9> rules = [] {
        std::array<GaussRule, 9> r;
        for (int k = 1; k < 9; ++k) r[k] = gauss_legendre(k);
        return r;
    }();
    return rules[static_cast<std::size_t>(n)];
}

/// One (s, theta) cell with bilinear f, mapped to the plane.
struct Cell {
    const AnnularGrid* g;
    int i;
    int j;
    std::array<double, 4> f;  // (0,0), (1,0), (0,1), (1,1) in (xi, eta)

    double radius(double xi) const {
        return g->spacing() == Spacing::log_radial ? g->radius(i) * std::exp(g->h_radial() * xi)
                                                   : g->radius(i) + g->h_radial() * xi;
    }
    // |dy/dxi x dy/deta|
    double jacobian(double r) const {
        const double dr = g->spacing() == Spacing::log_radial ? r * g->h_radial() : g->h_radial();
        return r * dr * g->h_theta();
    }
    double f_at(double xi, double eta) const {
        return (1 - xi) * (1 - eta) * f[0] + xi * (1 - eta) * f[1] + (1 - xi) * eta * f[2] + xi * eta * f[3];
    }
    Vec2 point(double eta, double r) const {
        const double t = g->theta(j) + g->h_theta() * eta;
        return {r * std::cos(t), r * std::sin(t)};
    }
    // f(y) (log|x - y| - log|y|) dA at (xi, eta)
    double integrand(Vec2 x, double xi, double eta) const {
        const double r = radius(xi);
        const Vec2 y = point(eta, r);
        const double d2 = norm2(x - y);
        const double ker = d2 > 0.0 ? 0.5 * std::log(d2) - std::log(r) : 0.0;
        return f_at(xi, eta) * ker * jacobian(r);
    }
};

inline double cell_gauss(const Cell& c, Vec2 x, int n) {
    const auto& q = gauss(n);
    double acc = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) acc += q.w[a] * q.w[b] * c.integrand(x, q.x[a], q.x[b]);
    return acc;
}

// Triangle fan about the target (xi0, eta0); each triangle is integrated in
// collapsed coordinates with t = v^2 so the log singularity becomes smooth.
// Along each edge the panels are graded geometrically toward the foot of the
// perpendicular from the target, which resolves thin triangles when the
// target sits close to an edge.
inline double cell_polar(const Cell& c, Vec2 x, double xi0, double eta0, int levels) {
    static constexpr std::array<std::array<double, 2>, 5> corners{{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}}};
    constexpr double grading = 0.2;
    const auto& qt = gauss(8);
    const auto& qa = gauss(4);
    double acc = 0.0;
    for (int e = 0; e < 4; ++e) {
        const double ax = corners[e][0] - xi0, ay = corners[e][1] - eta0;
        const double ex = corners[e + 1][0] - corners[e][0], ey = corners[e + 1][1] - corners[e][1];
        const double area2 = std::abs(ax * ey - ay * ex);
        if (area2 < 1e-14) continue;
        auto panel = [&](double t0, double t1) {
            double sum = 0.0;
            for (std::size_t a = 0; a < qa.x.size(); ++a) {
                const double tau = t0 + (t1 - t0) * qa.x[a];
                const double dx = ax + tau * ex, dy = ay + tau * ey;
                double inner = 0.0;
                for (std::size_t b = 0; b < qt.x.size(); ++b) {
                    const double v = qt.x[b];
                    const double t = v * v;
                    // dt = 2 v dv; area element of the collapsed triangle is t * area2
                    inner += qt.w[b] * 2.0 * v * t * c.integrand(x, xi0 + t * dx, eta0 + t * dy);
                }
                sum += qa.w[a] * (t1 - t0) * inner;
            }
            return sum;
        };
        const double tau0 = std::clamp(-(ax * ex + ay * ey) / (ex * ex + ey * ey), 0.0, 1.0);
        for (const double side : {-1.0, 1.0}) {
            const double len = side < 0.0 ? tau0 : 1.0 - tau0;
            if (len <= 0.0) continue;
            double outer = len;
            for (int k = 0; k < levels; ++k) {
                const double inner = k + 1 == levels ? 0.0 : outer * grading;
                const double t0 = tau0 + side * inner, t1 = tau0 + side * outer;
                acc += area2 * panel(std::min(t0, t1), std::max(t0, t1));
                outer = inner;
            }
        }
    }
    return acc;
}

}  // namespace detail

struct PotentialResult {
    std::vector<double> values;
    double log_mass = 0.0;  // (1/2pi) times the integral of f
};

/// u(x) = (1/2pi) int (log|x - y| - log|y|) f(y) dy over the grid annulus, so
/// that Laplacian u = f inside. f is bilinear in (radial coordinate, theta) on
/// each cell. Cells touching a target are integrated in local polar
/// coordinates (6 graded levels, checked against 12).
inline PotentialResult newtonian_potential(const ScalarField& f, std::span<const Vec2> targets) {
    const auto& g = f.grid();
    const int nr = g.n_r();
    const int nt = g.n_theta();
    std::vector<detail::Cell> cells;
    cells.reserve(static_cast<std::size_t>(nr - 1) * nt);
    bool all_zero = true;
    for (int i = 0; i + 1 < nr; ++i)
        for (int j = 0; j < nt; ++j) {
            const int j1 = g.wrap(j + 1);
            detail::Cell c{&g, i, j, {f(i, j), f(i + 1, j), f(i, j1), f(i + 1, j1)}};
            for (double v : c.f) all_zero = all_zero && v == 0.0;
            cells.push_back(c);
        }

    PotentialResult out;
    out.values.assign(targets.size(), 0.0);
    if (all_zero) return out;

    // far-field rule: 2x2 Gauss points of every cell, flattened
    struct FarPoint {
        Vec2 y;
        double w;
    };
    std::vector<FarPoint> far;
    far.reserve(cells.size() * 4);
    double mass = 0.0;
    double log_term = 0.0;
    {
        const auto& q = detail::gauss(2);
        for (const auto& c : cells)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    const double r = c.radius(q.x[a]);
                    const double w = q.w[a] * q.w[b] * c.f_at(q.x[a], q.x[b]) * c.jacobian(r);
                    far.push_back({c.point(q.x[b], r), w});
                    mass += w;
                    log_term += w * std::log(r);
                }
    }
    out.log_mass = mass / (2.0 * pi);

    const bool log_r = g.spacing() == Spacing::log_radial;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const Vec2 x = targets[t];
        double acc = -log_term;
        for (const auto& p : far) {
            const double d2 = norm2(x - p.y);
            if (d2 > 0.0) acc += 0.5 * p.w * std::log(d2);
        }
        // replace the rule on cells near the target
        const double rx = norm(x);
        if (!(rx > 0.0)) {
            out.values[t] = acc / (2.0 * pi);
            continue;
        }
        const double sx = (log_r ? std::log(rx / g.r_inner()) : rx - g.r_inner()) / g.h_radial();
        double th = std::atan2(x.y, x.x);
        if (th < 0.0) th += 2.0 * pi;
        const double tx = th / g.h_theta();
        const int ic = static_cast<int>(std::floor(sx));
        const int jc = static_cast<int>(std::floor(tx));
        for (int i = std::max(0, ic - 2); i <= std::min(nr - 2, ic + 2); ++i)
            for (int dj = -2; dj <= 2; ++dj) {
                const int j = g.wrap(jc + dj);
                const auto& c = cells[static_cast<std::size_t>(i) * nt + j];
                const double xi = sx - i;
                double eta = tx - j;
                if (eta > 0.5 * nt) eta -= nt;
                if (eta < -0.5 * nt) eta += nt;
                if (!(std::abs(xi - 0.5) < 2.0 && std::abs(eta - 0.5) < 2.0)) continue;
                acc -= detail::cell_gauss(c, x, 2);
                constexpr double eps = 1e-9;
                if (xi >= -eps && xi <= 1.0 + eps && eta >= -eps && eta <= 1.0 + eps) {
                    const double xi0 = std::clamp(xi, 0.0, 1.0);
                    const double eta0 = std::clamp(eta, 0.0, 1.0);
                    const double coarse = detail::cell_polar(c, x, xi0, eta0, 6);
                    const double fine = detail::cell_polar(c, x, xi0, eta0, 12);
                    const double rmax = c.radius(1.0);
                    const double scale =
                        std::max({std::abs(c.f[0]), std::abs(c.f[1]), std::abs(c.f[2]), std::abs(c.f[3])}) *
                        c.jacobian(rmax) * (1.0 + std::abs(std::log(rmax)));
                    if (std::abs(coarse - fine) > 1e-6 * scale + 1e-300)
                        fail(ErrorCode::singular_cell, "polar quadrature of the cell containing target " +
                                                           std::to_string(t) + " did not converge");
                    acc += coarse;
                } else {
                    acc += detail::cell_gauss(c, x, 6);
                }
            }
        out.values[t] = acc / (2.0 * pi);
    }
    return out;
}

/// Potential evaluated at every grid node, as a field on the same grid.
inline ScalarField newtonian_potential_field(const ScalarField& f, double* log_mass = nullptr) {
    const auto& g = f.grid();
    std::vector<Vec2> pts(g.size());
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j) pts[g.index(i, j)] = g.point(i, j);
    auto res = newtonian_potential(f, pts);
    if (log_mass) *log_mass = res.log_mass;
    return ScalarField(g, std::move(res.values));
}

struct GrowthFit {
    double exponent = 0.0;  // |u| ~ C R^exponent
    double log_constant = 0.0;
    double r_squared = 0.0;
};

/// Least squares slope of log|u| against log R.
inline GrowthFit fit_growth(std::span<const double> radii, std::span<const double> values) {
    if (radii.size() != values.size() || radii.size() < 2)
        fail(ErrorCode::insufficient_window, "growth fit needs at least two (radius, value) pairs");
    std::vector<DecayWindow> w;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (!(std::abs(values[k]) > 0.0)) fail(ErrorCode::domain_error, "growth fit needs nonzero values");
        // fit |u| = C R^-p and report -p
        w.push_back({radii[k], std::abs(values[k])});
    }
    const auto fit = fit_power_law(std::move(w), {}, 0.0);
    return {-fit.exponent, fit.log_constant, fit.r_squared};
}

}  // namespace exbern
