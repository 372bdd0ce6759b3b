#pragma once

// Fully nonlinear operators F(D^2 u) and a damped Newton solver for
// F(D^2 u) = 0 on annuli with Dirichlet data.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "exbern/elliptic.hpp"
#include "exbern/error.hpp"
#include "exbern/grid.hpp"
#include "exbern/types.hpp"

namespace exbern {

struct FullyNonlinearSpec {
    std::string name;
    std::function<double(Sym2)> evaluate;
    /// Gradient of F with respect to the matrix, as a symmetric matrix, so that
    /// dF = a_11 dM_11 + 2 a_12 dM_12 + a_22 dM_22.
    std::function<Sym2(Sym2)> derivative;
    double lambda = 1.0;
    double Lambda = 1.0;
    /// Bound on |D^2 u| on which lambda and Lambda are valid.
    double hessian_bound = std::numeric_limits<double>::infinity();
    /// Branch guard; Newton rejects steps leaving this set.
    std::function<bool(Sym2)> admissible = [](Sym2) { return true; };
};

/// det M = 1 on the convex branch. With eigenvalues of M in [1/M_b, M_b] the
/// cofactor derivative has eigenvalues in the same interval.
inline FullyNonlinearSpec monge_ampere_spec(double hessian_bound = 4.0) {
    FullyNonlinearSpec s;
    s.name = "monge_ampere";
    s.evaluate = [](Sym2 m) { return m.det() - 1.0; };
    s.derivative = [](Sym2 m) { return m.cofactor(); };
    s.lambda = 1.0 / hessian_bound;
    s.Lambda = hessian_bound;
    s.hessian_bound = hessian_bound;
    s.admissible = [](Sym2 m) { return m.m11 > 0.0 && m.det() > 0.0; };
    return s;
}

/// arctan l_1 + arctan l_2 = theta for the eigenvalues l_i of M.
inline FullyNonlinearSpec special_lagrangian_spec(double theta, double hessian_bound = 4.0) {
    if (!(std::abs(theta) < pi)) fail(ErrorCode::domain_error, "special Lagrangian phase must satisfy |theta| < pi");
    FullyNonlinearSpec s;
    s.name = "special_lagrangian";
    s.evaluate = [theta](Sym2 m) {
        const auto ev = eigenvalues(m);
        return std::atan(ev[0]) + std::atan(ev[1]) - theta;
    };
    s.derivative = [](Sym2 m) {
        const auto ed = eigen_decompose(m);
        const double l0 = ed.values[0];
        const double l1 = ed.values[1];
        if (std::abs(l1 - l0) < 1e-8) {
            // f'(mu) I + f''(mu) (M - mu I) for f = arctan, smooth through coalescence
            const double mu = 0.5 * (l0 + l1);
            const double d1 = 1.0 / (1.0 + mu * mu);
            const double d2 = -2.0 * mu * d1 * d1;
            return d1 * Sym2::identity() + d2 * (m - mu * Sym2::identity());
        }
        return from_eigen(1.0 / (1.0 + l0 * l0), 1.0 / (1.0 + l1 * l1), ed.angle);
    };
    s.lambda = 1.0 / (1.0 + hessian_bound * hessian_bound);
    s.Lambda = 1.0;
    s.hessian_bound = hessian_bound;
    return s;
}

/// tr M = t, an affine operator (one Newton step solves it).
inline FullyNonlinearSpec linear_trace_spec(double t) {
    FullyNonlinearSpec s;
    s.name = "linear_trace";
    s.evaluate = [t](Sym2 m) { return m.trace() - t; };
    s.derivative = [](Sym2) { return Sym2::identity(); };
    return s;
}

enum class NewtonStatus { converged, ellipticity_lost, max_iters_exceeded, line_search_failed };

inline std::string to_string(NewtonStatus s) {
    switch (s) {
        case NewtonStatus::converged: return "converged";
        case NewtonStatus::ellipticity_lost: return "ellipticity-lost";
        case NewtonStatus::max_iters_exceeded: return "max-iters-exceeded";
        case NewtonStatus::line_search_failed: return "line-search-failed";
    }
    return "unknown";
}

struct NewtonStep {
    int iteration = 0;
    double residual = 0.0;       // max |F(D^2 u)| over interior nodes after the step
    double step = 0.0;           // accepted damping factor
    double min_eigenvalue = 0.0; // smallest eigenvalue of the linearization used
    bool boundary_lift = false;  // first step that imposes the Dirichlet data
};

struct NewtonOptions {
    double tol = 1e-10;
    int max_iters = 30;
    int max_halvings = 12;
};

struct NewtonResult {
    ScalarField u;
    std::vector<NewtonStep> trace;
    NewtonStatus status = NewtonStatus::max_iters_exceeded;
    double residual = 0.0;
    int iterations = 0;  // linear solves performed
    bool converged() const { return status == NewtonStatus::converged; }
};

namespace detail {

struct NodeEval {
    std::vector<Sym2> hessian;
    std::vector<double> residual;  // F at interior nodes, 0 on boundary rings
    double max_residual = 0.0;
    bool admissible = true;
};

inline NodeEval evaluate_nodes(const FullyNonlinearSpec& spec, const ScalarField& u,
                               const std::vector<PolarStencils>& ps) {
    const auto& g = u.grid();
    NodeEval out;
    out.hessian.resize(g.size());
    out.residual.assign(g.size(), 0.0);
    for (int i = 1; i + 1 < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j) {
            const auto k = g.index(i, j);
            const Sym2 h = hessian_at(u, ps[i], i, j);
            out.hessian[k] = h;
            if (!spec.admissible(h)) out.admissible = false;
            const double f = spec.evaluate(h);
            out.residual[k] = f;
            out.max_residual = std::isfinite(f) ? std::max(out.max_residual, std::abs(f))
                                                : std::numeric_limits<double>::infinity();
        }
    return out;
}

}  // namespace detail

/// Damped Newton iteration on the discrete system F(D^2_h u) = 0 at interior
/// nodes with u = g on the boundary rings. Each step solves the linearization
/// a_ij d_ij = -F(D^2_h u), a = dF(D^2_h u), assembled with the same stencils as
/// D^2_h, and halves the step until the residual does not increase and the
/// iterate stays admissible. If u0 does not match the boundary data, the first
/// step solves the linearization with the boundary mismatch as Dirichlet data
/// and is accepted in full.
inline NewtonResult newton_solve(const FullyNonlinearSpec& spec, const AnnularGrid& grid,
                                 std::span<const double> g_inner, std::span<const double> g_outer,
                                 const ScalarField& u0, const NewtonOptions& opt = {}) {
    if (!grid.same_layout(u0.grid())) fail(ErrorCode::grid_mismatch, "initial guess lives on a different grid");
    const int nt = grid.n_theta();
    const int nr = grid.n_r();
    if (g_inner.size() != static_cast<std::size_t>(nt) || g_outer.size() != static_cast<std::size_t>(nt))
        fail(ErrorCode::invalid_dimension, "boundary data must have n_theta values per ring");

    std::vector<PolarStencils> ps;
    for (int i = 0; i < nr; ++i) ps.push_back(polar_stencils(grid, i));
    DirichletOperator op(grid);

    NewtonResult res{ScalarField(grid, std::vector<double>(u0.values().begin(), u0.values().end())), {},
                     NewtonStatus::max_iters_exceeded, 0.0, 0};
    ScalarField& u = res.u;
    auto ev = detail::evaluate_nodes(spec, u, ps);
    res.residual = ev.max_residual;

    std::vector<Sym2> a(grid.size(), Sym2::identity());
    std::vector<double> rhs(grid.size(), 0.0);
    const std::vector<double> zeros(static_cast<std::size_t>(nt), 0.0);

    // returns the smallest eigenvalue, or a non-positive value on failure
    auto linearize = [&](const detail::NodeEval& e) {
        double min_ev = std::numeric_limits<double>::infinity();
        for (int i = 1; i + 1 < nr; ++i)
            for (int j = 0; j < nt; ++j) {
                const auto k = grid.index(i, j);
                a[k] = spec.derivative(e.hessian[k]);
                rhs[k] = -e.residual[k];
                min_ev = std::min(min_ev, eigenvalues(a[k])[0]);
            }
        return min_ev;
    };

    double mismatch = 0.0;
    std::vector<double> lift_in(static_cast<std::size_t>(nt)), lift_out(static_cast<std::size_t>(nt));
    for (int j = 0; j < nt; ++j) {
        lift_in[j] = g_inner[j] - u(0, j);
        lift_out[j] = g_outer[j] - u(nr - 1, j);
        mismatch = std::max({mismatch, std::abs(lift_in[j]), std::abs(lift_out[j])});
    }
    if (mismatch > 0.0) {
        const double min_ev = linearize(ev);
        if (!(min_ev > 0.0)) {
            res.status = NewtonStatus::ellipticity_lost;
            res.trace.push_back({0, ev.max_residual, 0.0, min_ev, true});
            return res;
        }
        const auto d = op.solve(a, rhs, lift_in, lift_out);
        auto v = u.values();
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += d[k];
        ev = detail::evaluate_nodes(spec, u, ps);
        res.residual = ev.max_residual;
        ++res.iterations;
        res.trace.push_back({res.iterations, ev.max_residual, 1.0, min_ev, true});
    }

    while (true) {
        if (res.residual <= opt.tol && ev.admissible) {
            res.status = NewtonStatus::converged;
            return res;
        }
        if (res.iterations >= opt.max_iters) {
            res.status = NewtonStatus::max_iters_exceeded;
            return res;
        }
        const double min_ev = linearize(ev);
        if (!(min_ev > 0.0) || !std::isfinite(min_ev)) {
            res.status = NewtonStatus::ellipticity_lost;
            res.trace.push_back({res.iterations, res.residual, 0.0, min_ev, false});
            return res;
        }
        const auto d = op.solve(a, rhs, zeros, zeros);
        ++res.iterations;

        const std::vector<double> base(u.values().begin(), u.values().end());
        double s = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, s *= 0.5) {
            auto v = u.values();
            for (std::size_t k = 0; k < v.size(); ++k) v[k] = base[k] + s * d[k];
            auto trial = detail::evaluate_nodes(spec, u, ps);
            if (trial.admissible && trial.max_residual <= res.residual) {
                ev = std::move(trial);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            std::copy(base.begin(), base.end(), u.values().begin());
            res.status = NewtonStatus::line_search_failed;
            res.trace.push_back({res.iterations, res.residual, 0.0, min_ev, false});
            return res;
        }
        res.residual = ev.max_residual;
        res.trace.push_back({res.iterations, res.residual, s, min_ev, false});
    }
}

/// Residual max-norm of F(D^2_h u) over interior nodes.
inline double equation_residual(const FullyNonlinearSpec& spec, const ScalarField& u) {
    std::vector<PolarStencils> ps;
    for (int i = 0; i < u.grid().n_r(); ++i) ps.push_back(polar_stencils(u.grid(), i));
    return detail::evaluate_nodes(spec, u, ps).max_residual;
}

struct RadialProfile {
    double u;
    double du;
    double d2u;
};

/// Radial solution of det D^2 u = 1 with u'(r) = sqrt(r^2 + a):
/// u = (r sqrt(r^2 + a) + a log(r + sqrt(r^2 + a))) / 2.
inline RadialProfile radial_ma_reference(double a, double r) {
    if (!(a >= 0.0)) fail(ErrorCode::domain_error, "radial reference needs a >= 0");
    if (!(r > 0.0)) fail(ErrorCode::domain_error, "radial reference needs r > 0");
    const double q = std::sqrt(r * r + a);
    const double u = a == 0.0 ? 0.5 * r * r : 0.5 * (r * q + a * std::log(r + q));
    return {u, q, r / q};
}

inline ScalarField radial_ma_field(const AnnularGrid& g, double a) {
    return sample(g, [a](Vec2 x) { return radial_ma_reference(a, norm(x)).u; });
}

/// Exact gradient of the radial reference, u'(r) x / r.
inline Vec2 radial_ma_gradient(double a, Vec2 x) {
    const double r = norm(x);
    return (radial_ma_reference(a, r).du / r) * x;
}

/// Exact Hessian of the radial reference.
inline Sym2 radial_ma_hessian(double a, Vec2 x) {
    const double r = norm(x);
    const auto p = radial_ma_reference(a, r);
    const double c = x.x / r, s = x.y / r;
    const double t = p.du / r;
    return {p.d2u * c * c + t * s * s, (p.d2u - t) * c * s, p.d2u * s * s + t * c * c};
}

}  // namespace exbern
