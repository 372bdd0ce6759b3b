#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace exbern {

inline constexpr double pi = std::numbers::pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }

/// Symmetric 2x2 matrix [[m11, m12], [m12, m22]].
struct Sym2 {
    double m11 = 0.0;
    double m12 = 0.0;
    double m22 = 0.0;

    static constexpr Sym2 identity() { return {1.0, 0.0, 1.0}; }
    static constexpr Sym2 diag(double a, double b) { return {a, 0.0, b}; }

    constexpr double trace() const { return m11 + m22; }
    constexpr double det() const { return m11 * m22 - m12 * m12; }
    /// Frobenius norm.
    double norm() const { return std::sqrt(m11 * m11 + 2.0 * m12 * m12 + m22 * m22); }
    Vec2 apply(Vec2 v) const { return {m11 * v.x + m12 * v.y, m12 * v.x + m22 * v.y}; }
    double quadratic_form(Vec2 v) const { return m11 * v.x * v.x + 2.0 * m12 * v.x * v.y + m22 * v.y * v.y; }
    /// Cofactor (adjugate) matrix; equals det * inverse.
    constexpr Sym2 cofactor() const { return {m22, -m12, m11}; }

    friend constexpr Sym2 operator+(Sym2 a, Sym2 b) { return {a.m11 + b.m11, a.m12 + b.m12, a.m22 + b.m22}; }
    friend constexpr Sym2 operator-(Sym2 a, Sym2 b) { return {a.m11 - b.m11, a.m12 - b.m12, a.m22 - b.m22}; }
    friend constexpr Sym2 operator*(double s, Sym2 a) { return {s * a.m11, s * a.m12, s * a.m22}; }
    friend constexpr bool operator==(Sym2, Sym2) = default;
};

/// Contraction sum_ij a_ij m_ij of two symmetric matrices.
inline constexpr double contract(Sym2 a, Sym2 m) { return a.m11 * m.m11 + 2.0 * a.m12 * m.m12 + a.m22 * m.m22; }

/// Eigenvalues in ascending order, closed form.
inline std::array<double, 2> eigenvalues(Sym2 m) {
    const double mean = 0.5 * (m.m11 + m.m22);
    const double rad = std::hypot(0.5 * (m.m11 - m.m22), m.m12);
    return {mean - rad, mean + rad};
}

struct EigenDecomposition {
    std::array<double, 2> values;  // ascending
    double angle;                  // rotation taking e1 to the eigenvector of values[0]
};

inline EigenDecomposition eigen_decompose(Sym2 m) {
    const auto values = eigenvalues(m);
    // eigenvector of the larger eigenvalue sits at angle 0.5*atan2(2 m12, m11 - m22)
    const double major = 0.5 * std::atan2(2.0 * m.m12, m.m11 - m.m22);
    return {values, major + 0.5 * pi};
}

/// Rebuild Q diag(v0, v1) Q^T for a rotation angle.
inline Sym2 from_eigen(double v0, double v1, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {v0 * c * c + v1 * s * s, (v0 - v1) * c * s, v0 * s * s + v1 * c * c};
}

/// Jacobian of a planar mapping w = (p, q): p_i = dp/dx_i, q_i = dq/dx_i.
struct Jacobian2 {
    double p1 = 0.0;
    double p2 = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;

    constexpr double det() const { return p1 * q2 - p2 * q1; }
    constexpr double frobenius2() const { return p1 * p1 + p2 * p2 + q1 * q1 + q2 * q2; }
};

}  // namespace exbern
