#ifndef KINETIC_MAT2_HPP
#define KINETIC_MAT2_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "kinetic/error.hpp"

namespace kinetic {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Plane vector; in the oscillator picture (x, y) = (position, momentum).
struct Vec2
{
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    constexpr Vec2& operator/=(double s) { x /= s; y /= s; return *this; }

    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
constexpr Vec2 operator/(Vec2 a, double s) { return a /= s; }

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
/// z-component of a x b; zero iff a and b are parallel.
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline bool is_finite(const Vec2& a) { return std::isfinite(a.x) && std::isfinite(a.y); }

inline Vec2 normalized(const Vec2& a)
{
    const double n = norm(a);
    if (!(n > 0.0) || !std::isfinite(n))
        throw DomainError("normalized: vector must be nonzero and finite");
    return a / n;
}

/// |sin| of the angle between two nonzero vectors.
inline double parallel_defect(const Vec2& a, const Vec2& b)
{
    return std::abs(cross(a, b)) / (norm(a) * norm(b));
}

/// Row-major 2x2 real matrix ((a11, a12), (a21, a22)).
struct Mat2
{
    double a11 = 0.0;
    double a12 = 0.0;
    double a21 = 0.0;
    double a22 = 0.0;

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 zero() { return {}; }
    static constexpr Mat2 from_columns(const Vec2& c1, const Vec2& c2) { return {c1.x, c2.x, c1.y, c2.y}; }

    constexpr Vec2 col1() const { return {a11, a21}; }
    constexpr Vec2 col2() const { return {a12, a22}; }

    constexpr Mat2& operator+=(const Mat2& o)
    {
        a11 += o.a11; a12 += o.a12; a21 += o.a21; a22 += o.a22;
        return *this;
    }
    constexpr Mat2& operator-=(const Mat2& o)
    {
        a11 -= o.a11; a12 -= o.a12; a21 -= o.a21; a22 -= o.a22;
        return *this;
    }
    constexpr Mat2& operator*=(double s)
    {
        a11 *= s; a12 *= s; a21 *= s; a22 *= s;
        return *this;
    }

    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

constexpr Mat2 operator+(Mat2 a, const Mat2& b) { return a += b; }
constexpr Mat2 operator-(Mat2 a, const Mat2& b) { return a -= b; }
constexpr Mat2 operator*(double s, Mat2 a) { return a *= s; }
constexpr Mat2 operator*(Mat2 a, double s) { return a *= s; }

constexpr Mat2 operator*(const Mat2& a, const Mat2& b)
{
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

constexpr Vec2 operator*(const Mat2& a, const Vec2& v)
{
    return {a.a11 * v.x + a.a12 * v.y, a.a21 * v.x + a.a22 * v.y};
}

constexpr double det(const Mat2& a) { return a.a11 * a.a22 - a.a12 * a.a21; }
constexpr double trace(const Mat2& a) { return a.a11 + a.a22; }
constexpr Mat2 transpose(const Mat2& a) { return {a.a11, a.a21, a.a12, a.a22}; }

inline double frobenius_norm(const Mat2& a)
{
    return std::sqrt(a.a11 * a.a11 + a.a12 * a.a12 + a.a21 * a.a21 + a.a22 * a.a22);
}

/// Spectral (operator 2-) norm, the largest singular value.
inline double norm(const Mat2& a)
{
    const double f2 = a.a11 * a.a11 + a.a12 * a.a12 + a.a21 * a.a21 + a.a22 * a.a22;
    const double d = det(a);
    const double disc = std::max(0.0, f2 * f2 - 4.0 * d * d);
    return std::sqrt(0.5 * (f2 + std::sqrt(disc)));
}

/// Largest entrywise difference; used by tests and invariant checks.
inline double max_abs_diff(const Mat2& a, const Mat2& b)
{
    return std::max({std::abs(a.a11 - b.a11), std::abs(a.a12 - b.a12),
                     std::abs(a.a21 - b.a21), std::abs(a.a22 - b.a22)});
}

inline bool is_finite(const Mat2& a)
{
    return std::isfinite(a.a11) && std::isfinite(a.a12) && std::isfinite(a.a21) && std::isfinite(a.a22);
}

/// Companion matrix of x'' + alpha x' + beta x = 0.
constexpr Mat2 kinetic_matrix(double alpha, double beta) { return {0.0, 1.0, -beta, -alpha}; }

constexpr bool is_kinetic(const Mat2& a) { return a.a11 == 0.0 && a.a12 == 1.0; }

/// Generator of the elliptical rotation: ((0, 1), (-theta^2, 0)).
inline Mat2 rotation_generator(double theta)
{
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw DomainError("rotation_generator: theta must be positive, got " + std::to_string(theta));
    return {0.0, 1.0, -theta * theta, 0.0};
}

/// Time-t fundamental solution of rotation_generator(theta). Unimodular.
inline Mat2 rotation_flow(double theta, double t)
{
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw DomainError("rotation_flow: theta must be positive, got " + std::to_string(theta));
    const double c = std::cos(theta * t);
    const double s = std::sin(theta * t);
    return {c, s / theta, -theta * s, c};
}

/// The stretch generator S = ((0, 1), (1, 0)).
inline constexpr Mat2 stretch_generator() { return {0.0, 1.0, 1.0, 0.0}; }

/// exp(S t). Eigenpairs (e^t, (1, 1)) and (e^-t, (-1, 1)).
inline Mat2 stretch_flow(double t)
{
    const double c = std::cosh(t);
    const double s = std::sinh(t);
    if (!std::isfinite(c) || !std::isfinite(s))
        throw RangeError("stretch_flow: cosh overflows at t = " + std::to_string(t));
    return {c, s, s, c};
}

namespace detail {

/// Clockwise directed angle from u to v, in (0, 2pi].
inline double clockwise_angle(const Vec2& u, const Vec2& v)
{
    double a = -std::atan2(cross(u, v), dot(u, v));
    while (a <= 0.0)
        a += two_pi;
    while (a > two_pi)
        a -= two_pi;
    return a;
}

inline double alignment_mismatch(double theta, const Vec2& u, const Vec2& v)
{
    return cross(rotation_flow(theta, 1.0) * u, v);
}

} // namespace detail

/**
 * Frequency theta in (0, 2pi] for which the time-1 elliptical rotation carries
 * the line of u onto the line of v:  rotation_flow(theta, 1) u = gamma v, gamma != 0.
 *
 * Parallel inputs return 2pi, whose time-1 flow is the identity. Otherwise the
 * cross product of the image with v is scanned on a 1024-point grid, each sign
 * change is refined by bisection, and the root closest to the clockwise angle
 * from u to v is returned.
 */
inline double solve_alignment_theta(const Vec2& u, const Vec2& v)
{
    if (!(norm(u) > 0.0) || !(norm(v) > 0.0) || !is_finite(u) || !is_finite(v))
        throw DomainError("solve_alignment_theta: u and v must be nonzero and finite");
    const Vec2 un = normalized(u);
    const Vec2 vn = normalized(v);
    if (std::abs(cross(un, vn)) <= 1e-12)
        return two_pi;

    const double guess = detail::clockwise_angle(un, vn);
    constexpr int grid = 1024;
    std::vector<double> roots;

    double lo = 1e-12;
    double flo = detail::alignment_mismatch(lo, un, vn);
    for (int k = 1; k <= grid; ++k) {
        const double hi = two_pi * static_cast<double>(k) / grid;
        const double fhi = detail::alignment_mismatch(hi, un, vn);
        if (fhi == 0.0) {
            roots.push_back(hi);
        } else if (flo != 0.0 && std::signbit(flo) != std::signbit(fhi)) {
            double a = lo, b = hi, fa = flo;
            for (int it = 0; it < 200 && b - a > 4e-16 * b; ++it) {
                const double m = 0.5 * (a + b);
                const double fm = detail::alignment_mismatch(m, un, vn);
                if (fm == 0.0) {
                    a = b = m;
                    break;
                }
                if (std::signbit(fm) == std::signbit(fa)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        lo = hi;
        flo = fhi;
    }

    double best = 0.0;
    double best_residual = 1.0;
    double best_distance = 1e300;
    for (double root : roots) {
        const double residual = parallel_defect(rotation_flow(root, 1.0) * un, vn);
        if (residual > 1e-9) {
            best_residual = std::min(best_residual, residual);
            continue;
        }
        const double distance = std::abs(root - guess);
        if (distance < best_distance) {
            best_distance = distance;
            best = root;
        }
    }
    if (best_distance == 1e300)
        throw NumericalError("solve_alignment_theta: no aligning frequency found", 0.0, best_residual);
    return best;
}

} // namespace kinetic

#endif // KINETIC_MAT2_HPP
