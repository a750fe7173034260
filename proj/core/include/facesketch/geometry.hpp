#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace facesketch {

// Control-point coordinates live in a normalized [0,1] canvas frame. Values may
// drift outside during optimization; writes into strokes clamp to this margin.
inline constexpr double kCoordClampLo = -0.1;
inline constexpr double kCoordClampHi = 1.1;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double squared_norm() const { return x * x + y * y; }
    double norm() const { return std::sqrt(squared_norm()); }

    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline double squared_distance(const Vec2& a, const Vec2& b) {
    return (a - b).squared_norm();
}

inline double distance(const Vec2& a, const Vec2& b) {
    return std::sqrt(squared_distance(a, b));
}

inline double clamp_coord(double v) {
    return std::clamp(v, kCoordClampLo, kCoordClampHi);
}

inline Vec2 clamp_control_point(const Vec2& p) {
    return {clamp_coord(p.x), clamp_coord(p.y)};
}

// Bernstein basis of the cubic Bezier at parameter t.
inline std::array<double, 4> cubic_bernstein(double t) {
    const double u = 1.0 - t;
    return {u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t};
}

inline Vec2 cubic_bezier_point(const std::array<Vec2, 4>& p, double t) {
    const auto b = cubic_bernstein(t);
    return {b[0] * p[0].x + b[1] * p[1].x + b[2] * p[2].x + b[3] * p[3].x,
            b[0] * p[0].y + b[1] * p[1].y + b[2] * p[2].y + b[3] * p[3].y};
}

// Squared distance from point q to segment [a,b]; also reports the segment
// parameter u in [0,1] of the closest point.
inline double point_segment_squared_distance(const Vec2& q, const Vec2& a, const Vec2& b,
                                             double* u_out = nullptr) {
    const Vec2 ab = b - a;
    const double len2 = ab.squared_norm();
    double u = 0.0;
    if (len2 > 0.0) {
        u = std::clamp((q - a).dot(ab) / len2, 0.0, 1.0);
    }
    const Vec2 foot = a + ab * u;
    if (u_out) *u_out = u;
    return squared_distance(q, foot);
}

// Deterministic uniform doubles derived from raw 64-bit RNG output.
// uniform_real_distribution is implementation-defined, so seeded runs use
// this instead to keep manifests replayable across toolchains.
template <typename Rng>
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Rng>
inline double uniform_in(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

} // namespace facesketch
