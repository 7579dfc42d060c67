#pragma once

#include <cmath>

namespace sgfem {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    friend Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
    friend double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
};

/// Axis-aligned square [x0, x0 + side] x [y0, y0 + side].
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double side = 1.0;

    double area() const noexcept { return side * side; }
    double x1() const noexcept { return x0 + side; }
    double y1() const noexcept { return y0 + side; }

    static Rect unit() { return {0.0, 0.0, 1.0}; }
    static Rect symmetric() { return {-1.0, -1.0, 2.0}; }
};

} // namespace sgfem
