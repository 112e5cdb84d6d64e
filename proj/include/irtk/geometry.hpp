#pragma once

#include <cmath>

namespace irtk {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 &operator+=(const Vec2 &o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2 &operator-=(const Vec2 &o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2 &b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2 &b) { return a -= b; }
  friend constexpr Vec2 operator*(double s, const Vec2 &v) { return {s * v.x, s * v.y}; }
  friend constexpr Vec2 operator*(const Vec2 &v, double s) { return {s * v.x, s * v.y}; }
  friend constexpr bool operator==(const Vec2 &, const Vec2 &) = default;
};

inline double norm(const Vec2 &v) { return std::hypot(v.x, v.y); }
inline double distance(const Vec2 &a, const Vec2 &b) { return norm(a - b); }

// Integer pixel address; x is the column, y the row.
struct Pixel {
  int x = 0;
  int y = 0;
  friend constexpr bool operator==(const Pixel &, const Pixel &) = default;
};

inline Vec2 to_vec(const Pixel &p) { return {static_cast<double>(p.x), static_cast<double>(p.y)}; }

}  // namespace irtk
