#pragma once

#include <algorithm>
#include <cmath>

namespace jclt {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  [[nodiscard]] double norm() const { return std::hypot(x, y); }
};

/// Row-major 2x2 real matrix.
struct Mat2 {
  double a = 0.0, b = 0.0;
  double c = 0.0, d = 0.0;

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

  /// Counterclockwise rotation by `angle`.
  static Mat2 rotation(double angle) {
    const double cs = std::cos(angle);
    const double sn = std::sin(angle);
    return {cs, -sn, sn, cs};
  }

  [[nodiscard]] double det() const { return a * d - b * c; }
  [[nodiscard]] double max_abs() const {
    return std::max(std::max(std::abs(a), std::abs(b)), std::max(std::abs(c), std::abs(d)));
  }

  friend Mat2 operator*(const Mat2& l, const Mat2& r) {
    return {l.a * r.a + l.b * r.c, l.a * r.b + l.b * r.d, l.c * r.a + l.d * r.c,
            l.c * r.b + l.d * r.d};
  }
  friend Vec2 operator*(const Mat2& m, const Vec2& v) {
    return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
  }
  friend Mat2 operator+(const Mat2& l, const Mat2& r) {
    return {l.a + r.a, l.b + r.b, l.c + r.c, l.d + r.d};
  }
  friend Mat2 operator-(const Mat2& l, const Mat2& r) {
    return {l.a - r.a, l.b - r.b, l.c - r.c, l.d - r.d};
  }
  friend Mat2 operator*(double s, const Mat2& m) { return {s * m.a, s * m.b, s * m.c, s * m.d}; }
};

}  // namespace jclt
