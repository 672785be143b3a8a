// Basic 2D vector/matrix types, rectangles, quadrature helpers and a small
// deterministic thread pool used by the heavier integrators.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sbd {

struct Vec2 {
  double x = 0.0, y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  Vec2 operator-() const { return {-x, -y}; }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
  Vec2 normalized() const {
    const double n = norm();
    return n > 0 ? Vec2{x / n, y / n} : Vec2{0, 0};
  }
  Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// General 2x2 matrix; symmetric uses are by convention.
struct Mat2 {
  // row-major: [a b; c d]
  double a = 0, b = 0, c = 0, d = 0;

  Mat2() = default;
  Mat2(double a_, double b_, double c_, double d_) : a(a_), b(b_), c(c_), d(d_) {}

  static Mat2 zero() { return {}; }
  static Mat2 identity() { return {1, 0, 0, 1}; }
  static Mat2 rotation(double t) {
    const double co = std::cos(t), si = std::sin(t);
    return {co, -si, si, co};
  }

  Vec2 apply(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  Mat2 mul(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Mat2 transpose() const { return {a, c, b, d}; }
  Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
  Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
  Mat2 sym() const { return {a, 0.5 * (b + c), 0.5 * (b + c), d}; }
  double frobenius() const { return std::sqrt(a * a + b * b + c * c + d * d); }
};

// Oriented rectangle: center, half widths, rotation angle. Containment and
// local coordinates are computed in the rotated frame.
struct Rect {
  Vec2 center{0, 0};
  Vec2 half{1, 1};
  double angle = 0.0;

  Rect() = default;
  Rect(Vec2 c, Vec2 h, double ang = 0.0) : center(c), half(h), angle(ang) {
    if (!(half.x > 0 && half.y > 0))
      throw std::invalid_argument("Rect: half widths must be positive");
  }

  static Rect from_bounds(double x0, double y0, double x1, double y1) {
    return Rect({0.5 * (x0 + x1), 0.5 * (y0 + y1)}, {0.5 * (x1 - x0), 0.5 * (y1 - y0)}, 0.0);
  }

  bool axis_aligned() const { return angle == 0.0; }

  Vec2 to_local(const Vec2& p) const {
    const Vec2 d = p - center;
    if (angle == 0.0) return d;
    const double co = std::cos(angle), si = std::sin(angle);
    return {co * d.x + si * d.y, -si * d.x + co * d.y};
  }
  Vec2 from_local(const Vec2& q) const {
    if (angle == 0.0) return center + q;
    const double co = std::cos(angle), si = std::sin(angle);
    return {center.x + co * q.x - si * q.y, center.y + si * q.x + co * q.y};
  }
  // Rotate a displacement vector from local frame to global frame.
  Vec2 vec_from_local(const Vec2& v) const {
    if (angle == 0.0) return v;
    const double co = std::cos(angle), si = std::sin(angle);
    return {co * v.x - si * v.y, si * v.x + co * v.y};
  }
  Vec2 vec_to_local(const Vec2& v) const {
    if (angle == 0.0) return v;
    const double co = std::cos(angle), si = std::sin(angle);
    return {co * v.x + si * v.y, -si * v.x + co * v.y};
  }

  bool contains(const Vec2& p) const {
    const Vec2 q = to_local(p);
    return std::abs(q.x) <= half.x && std::abs(q.y) <= half.y;
  }
  bool contains_strict(const Vec2& p) const {
    const Vec2 q = to_local(p);
    return std::abs(q.x) < half.x && std::abs(q.y) < half.y;
  }

  double area() const { return 4.0 * half.x * half.y; }

  Rect dilated(double t) const { return Rect(center, {half.x + t, half.y + t}, angle); }

  std::array<Vec2, 4> corners() const {
    return {from_local({-half.x, -half.y}), from_local({half.x, -half.y}),
            from_local({half.x, half.y}), from_local({-half.x, half.y})};
  }

  // Smallest axis-aligned rect containing this one.
  Rect bounding_box() const {
    if (angle == 0.0) return *this;
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const Vec2& c : corners()) {
      x0 = std::min(x0, c.x); x1 = std::max(x1, c.x);
      y0 = std::min(y0, c.y); y1 = std::max(y1, c.y);
    }
    return Rect::from_bounds(x0, y0, x1, y1);
  }

  // True if this rect, dilated by `margin`, is contained in `outer`.
  bool within(const Rect& outer, double margin = 0.0) const {
    for (const Vec2& c : dilated(margin).corners())
      if (!outer.contains(c)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// quadrature helpers

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
struct Gauss16 {
  static const std::array<double, 16>& nodes() {
    static const std::array<double, 16> n = {
        -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
        -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
        -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
        0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
        0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
        0.9894009349916499};
    return n;
  }
  static const std::array<double, 16>& weights() {
    static const std::array<double, 16> w = {
        0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
        0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
        0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
        0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
        0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
        0.0271524594117541};
    return w;
  }
};

// Adaptive Simpson on [a, b].
namespace detail {
inline double simpson(const std::function<double(double)>& f, double a, double fa,
                      double b, double fb, double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}
inline double adapt(const std::function<double(double)>& f, double a, double fa,
                    double b, double fb, double m, double fm, double whole,
                    double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, fa, m, fm, lm, flm);
  const double right = simpson(f, m, fm, b, fb, rm, frm);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-12, int max_depth = 48) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = detail::simpson(f, a, fa, b, fb, m, fm);
  return detail::adapt(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

// ---------------------------------------------------------------------------
// deterministic parallel map-reduce

// Global worker count for parallel loops (1 = serial). Results are identical
// for any thread count: the reduction order is fixed by chunk index.
inline int& thread_count() {
  static int n = 1;
  return n;
}

inline void set_thread_count(int n) {
  thread_count() = std::max(1, n);
}

// Runs body(i) for i in [0, n). Deterministic work split.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body) {
  const int nt = std::min<std::int64_t>(thread_count(), n > 0 ? n : 1);
  if (nt <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([=, &body]() {
      for (std::int64_t i = t; i < n; i += nt) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Sum of term(i) over i in [0, n), accumulated per fixed-size chunk and
// reduced in chunk order, so the result does not depend on the thread count.
inline double parallel_sum(std::int64_t n, const std::function<double(std::int64_t)>& term) {
  if (n <= 0) return 0.0;
  const std::int64_t chunk = 1024;
  const std::int64_t nchunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(static_cast<size_t>(nchunks), 0.0);
  parallel_for(nchunks, [&](std::int64_t c) {
    double s = 0.0;
    const std::int64_t lo = c * chunk, hi = std::min(n, lo + chunk);
    for (std::int64_t i = lo; i < hi; ++i) s += term(i);
    partial[static_cast<size_t>(c)] = s;
  });
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

constexpr double kSqrt2 = 1.4142135623730951;

}  // namespace sbd
