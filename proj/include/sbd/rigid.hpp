// Projection onto infinitesimal rigid motions: closed-form L2 fit over a cube
// with geometric exceptional-cell exclusion near the jump set, plus measured
// Korn-Poincare ratios.
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "sbd/core.hpp"
#include "sbd/field.hpp"
#include "sbd/geometry.hpp"

namespace sbd {

// a(x) = b + W x with W = [[0, w], [-w, 0]]; e(a) = 0 by construction.
struct RigidMotion {
  Vec2 b{0, 0};
  double omega = 0.0;

  Vec2 operator()(const Vec2& x) const {
    return {b.x + omega * x.y, b.y - omega * x.x};
  }
  Mat2 W() const { return {0, omega, -omega, 0}; }
};

inline SbdField rigid_field(const RigidMotion& a, const Rect& domain, double h) {
  SbdField f;
  f.domain = domain;
  f.h = h;
  f.eval = [a](const Vec2& x) { return a(x); };
  f.jac = [a](const Vec2& x) {
    (void)x;
    return a.W();
  };
  return f;
}

struct FitResult {
  RigidMotion motion;
  double l1_residual = 0;
  double lp_residual = 0;
  std::vector<Rect> exceptional_cells;
  double exceptional_area = 0;
  bool degenerate = false;  // every cell exceptional; motion is the plain mean
};

// Area bound for the exceptional cells: cells (size h) whose center lies
// within 2h of a segment of length L fit inside (L + 4h) x (4h + 2*sqrt2*h).
inline double exceptional_area_bound(const SbdField& f, const Rect& cube) {
  const double h = f.h;
  double bound = 0;
  const Rect reach = cube.dilated(2 * h + h);
  for (const auto& j : f.jumps.segments) {
    auto c = clip_segment(j.geom, reach);
    if (!c) continue;
    bound += (c->length() + 4 * h) * (4 * h + 2 * kSqrt2 * h);
  }
  return bound;
}

// Least-squares rigid motion over cube \ exceptional cells (pass
// exclude_near_jump = false for the plain whole-cell fit of the
// Korn-Poincare-in-BD flavour, which stays bounded on cells the jump set
// cuts in two). The normal equations are solved in coordinates centered at
// the cube for conditioning; the returned motion is in global coordinates.
inline FitResult fit_rigid(const SbdField& f, const Rect& cube, double p = 2.0,
                           bool exclude_near_jump = true) {
  FitResult res;
  const double h = f.h;
  const int nx = std::max(1, static_cast<int>(std::ceil(2 * cube.half.x / h)));
  const int ny = std::max(1, static_cast<int>(std::ceil(2 * cube.half.y / h)));
  const double dx = 2 * cube.half.x / nx, dy = 2 * cube.half.y / ny;
  const double cell_area = dx * dy;
  const std::vector<Segment> jump_geom = f.jumps.geometry();

  std::vector<Vec2> pts;
  std::vector<Vec2> vals;
  pts.reserve(static_cast<size_t>(nx) * ny);
  for (int jy = 0; jy < ny; ++jy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Vec2 loc{-cube.half.x + (ix + 0.5) * dx, -cube.half.y + (jy + 0.5) * dy};
      const Vec2 x = cube.from_local(loc);
      const bool exceptional = exclude_near_jump && !jump_geom.empty() &&
                               distance_to_segments(x, jump_geom) <= 2 * h;
      if (exceptional) {
        res.exceptional_cells.push_back(
            Rect(x, {0.5 * dx, 0.5 * dy}, cube.angle));
      } else {
        pts.push_back(x);
        vals.push_back(f.eval(x));
      }
    }
  }
  res.exceptional_area = cell_area * static_cast<double>(res.exceptional_cells.size());

  const Vec2 c0 = cube.center;
  if (pts.empty()) {
    // fully exceptional: constant motion from the plain mean over the cube
    res.degenerate = true;
    Vec2 mean{0, 0};
    int n = 0;
    for (int jy = 0; jy < ny; ++jy)
      for (int ix = 0; ix < nx; ++ix) {
        const Vec2 loc{-cube.half.x + (ix + 0.5) * dx, -cube.half.y + (jy + 0.5) * dy};
        mean += f.eval(cube.from_local(loc));
        ++n;
      }
    res.motion.b = mean / std::max(1, n);
    res.motion.omega = 0;
    return res;
  }

  // unknowns (b1, b2, w) for a(x) = (b1 + w y2, b2 - w y1), y = x - c0
  double N = 0, Sy1 = 0, Sy2 = 0, Sr2 = 0;
  double Su1 = 0, Su2 = 0, Sm = 0;  // Sm = sum(y2 u1 - y1 u2)
  for (size_t i = 0; i < pts.size(); ++i) {
    const Vec2 y = pts[i] - c0;
    const Vec2 u = vals[i];
    N += 1;
    Sy1 += y.x;
    Sy2 += y.y;
    Sr2 += y.norm2();
    Su1 += u.x;
    Su2 += u.y;
    Sm += y.y * u.x - y.x * u.y;
  }
  // | N   0   -Sy2 | |b1|   |Su1|
  // | 0   N    Sy1 | |b2| = |Su2|
  // |-Sy2 Sy1  Sr2 | |w |   |Sm |
  const double A[3][3] = {{N, 0, -Sy2}, {0, N, Sy1}, {-Sy2, Sy1, Sr2}};
  const double rhs[3] = {Su1, Su2, Sm};
  const double det = A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
                     A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
                     A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
  double b1, b2, w;
  if (std::abs(det) < 1e-30) {
    b1 = Su1 / N;
    b2 = Su2 / N;
    w = 0;
    res.degenerate = true;
  } else {
    auto solve_col = [&](int col) {
      double M[3][3];
      for (int r = 0; r < 3; ++r)
        for (int cc = 0; cc < 3; ++cc) M[r][cc] = A[r][cc];
      for (int r = 0; r < 3; ++r) M[r][col] = rhs[r];
      return M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
             M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
             M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
    };
    b1 = solve_col(0) / det;
    b2 = solve_col(1) / det;
    w = solve_col(2) / det;
  }
  // recenter: a(x) = (b1 + w(x2 - c2), b2 - w(x1 - c1))
  res.motion.omega = w;
  res.motion.b = {b1 - w * c0.y, b2 + w * c0.x};

  double l1 = 0, lp = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const double r = (vals[i] - res.motion(pts[i])).norm();
    l1 += r * cell_area;
    lp += std::pow(r, p) * cell_area;
  }
  res.l1_residual = l1;
  res.lp_residual = std::pow(lp, 1.0 / p);
  return res;
}

struct KornPoincareRatios {
  double l1_ratio = 0, lp_ratio = 0;
  double l1_numerator = 0, l1_denominator = 0;
  double lp_numerator = 0, lp_denominator = 0;
  bool degenerate = false;
};

// Measured constants of the Korn-Poincare inequalities: numerators are the
// distance from the fitted motion over the half cube Q' minus the exceptional
// cells, denominators r * ||e(u)|| over the full cube. 0/0 reports as 0.
inline KornPoincareRatios check_korn_poincare(const SbdField& f, const Rect& cube,
                                              double p) {
  KornPoincareRatios out;
  const FitResult fit = fit_rigid(f, cube, p);
  out.degenerate = fit.degenerate;
  const RigidMotion a = fit.motion;
  const Rect inner(cube.center, cube.half * 0.5, cube.angle);
  const double r = 2 * cube.half.x;  // sidelength
  const std::vector<Segment> jump_geom = f.jumps.geometry();
  const double h = f.h;

  double num1 = 0, nump = 0;
  const int nx = std::max(1, static_cast<int>(std::ceil(2 * inner.half.x / h)));
  const int ny = std::max(1, static_cast<int>(std::ceil(2 * inner.half.y / h)));
  const double dx = 2 * inner.half.x / nx, dy = 2 * inner.half.y / ny;
  for (int jy = 0; jy < ny; ++jy)
    for (int ix = 0; ix < nx; ++ix) {
      const Vec2 loc{-inner.half.x + (ix + 0.5) * dx, -inner.half.y + (jy + 0.5) * dy};
      const Vec2 x = inner.from_local(loc);
      if (!jump_geom.empty() && distance_to_segments(x, jump_geom) <= 2 * h) continue;
      const double rr = (f.eval(x) - a(x)).norm();
      num1 += rr * dx * dy;
      nump += std::pow(rr, p) * dx * dy;
    }
  nump = std::pow(nump, 1.0 / p);

  const double den1 =
      r * quad_region(cube, h, [&](const Vec2& x) { return f.jac(x).sym().frobenius(); });
  const double denp =
      r * std::pow(quad_region(cube, h,
                               [&](const Vec2& x) {
                                 return std::pow(f.jac(x).sym().frobenius(), p);
                               }),
                   1.0 / p);
  out.l1_numerator = num1;
  out.lp_numerator = nump;
  out.l1_denominator = den1;
  out.lp_denominator = denp;
  const double tiny = 1e-14;
  const double inf = std::numeric_limits<double>::infinity();
  out.l1_ratio = (den1 < tiny) ? (num1 < tiny ? 0.0 : inf) : num1 / den1;
  out.lp_ratio = (denp < tiny) ? (nump < tiny ? 0.0 : inf) : nump / denp;
  return out;
}

}  // namespace sbd
