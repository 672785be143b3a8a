// Discrete SBD field model: a piecewise-smooth displacement evaluator with an
// explicit jump set (oriented segments + amplitude evaluators), plus the
// measures the density theorems quantify: Eu = E^a u + E^j u, L^p strain
// norms, jump energy and the BD distance. The Cantor part has no
// representation here.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sbd/core.hpp"
#include "sbd/expr.hpp"
#include "sbd/geometry.hpp"

namespace sbd {

using VecFn = std::function<Vec2(const Vec2&)>;
using MatFn = std::function<Mat2(const Vec2&)>;

// symmetric tensor product (a (x) b + b (x) a)/2; |a . b| in [|a||b|/sqrt2, |a||b|]
inline Mat2 sym_tensor_product(const Vec2& a, const Vec2& b) {
  return {a.x * b.x, 0.5 * (a.x * b.y + a.y * b.x), 0.5 * (a.x * b.y + a.y * b.x),
          a.y * b.y};
}

struct JumpSegment {
  Segment geom;
  VecFn amplitude;  // [u] = u+ - u- along geom (+ side = geom.normal side)

  Vec2 amp_at(const Vec2& x) const { return amplitude(x); }
};

struct JumpSet {
  std::vector<JumpSegment> segments;

  bool empty() const { return segments.empty(); }
  double total_length() const {
    double s = 0;
    for (const auto& j : segments) s += j.geom.length();
    return s;
  }
  std::vector<Segment> geometry() const {
    std::vector<Segment> g;
    g.reserve(segments.size());
    for (const auto& j : segments) g.push_back(j.geom);
    return g;
  }
  std::vector<Vec2> midpoint_amplitudes() const {
    std::vector<Vec2> a;
    a.reserve(segments.size());
    for (const auto& j : segments) a.push_back(j.amplitude(j.geom.midpoint()));
    return a;
  }
};

// A crack: polyline dividing its neighbourhood, plus the ambient extension of
// the amplitude. The field adds `amp` on the normal side of the polyline.
// Side lookups use an interval index over the vertex x-coordinates; it is
// exact for graph-like polylines (monotone x), which is what the field
// vocabulary produces, and falls back to a full scan otherwise.
struct Crack {
  Polyline curve;
  PolyField amp;

  void build_index() {
    segs_ = curve.segments();
    monotone_x_ = true;
    for (size_t i = 0; i + 1 < curve.vertices.size(); ++i)
      if (curve.vertices[i + 1].x <= curve.vertices[i].x) monotone_x_ = false;
  }

  // +1 on the normal side, -1 on the other.
  int side_of(const Vec2& x) const {
    if (segs_.empty() || segs_.size() != curve.segment_count()) {
      // not indexed; scan
      double best = std::numeric_limits<double>::infinity();
      size_t bi = 0;
      Vec2 bp;
      for (size_t i = 0; i < curve.segment_count(); ++i) {
        const Segment s = curve.segment(i);
        const Vec2 cp = s.at(s.closest_t(x));
        const double d = (x - cp).norm2();
        if (d < best) {
          best = d;
          bi = i;
          bp = cp;
        }
      }
      return (x - bp).dot(curve.normals[bi]) >= 0.0 ? 1 : -1;
    }
    size_t lo = 0, hi = segs_.size();
    if (monotone_x_) {
      // binary search for the segment bracketing x.x, then check neighbours
      size_t a = 0, b = segs_.size() - 1;
      while (a < b) {
        const size_t m = (a + b) / 2;
        if (segs_[m].p1.x < x.x)
          a = m + 1;
        else
          b = m;
      }
      lo = a > 2 ? a - 2 : 0;
      hi = std::min(segs_.size(), a + 3);
    }
    double best = std::numeric_limits<double>::infinity();
    size_t bi = lo;
    Vec2 bp = segs_[lo].p0;
    for (size_t i = lo; i < hi; ++i) {
      const Vec2 cp = segs_[i].at(segs_[i].closest_t(x));
      const double d = (x - cp).norm2();
      if (d < best) {
        best = d;
        bi = i;
        bp = cp;
      }
    }
    return (x - bp).dot(segs_[bi].normal) >= 0.0 ? 1 : -1;
  }

 private:
  std::vector<Segment> segs_;
  bool monotone_x_ = true;
};

struct SbdField {
  Rect domain;
  double h = 1.0 / 128.0;  // sampling resolution for quadrature
  VecFn eval;              // smooth part, side-dispatched across the jump set
  MatFn jac;               // Jacobian of the smooth part (exact where analytic)
  JumpSet jumps;
  std::optional<Rect> target;  // approximation subdomain for pipelines
  std::vector<std::shared_ptr<void>> retain;  // owners of captured state

  Vec2 operator()(const Vec2& x) const { return eval(x); }
  Mat2 strain(const Vec2& x) const { return jac(x).sym(); }
  Rect target_or_domain() const { return target ? *target : domain; }
};

// Orthonormal frame (possibly improper, det = -1) for pull-backs between the
// global plane and cube-local coordinates. Displacements transform with the
// same basis, so strains map as B^T J B and all measures are preserved.
struct Frame {
  Vec2 origin{0, 0}, e1{1, 0}, e2{0, 1};

  Vec2 to_local(const Vec2& x) const {
    const Vec2 d = x - origin;
    return {d.dot(e1), d.dot(e2)};
  }
  Vec2 to_global(const Vec2& y) const { return origin + e1 * y.x + e2 * y.y; }
  Vec2 vec_to_local(const Vec2& v) const { return {v.dot(e1), v.dot(e2)}; }
  Vec2 vec_to_global(const Vec2& v) const { return e1 * v.x + e2 * v.y; }
  Mat2 mat_to_local(const Mat2& J) const {
    // B^T J B with B = [e1 e2]
    const Mat2 B{e1.x, e2.x, e1.y, e2.y};
    return B.transpose().mul(J).mul(B);
  }
};

// Field seen in a local frame: ut(y) = B^T u(origin + B y).
inline SbdField pullback(const SbdField& f, const Frame& fr, const Rect& local_domain,
                         std::optional<Rect> local_target = std::nullopt) {
  auto inner = std::make_shared<SbdField>(f);
  auto frame = std::make_shared<Frame>(fr);
  SbdField out;
  out.domain = local_domain;
  out.h = f.h;
  out.target = local_target;
  out.retain = {inner, frame};
  out.eval = [inner, frame](const Vec2& y) {
    return frame->vec_to_local(inner->eval(frame->to_global(y)));
  };
  out.jac = [inner, frame](const Vec2& y) {
    return frame->mat_to_local(inner->jac(frame->to_global(y)));
  };
  for (const auto& j : f.jumps.segments) {
    Segment s(fr.to_local(j.geom.p0), fr.to_local(j.geom.p1),
              fr.vec_to_local(j.geom.normal));
    auto amp = j.amplitude;
    out.jumps.segments.push_back({s, [inner, frame, amp](const Vec2& y) {
                                    return frame->vec_to_local(amp(frame->to_global(y)));
                                  }});
  }
  return out;
}

// Field from a polynomial base plus indicator-times-amplitude cracks:
//   u(x) = base(x) + sum_c [x on normal side of crack c] * amp_c(x).
// One-sided limits across each crack then differ exactly by amp_c, which
// keeps the two representations of the jump consistent.
inline SbdField make_piecewise_field(const Rect& domain, double h, PolyField base,
                                     std::vector<Crack> cracks,
                                     std::optional<Rect> target = std::nullopt) {
  for (Crack& c : cracks) c.build_index();
  auto base_p = std::make_shared<PolyField>(std::move(base));
  auto cracks_p = std::make_shared<std::vector<Crack>>(std::move(cracks));
  SbdField f;
  f.domain = domain;
  f.h = h;
  f.target = target;
  f.eval = [base_p, cracks_p](const Vec2& x) {
    Vec2 u = base_p->eval(x);
    for (const Crack& c : *cracks_p)
      if (c.side_of(x) > 0) u += c.amp.eval(x);
    return u;
  };
  f.jac = [base_p, cracks_p](const Vec2& x) {
    Mat2 J = base_p->jacobian(x);
    for (const Crack& c : *cracks_p)
      if (c.side_of(x) > 0) J = J + c.amp.jacobian(x);
    return J;
  };
  for (const Crack& c : *cracks_p) {
    for (size_t i = 0; i < c.curve.segment_count(); ++i) {
      const Segment s = c.curve.segment(i);
      const PolyField* amp = &c.amp;
      auto cp = cracks_p;  // keep amplitude storage alive
      f.jumps.segments.push_back(
          {s, [amp, cp](const Vec2& x) { return amp->eval(x); }});
    }
  }
  return f;
}

inline SbdField make_smooth_field(const Rect& domain, double h, PolyField base,
                                  std::optional<Rect> target = std::nullopt) {
  return make_piecewise_field(domain, h, std::move(base), {}, target);
}

// u extended by 0 outside its domain; the old boundary becomes jump with
// amplitude -tr(u) (normal = outward, so the + side is the outside).
inline SbdField zero_extension(const SbdField& f, double margin) {
  auto inner = std::make_shared<SbdField>(f);
  const Rect dom = f.domain;
  if (!dom.axis_aligned())
    throw std::invalid_argument("zero_extension: domain must be axis-aligned");
  SbdField out;
  out.domain = dom.dilated(margin);
  out.target = dom;
  out.h = f.h;
  out.eval = [inner, dom](const Vec2& x) {
    return dom.contains(x) ? inner->eval(x) : Vec2{0, 0};
  };
  out.jac = [inner, dom](const Vec2& x) {
    return dom.contains(x) ? inner->jac(x) : Mat2::zero();
  };
  out.jumps = f.jumps;
  const auto corners = dom.corners();  // CCW from lower-left
  for (int i = 0; i < 4; ++i) {
    const Vec2 a = corners[i], b = corners[(i + 1) % 4];
    const Vec2 outward = (b - a).perp().normalized() * -1.0;  // CCW: perp points inward
    Segment edge(a, b, outward);
    out.jumps.segments.push_back({edge, [inner, outward](const Vec2& x) {
                                    // trace from just inside
                                    return inner->eval(x - outward * (1e-9)) * -1.0;
                                  }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// finite-difference symmetric gradient (the public op; quadratures use jac)

inline bool segments_cross(const Vec2& a, const Vec2& b, const Segment& s) {
  const Vec2 r = b - a, d = s.p1 - s.p0;
  const double denom = r.cross(d);
  if (denom == 0.0) return false;
  const double t = (s.p0 - a).cross(d) / denom;
  const double u = (s.p0 - a).cross(r) / denom;
  return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

inline bool crosses_jump(const SbdField& f, const Vec2& a, const Vec2& b) {
  for (const auto& j : f.jumps.segments)
    if (segments_cross(a, b, j.geom)) return true;
  return false;
}

// Central differences of the smooth part, symmetrized; one-sided stencils on
// the point's own component when the stencil would cross the jump set.
// Points on the jump itself are rejected.
inline Mat2 sym_gradient(const SbdField& f, const Vec2& x) {
  const double h = f.h;
  if (distance_to_segments(x, f.jumps.geometry()) == 0.0 && !f.jumps.empty())
    throw std::invalid_argument("sym_gradient: point lies on the jump set");
  Mat2 J;
  for (int dir = 0; dir < 2; ++dir) {
    const Vec2 e = dir == 0 ? Vec2{1, 0} : Vec2{0, 1};
    const Vec2 xp = x + e * h, xm = x - e * h;
    Vec2 col;
    const bool cross_p = crosses_jump(f, x, xp);
    const bool cross_m = crosses_jump(f, x, xm);
    if (!cross_p && !cross_m) {
      col = (f.eval(xp) - f.eval(xm)) / (2.0 * h);
    } else if (!cross_p) {
      // forward second-order: (-3 f(x) + 4 f(x+h) - f(x+2h)) / 2h
      col = (f.eval(x) * -3.0 + f.eval(xp) * 4.0 - f.eval(x + e * (2 * h))) / (2.0 * h);
    } else if (!cross_m) {
      col = (f.eval(x) * 3.0 - f.eval(xm) * 4.0 + f.eval(x - e * (2 * h))) / (2.0 * h);
    } else {
      throw std::invalid_argument("sym_gradient: jump on both sides of stencil");
    }
    if (dir == 0) {
      J.a = col.x;
      J.c = col.y;
    } else {
      J.b = col.x;
      J.d = col.y;
    }
  }
  return J.sym();
}

// ---------------------------------------------------------------------------
// measures

struct EuMeasure {
  double abs_cont = 0;
  double jump = 0;
  double total = 0;
};

// Midpoint quadrature of g over region (in the region's own frame).
inline double quad_region(const Rect& region, double h,
                          const std::function<double(const Vec2&)>& g) {
  const int nx = std::max(1, static_cast<int>(std::ceil(2 * region.half.x / h)));
  const int ny = std::max(1, static_cast<int>(std::ceil(2 * region.half.y / h)));
  const double dx = 2 * region.half.x / nx, dy = 2 * region.half.y / ny;
  const double w = dx * dy;
  return parallel_sum(static_cast<std::int64_t>(nx) * ny, [&](std::int64_t idx) {
    const int j = static_cast<int>(idx / nx), i = static_cast<int>(idx % nx);
    const Vec2 loc{-region.half.x + (i + 0.5) * dx, -region.half.y + (j + 0.5) * dy};
    return w * g(region.from_local(loc));
  });
}

// 16-point Gauss line quadrature of g over a segment.
inline double quad_segment(const Segment& s,
                           const std::function<double(const Vec2&)>& g) {
  const auto& xs = Gauss16::nodes();
  const auto& ws = Gauss16::weights();
  const double half_len = 0.5 * s.length();
  double acc = 0;
  for (int i = 0; i < 16; ++i) acc += ws[i] * g(s.at(0.5 * (1.0 + xs[i])));
  return acc * half_len;
}

// |Eu|-type decomposition over a region: quadrature of |e(u)| plus the
// arc-length integral of |[u] (.) nu| over the jump inside the region.
inline EuMeasure eu_measure(const SbdField& f, const Rect& region) {
  EuMeasure m;
  m.abs_cont = quad_region(region, f.h,
                           [&](const Vec2& x) { return f.jac(x).sym().frobenius(); });
  for (const auto& j : f.jumps.segments) {
    auto c = clip_segment(j.geom, region);
    if (!c) continue;
    m.jump += quad_segment(*c, [&](const Vec2& x) {
      return sym_tensor_product(j.amplitude(x), j.geom.normal).frobenius();
    });
  }
  m.total = m.abs_cont + m.jump;
  return m;
}

// (integral of |e(u)|^p over the domain)^(1/p), midpoint rule at spacing h.
inline double lp_strain_norm(const SbdField& f, double p) {
  if (!(p > 1)) throw std::invalid_argument("lp_strain_norm: p > 1 required");
  const double integral = quad_region(f.domain, f.h, [&](const Vec2& x) {
    return std::pow(f.jac(x).sym().frobenius(), p);
  });
  return std::pow(integral, 1.0 / p);
}

// integral of |[u]| over a subset of jump segments
inline double jump_energy(const SbdField& f, const std::vector<JumpSegment>& subset) {
  (void)f;
  double s = 0;
  for (const auto& j : subset)
    s += quad_segment(j.geom, [&](const Vec2& x) { return j.amplitude(x).norm(); });
  return s;
}

inline double jump_energy(const SbdField& f) { return jump_energy(f, f.jumps.segments); }

// integral over the merged jump sets of weight(ampA - ampB matched pointwise):
// segments of A are matched against B within match_tol (and vice versa);
// unmatched points see the other amplitude as 0.
inline double jump_difference_integral(
    const std::vector<JumpSegment>& A, const std::vector<JumpSegment>& B,
    double match_tol,
    const std::function<double(const Vec2&, const Vec2&, const Vec2&)>& weight,
    const std::optional<Rect>& window = std::nullopt) {
  auto clipped = [&](const std::vector<JumpSegment>& v) {
    std::vector<JumpSegment> out;
    for (const auto& j : v) {
      if (!window) {
        out.push_back(j);
        continue;
      }
      auto c = clip_segment(j.geom, *window);
      if (c) out.push_back({*c, j.amplitude});
    }
    return out;
  };
  const std::vector<JumpSegment> a = clipped(A), b = clipped(B);

  // amplitude of the other set at x, re-oriented to `nu` if the matched
  // segment's normal points the other way
  auto other_amp = [&](const std::vector<JumpSegment>& other, const Vec2& x,
                       const Vec2& nu, bool& matched) -> Vec2 {
    double best = match_tol;
    Vec2 amp{0, 0};
    matched = false;
    for (const auto& j : other) {
      const double t = j.geom.closest_t(x);
      const Vec2 cp = j.geom.at(t);
      const double d = (x - cp).norm();
      if (d <= best) {
        best = d;
        amp = j.amplitude(cp);
        if (j.geom.normal.dot(nu) < 0) amp = -amp;
        matched = true;
      }
    }
    return amp;
  };

  double acc = 0;
  for (const auto& j : a) {
    const double len = j.geom.length();
    int n = std::max(64, static_cast<int>(std::ceil(len / match_tol)));
    n = std::min(n, 8192);
    const double w = len / n;
    for (int i = 0; i < n; ++i) {
      const Vec2 x = j.geom.at((i + 0.5) / n);
      bool matched = false;
      const Vec2 ob = other_amp(b, x, j.geom.normal, matched);
      acc += w * weight(j.amplitude(x), ob, j.geom.normal);
    }
  }
  // contributions of B not matched by A
  std::vector<Segment> ageom;
  for (const auto& j : a) ageom.push_back(j.geom);
  for (const auto& j : b) {
    const double len = j.geom.length();
    int n = std::max(64, static_cast<int>(std::ceil(len / match_tol)));
    n = std::min(n, 8192);
    const double w = len / n;
    for (int i = 0; i < n; ++i) {
      const Vec2 x = j.geom.at((i + 0.5) / n);
      if (ageom.empty() || distance_to_segments(x, ageom) > match_tol)
        acc += w * weight(Vec2{0, 0}, j.amplitude(x), j.geom.normal);
    }
  }
  return acc;
}

// || f - g ||_L1 + |E(f - g)|: BD distance with jump sets merged by geometric
// matching at half the finer sampling resolution.
inline double bd_distance(const SbdField& f, const SbdField& g) {
  const Vec2 dc = f.domain.center - g.domain.center, dh = f.domain.half - g.domain.half;
  if (dc.norm() > 1e-12 || dh.norm() > 1e-12 || f.domain.angle != g.domain.angle)
    throw std::invalid_argument("bd_distance: fields must share a domain");
  const double h = std::min(f.h, g.h);
  const double l1 = quad_region(f.domain, h,
                                [&](const Vec2& x) { return (f.eval(x) - g.eval(x)).norm(); });
  const double ea = quad_region(f.domain, h, [&](const Vec2& x) {
    return (f.jac(x).sym() - g.jac(x).sym()).frobenius();
  });
  const double ej = jump_difference_integral(
      f.jumps.segments, g.jumps.segments, 0.5 * h,
      [](const Vec2& a, const Vec2& b, const Vec2& nu) {
        return sym_tensor_product(a - b, nu).frobenius();
      });
  return l1 + ea + ej;
}

}  // namespace sbd
