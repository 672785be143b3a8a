// Segments, polylines, the node lattice and the one-dimensional length
// measures (H^1 surrogates) used by the approximation constructions.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sbd/core.hpp"

namespace sbd {

struct Segment {
  Vec2 p0, p1;
  Vec2 normal;  // unit, orientation fixes the sign of jump amplitudes

  Segment() = default;
  Segment(Vec2 a, Vec2 b) : p0(a), p1(b) {
    normal = (p1 - p0).perp().normalized();
  }
  Segment(Vec2 a, Vec2 b, Vec2 n) : p0(a), p1(b), normal(n) {}

  double length() const { return (p1 - p0).norm(); }
  Vec2 tangent() const { return (p1 - p0).normalized(); }
  Vec2 at(double t) const { return p0 + (p1 - p0) * t; }
  Vec2 midpoint() const { return at(0.5); }

  // Closest parameter in [0,1] to p.
  double closest_t(const Vec2& p) const {
    const Vec2 d = p1 - p0;
    const double l2 = d.norm2();
    if (l2 == 0) return 0.0;
    return std::clamp((p - p0).dot(d) / l2, 0.0, 1.0);
  }
  double distance(const Vec2& p) const { return (p - at(closest_t(p))).norm(); }
};

// Distance from p to the closest segment of a set; index returned if wanted.
inline double distance_to_segments(const Vec2& p, const std::vector<Segment>& segs,
                                   int* which = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  int bi = -1;
  for (size_t i = 0; i < segs.size(); ++i) {
    const double d = segs[i].distance(p);
    if (d < best) {
      best = d;
      bi = static_cast<int>(i);
    }
  }
  if (which) *which = bi;
  return best;
}

// Open polyline with one unit normal per segment.
struct Polyline {
  std::vector<Vec2> vertices;
  std::vector<Vec2> normals;  // size = vertices.size() - 1

  Polyline() = default;
  explicit Polyline(std::vector<Vec2> vs) : vertices(std::move(vs)) {
    validate_vertices();
    normals.reserve(vertices.size() - 1);
    for (size_t i = 0; i + 1 < vertices.size(); ++i)
      normals.push_back((vertices[i + 1] - vertices[i]).perp().normalized());
  }
  Polyline(std::vector<Vec2> vs, std::vector<Vec2> ns)
      : vertices(std::move(vs)), normals(std::move(ns)) {
    validate_vertices();
    if (normals.size() + 1 != vertices.size())
      throw std::invalid_argument("Polyline: need one normal per segment");
    for (const Vec2& n : normals)
      if (std::abs(n.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("Polyline: normals must be unit");
  }

  size_t segment_count() const { return vertices.empty() ? 0 : vertices.size() - 1; }
  Segment segment(size_t i) const {
    return Segment(vertices[i], vertices[i + 1], normals[i]);
  }
  std::vector<Segment> segments() const {
    std::vector<Segment> out;
    out.reserve(segment_count());
    for (size_t i = 0; i < segment_count(); ++i) out.push_back(segment(i));
    return out;
  }

 private:
  void validate_vertices() const {
    if (vertices.size() < 2)
      throw std::invalid_argument("Polyline: need at least two vertices");
    for (size_t i = 0; i + 1 < vertices.size(); ++i)
      if ((vertices[i + 1] - vertices[i]).norm() == 0.0)
        throw std::invalid_argument("Polyline: consecutive vertices must be distinct");
  }
};

// Total length of a polyline. Additive under concatenation by construction.
inline double h1_length(const Polyline& p) {
  double s = 0.0;
  for (size_t i = 0; i < p.segment_count(); ++i) s += p.segment(i).length();
  return s;
}

inline double h1_length(const std::vector<Segment>& segs) {
  double s = 0.0;
  for (const Segment& sg : segs) s += sg.length();
  return s;
}

// Discrete surrogate for H^1 of the symmetric difference of two segment sets:
// arc-length samples of each set that are farther than match_tol from the
// other set contribute their weight. 0 iff the sets coincide up to match_tol.
inline double symm_diff_measure(const std::vector<Segment>& a,
                                const std::vector<Segment>& b, double match_tol,
                                int min_samples_per_segment = 64) {
  if (match_tol <= 0) throw std::invalid_argument("symm_diff_measure: match_tol > 0");
  auto one_sided = [&](const std::vector<Segment>& from, const std::vector<Segment>& to) {
    double unmatched = 0.0;
    for (const Segment& s : from) {
      const double len = s.length();
      int n = min_samples_per_segment;
      // resolve matched/unmatched boundaries at the tolerance scale
      n = std::max(n, static_cast<int>(std::ceil(len / match_tol)));
      n = std::min(n, 8192);
      const double w = len / n;
      for (int i = 0; i < n; ++i) {
        const Vec2 x = s.at((i + 0.5) / n);
        if (to.empty() || distance_to_segments(x, to) > match_tol) unmatched += w;
      }
    }
    return unmatched;
  };
  return one_sided(a, b) + one_sided(b, a);
}

// Length of the part of `a` not matched by `b` (the one-sided half).
inline double one_sided_diff_measure(const std::vector<Segment>& a,
                                     const std::vector<Segment>& b, double match_tol,
                                     int min_samples_per_segment = 64) {
  if (match_tol <= 0) throw std::invalid_argument("one_sided_diff_measure: match_tol > 0");
  double unmatched = 0.0;
  for (const Segment& s : a) {
    const double len = s.length();
    int n = std::max(min_samples_per_segment,
                     static_cast<int>(std::ceil(len / match_tol)));
    n = std::min(n, 8192);
    const double w = len / n;
    for (int i = 0; i < n; ++i) {
      const Vec2 x = s.at((i + 0.5) / n);
      if (b.empty() || distance_to_segments(x, b) > match_tol) unmatched += w;
    }
  }
  return unmatched;
}

// Clip a segment against an axis-aligned rectangle (Liang-Barsky). Returns
// the clipped segment, or nothing if the intersection is empty/degenerate.
inline std::optional<Segment> clip_segment_aligned(const Segment& s, const Rect& r) {
  const double x0 = r.center.x - r.half.x, x1 = r.center.x + r.half.x;
  const double y0 = r.center.y - r.half.y, y1 = r.center.y + r.half.y;
  const Vec2 d = s.p1 - s.p0;
  double t0 = 0.0, t1 = 1.0;
  auto clip = [&](double p, double q) {
    if (p == 0.0) return q >= 0.0;
    const double t = q / p;
    if (p < 0) {
      if (t > t1) return false;
      if (t > t0) t0 = t;
    } else {
      if (t < t0) return false;
      if (t < t1) t1 = t;
    }
    return true;
  };
  if (!clip(-d.x, s.p0.x - x0)) return std::nullopt;
  if (!clip(d.x, x1 - s.p0.x)) return std::nullopt;
  if (!clip(-d.y, s.p0.y - y0)) return std::nullopt;
  if (!clip(d.y, y1 - s.p0.y)) return std::nullopt;
  if (t1 <= t0) return std::nullopt;
  Segment out(s.at(t0), s.at(t1), s.normal);
  if (out.length() == 0.0) return std::nullopt;
  return out;
}

// Clip against an arbitrary (rotated) Rect: work in the local frame.
inline std::optional<Segment> clip_segment(const Segment& s, const Rect& r) {
  if (r.axis_aligned()) return clip_segment_aligned(s, r);
  Segment loc(r.to_local(s.p0), r.to_local(s.p1), s.normal);
  const Rect local(Vec2{0, 0}, r.half, 0.0);
  auto c = clip_segment_aligned(loc, local);
  if (!c) return std::nullopt;
  return Segment(r.from_local(c->p0), r.from_local(c->p1), s.normal);
}

// Total length of segments inside a rectangle.
inline double length_inside(const std::vector<Segment>& segs, const Rect& r) {
  double s = 0.0;
  for (const Segment& sg : segs) {
    auto c = clip_segment(sg, r);
    if (c) s += c->length();
  }
  return s;
}

// ---------------------------------------------------------------------------
// node lattice

// Cell-centered lattice of scale k: nodes z = (2/k)(m + 1/2) for m in Z^2.
// q/qt/Q/Qt are the concentric cubes with half widths 1/k, 2/k, 4/k, 8/k.
struct LatticeNode {
  Vec2 z;
  std::int64_t ix = 0, iy = 0;  // integer coordinates: z = (2/k)*(i + 1/2)
};

inline Rect q_cell(const Vec2& z, int k) { return Rect(z, {1.0 / k, 1.0 / k}); }
inline Rect qt_cell(const Vec2& z, int k) { return Rect(z, {2.0 / k, 2.0 / k}); }
inline Rect Q_cell(const Vec2& z, int k) { return Rect(z, {4.0 / k, 4.0 / k}); }
inline Rect Qt_cell(const Vec2& z, int k) { return Rect(z, {8.0 / k, 8.0 / k}); }

// All lattice nodes strictly inside an axis-aligned domain, ordered
// lexicographically by (iy, ix). Empty domains yield an empty set.
inline std::vector<LatticeNode> cube_lattice(const Rect& domain, int k) {
  if (k < 1) throw std::invalid_argument("cube_lattice: k >= 1");
  if (!domain.axis_aligned())
    throw std::invalid_argument("cube_lattice: domain must be axis-aligned");
  const double s = 2.0 / k;
  const double x0 = domain.center.x - domain.half.x, x1 = domain.center.x + domain.half.x;
  const double y0 = domain.center.y - domain.half.y, y1 = domain.center.y + domain.half.y;
  std::vector<LatticeNode> nodes;
  const auto first_idx = [&](double lo) {
    return static_cast<std::int64_t>(std::ceil(lo / s - 0.5 + 1e-12));
  };
  for (std::int64_t iy = first_idx(y0);; ++iy) {
    const double zy = s * (iy + 0.5);
    if (zy >= y1) break;
    if (zy <= y0) continue;
    for (std::int64_t ix = first_idx(x0);; ++ix) {
      const double zx = s * (ix + 0.5);
      if (zx >= x1) break;
      if (zx <= x0) continue;
      nodes.push_back({{zx, zy}, ix, iy});
    }
  }
  return nodes;
}

}  // namespace sbd
