// Radial mollifier phi_k(x) = k^2 phi(kx) with the standard smooth bump
// profile, convolution by midpoint quadrature with local refinement across
// declared jump lines, and the Lemma-type commutator bound check.
//
// The discrete operator renormalizes weights so constants are reproduced to
// machine precision, and the discrete derivative kernel is moment-corrected
// so affine fields have exact gradients; radial symmetry then fixes affine
// fields themselves (phi_k * a = a).
#pragma once

#include <cmath>
#include <vector>

#include "sbd/core.hpp"
#include "sbd/field.hpp"
#include "sbd/geometry.hpp"

namespace sbd {

struct Mollifier {
  int k = 8;  // support radius 1/k

  // unit-ball profile phi1(eta) = Z exp(-1/(1-|eta|^2)), |eta| < 1
  static double normalization() {
    static const double Z = [] {
      const double I = adaptive_simpson(
          [](double s) { return std::exp(-1.0 / (1.0 - s * s)) * s; }, 0.0, 1.0 - 1e-14,
          1e-15);
      return 1.0 / (2.0 * 3.14159265358979323846 * I);
    }();
    return Z;
  }
  static double profile1(double r2) {  // phi1 at |eta|^2 = r2
    if (r2 >= 1.0) return 0.0;
    return normalization() * std::exp(-1.0 / (1.0 - r2));
  }
  // d phi1 / d eta = -2 eta phi1 / (1 - r2)^2
  static Vec2 grad_profile1(const Vec2& eta) {
    const double r2 = eta.norm2();
    if (r2 >= 1.0) return {0, 0};
    const double g = -2.0 * profile1(r2) / ((1.0 - r2) * (1.0 - r2));
    return eta * g;
  }

  double radius() const { return 1.0 / k; }
  double phi(const Vec2& xi) const {  // phi_k
    const double kk = static_cast<double>(k);
    return kk * kk * profile1((xi * kk).norm2());
  }
  Vec2 grad_phi(const Vec2& xi) const {
    const double kk = static_cast<double>(k);
    return grad_profile1(xi * kk) * (kk * kk * kk);
  }

  // integral over B1 of phi1^p, by radial quadrature
  static double lp_norm_p(double p) {
    const double Z = normalization();
    return 2.0 * 3.14159265358979323846 *
           adaptive_simpson(
               [&](double s) {
                 return std::pow(Z * std::exp(-1.0 / (1.0 - s * s)), p) * s;
               },
               0.0, 1.0 - 1e-14, 1e-15);
  }
  // quadrature check of unit mass (used by invariants)
  static double mass_check() {
    return 2.0 * 3.14159265358979323846 * normalization() *
           adaptive_simpson(
               [](double s) { return std::exp(-1.0 / (1.0 - s * s)) * s; }, 0.0,
               1.0 - 1e-14, 1e-15);
  }
};

struct MollifyOptions {
  int base_cells = 16;   // quadrature cells per axis across the support
  int refine_depth = 3;  // dyadic refinement levels across jump lines
  bool want_jacobian = false;
};

// spacing rule min(h, 1/(8k)) expressed as a cell count per axis
inline int moll_cells_for(const Mollifier& m, double h) {
  const double spacing = std::min(h, m.radius() / 8.0);
  return std::max(16, static_cast<int>(std::ceil(2.0 * m.radius() / spacing)));
}

namespace detail {

struct MollAccum {
  double W = 0;
  Vec2 F{0, 0};
  Vec2 Sxi{0, 0};
  Vec2 s{0, 0};          // sum of gradient weights
  Mat2 T = Mat2::zero();  // T(l,j) = sum f_l G_j
  Mat2 K = Mat2::zero();  // K(m,j) = sum xi_m G_j
  bool grad = false;

  void add(const Mollifier& m, const Vec2& xi, double area, const Vec2& fval) {
    const double w = m.phi(xi) * area;
    if (w != 0.0) {
      W += w;
      F += fval * w;
      Sxi += xi * w;
    }
    if (grad) {
      const Vec2 G = m.grad_phi(xi) * area;
      if (G.x != 0.0 || G.y != 0.0) {
        s += G;
        T = T + Mat2{fval.x * G.x, fval.x * G.y, fval.y * G.x, fval.y * G.y};
        K = K + Mat2{xi.x * G.x, xi.x * G.y, xi.y * G.x, xi.y * G.y};
      }
    }
  }
};

// clip the square cell (center c, half e) against the half plane
// {x : (x - p).n <= 0}; returns polygon vertices (possibly empty)
inline std::vector<Vec2> clip_cell_halfplane(const Vec2& c, double e, const Vec2& p,
                                             const Vec2& n) {
  std::vector<Vec2> poly = {{c.x - e, c.y - e}, {c.x + e, c.y - e},
                            {c.x + e, c.y + e}, {c.x - e, c.y + e}};
  std::vector<Vec2> out;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    const double da = (a - p).dot(n), db = (b - p).dot(n);
    if (da <= 0) out.push_back(a);
    if ((da < 0 && db > 0) || (da > 0 && db < 0))
      out.push_back(a + (b - a) * (da / (da - db)));
  }
  return out;
}

inline double polygon_area(const std::vector<Vec2>& poly) {
  double s = 0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    s += a.cross(b);
  }
  return 0.5 * std::abs(s);
}

inline Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
  double A = 0;
  Vec2 c{0, 0};
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    const double w = a.cross(b);
    A += w;
    c += (a + b) * w;
  }
  if (std::abs(A) < 1e-300) return poly.empty() ? Vec2{0, 0} : poly[0];
  return c / (3.0 * A);
}

// recursive quadrature cell: xi-space square (center, half width)
inline void moll_cell(const Mollifier& m, const VecFn& u, const Vec2& x,
                      const std::vector<Segment>& sharp, const Vec2& c, double e,
                      int depth, MollAccum& acc) {
  // does a sharp line pass through this cell (in evaluation coordinates
  // y = x - xi, the segment set lives in y-space)?
  int near_idx = -1;
  double near_d = 1e300;
  const Vec2 yc = x - c;
  for (size_t i = 0; i < sharp.size(); ++i) {
    const double d = sharp[i].distance(yc);
    if (d < near_d) {
      near_d = d;
      near_idx = static_cast<int>(i);
    }
  }
  const double halfdiag = e * kSqrt2;
  if (near_idx < 0 || near_d > halfdiag) {
    acc.add(m, c, 4 * e * e, u(yc));
    return;
  }
  if (depth > 0) {
    const double he = 0.5 * e;
    moll_cell(m, u, x, sharp, {c.x - he, c.y - he}, he, depth - 1, acc);
    moll_cell(m, u, x, sharp, {c.x + he, c.y - he}, he, depth - 1, acc);
    moll_cell(m, u, x, sharp, {c.x - he, c.y + he}, he, depth - 1, acc);
    moll_cell(m, u, x, sharp, {c.x + he, c.y + he}, he, depth - 1, acc);
    return;
  }
  // leaf straddling a line: split the cell by the nearest segment's line and
  // weight the two polygons exactly by area
  const Segment& sg = sharp[static_cast<size_t>(near_idx)];
  // line in xi-space: y = x - xi maps the segment line to xi = x - y
  const Vec2 p_xi = x - sg.p0;
  const Vec2 n_xi = -sg.normal;  // flipped by y -> x - y
  const auto polyA = clip_cell_halfplane(c, e, p_xi, n_xi);
  const auto polyB = clip_cell_halfplane(c, e, p_xi, -1.0 * n_xi);
  const double aA = polygon_area(polyA), aB = polygon_area(polyB);
  if (aA < 1e-300 && aB < 1e-300) return;
  if (aA > 1e-300) {
    const Vec2 cc = polygon_centroid(polyA);
    acc.add(m, cc, aA, u(x - cc));
  }
  if (aB > 1e-300) {
    const Vec2 cc = polygon_centroid(polyB);
    acc.add(m, cc, aB, u(x - cc));
  }
}

}  // namespace detail

// (u * phi_k)(x), optionally with the Jacobian of the mollified field.
// `sharp` lists jump segments across which the quadrature refines.
inline Vec2 mollify_point(const VecFn& u, const std::vector<Segment>& sharp,
                          const Mollifier& m, const Vec2& x, Mat2* jac_out = nullptr,
                          const MollifyOptions& opt = {}) {
  const double R = m.radius();
  const int n = opt.base_cells;  // cells per axis across the support diameter
  const double e = R / n;        // cell half width (width 2R/n)
  detail::MollAccum acc;
  acc.grad = (jac_out != nullptr);

  // pre-select sharp segments near the support ball
  std::vector<Segment> local;
  for (const Segment& s : sharp)
    if (s.distance(x) <= R * (1.0 + 1e-9)) local.push_back(s);

  for (int jy = 0; jy < n; ++jy) {
    for (int ix = 0; ix < n; ++ix) {
      const Vec2 cell_center{-R + (2 * ix + 1) * e, -R + (2 * jy + 1) * e};
      // skip cells fully outside the support
      if (cell_center.norm() - e * kSqrt2 > R) continue;
      detail::moll_cell(m, u, x, local, cell_center, e, opt.refine_depth, acc);
    }
  }

  if (acc.W <= 0) return {0, 0};
  const Vec2 V0 = acc.F / acc.W;
  if (jac_out) {
    // moment-corrected derivative: exact for affine fields on any layout
    const Mat2 Vs{V0.x * acc.s.x, V0.x * acc.s.y, V0.y * acc.s.x, V0.y * acc.s.y};
    const Mat2 M = Vs - acc.T;
    const Mat2 K = acc.K;
    const double det = K.a * K.d - K.b * K.c;
    Mat2 Kinv;
    if (std::abs(det) < 1e-300) {
      Kinv = Mat2::identity() * -1.0;  // fallback: K ~ -W*I
    } else {
      Kinv = Mat2{K.d, -K.b, -K.c, K.a} * (1.0 / det);
    }
    *jac_out = M.mul(Kinv);
    const Vec2 shift = acc.Sxi / acc.W;
    return V0 + jac_out->apply(shift);
  }
  return V0;
}

// matrix-valued convolution (e.g. e(u) * phi_k), value only, renormalized
inline Mat2 mollify_mat_point(const MatFn& E, const std::vector<Segment>& sharp,
                              const Mollifier& m, const Vec2& x,
                              const MollifyOptions& opt = {}) {
  // reuse the vector machinery on the two matrix columns
  Mat2 out;
  VecFn col1 = [&E](const Vec2& y) {
    const Mat2 J = E(y);
    return Vec2{J.a, J.c};
  };
  VecFn col2 = [&E](const Vec2& y) {
    const Mat2 J = E(y);
    return Vec2{J.b, J.d};
  };
  MollifyOptions o = opt;
  o.want_jacobian = false;
  const Vec2 c1 = mollify_point(col1, sharp, m, x, nullptr, o);
  const Vec2 c2 = mollify_point(col2, sharp, m, x, nullptr, o);
  out.a = c1.x;
  out.c = c1.y;
  out.b = c2.x;
  out.d = c2.y;
  return out;
}

// Mollify a field over `region`; rejects if the field's domain lacks the
// room-for-convolution margin 1/k around the region.
inline SbdField mollify(const SbdField& f, const Mollifier& m, const Rect& region) {
  if (!region.within(f.domain, m.radius()))
    throw std::invalid_argument("mollify: need margin 1/k around the region");
  auto inner = std::make_shared<SbdField>(f);
  auto sharp = std::make_shared<std::vector<Segment>>(f.jumps.geometry());
  Mollifier mm = m;
  MollifyOptions opt;
  opt.base_cells = moll_cells_for(m, f.h);
  SbdField out;
  out.domain = region;
  out.h = f.h;
  out.eval = [inner, sharp, mm, opt](const Vec2& x) {
    return mollify_point(inner->eval, *sharp, mm, x, nullptr, opt);
  };
  out.jac = [inner, sharp, mm, opt](const Vec2& x) {
    Mat2 J;
    mollify_point(inner->eval, *sharp, mm, x, &J, opt);
    return J;
  };
  return out;
}

struct CommutatorBound {
  double lhs = 0;
  double rhs = 0;
  bool holds = false;
};

// Lemma-style commutator estimate on Q = (center +- 2r), checked over the
// inner half cube Q' = (center +- r):
//   int_{Q'} |e(u*phi_r) - e(u)*phi_r|^p <= ||phi1||_p^p r^{-n(p-1)} |E^j u|(Q)^p
inline CommutatorBound commutator_bound(const SbdField& f, const Mollifier& m,
                                        const Rect& Q, double p) {
  CommutatorBound out;
  const double r = m.radius();
  const Rect Qp(Q.center, Q.half * 0.5, Q.angle);
  const auto sharp = f.jumps.geometry();
  const double hq = std::min(f.h, r / 8.0);
  MollifyOptions opt;
  opt.base_cells = moll_cells_for(m, f.h);
  opt.refine_depth = 4;

  out.lhs = quad_region(Qp, hq, [&](const Vec2& x) {
    Mat2 J;
    mollify_point(f.eval, sharp, m, x, &J, opt);
    const Mat2 conv_strain = J.sym();
    const Mat2 strain_conv =
        mollify_mat_point([&](const Vec2& y) { return f.jac(y).sym(); }, sharp, m, x,
                          opt)
            .sym();
    return std::pow((conv_strain - strain_conv).frobenius(), p);
  });

  double ej = 0;  // |E^j u|(Q)
  for (const auto& j : f.jumps.segments) {
    auto c = clip_segment(j.geom, Q);
    if (!c) continue;
    ej += quad_segment(*c, [&](const Vec2& x) {
      return sym_tensor_product(j.amplitude(x), j.geom.normal).frobenius();
    });
  }
  out.rhs = Mollifier::lp_norm_p(p) * std::pow(r, -2.0 * (p - 1.0)) * std::pow(ej, p);
  out.holds = out.lhs <= out.rhs * (1.0 + 1e-6) + 1e-14;
  return out;
}

}  // namespace sbd
