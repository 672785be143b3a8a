// Nitsche-type reflection extension across a horizontal face:
//   v'(x) = q v_{A_mu}(x) + (1 - q) v_{A_nu}(x),  u_A(x) = A^T u(Ax),
// with A_mu = diag(1, -mu), q = (1 + nu)/(nu - mu). The identity
// q mu + (1 - q) nu = -1 forces trace continuity across the face; the
// reflected jump set is A_mu^{-1}(J) and A_nu^{-1}(J) with amplitudes
// q A_mu^T [u] and (1 - q) A_nu^T [u].
#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>

#include "sbd/core.hpp"
#include "sbd/field.hpp"

namespace sbd {

struct ReflectionParams {
  double mu = 0.25;
  double nu = 0.5;

  ReflectionParams() = default;
  ReflectionParams(double mu_, double nu_) : mu(mu_), nu(nu_) {
    if (!(0 < mu && mu < nu && nu < 1))
      throw std::invalid_argument("ReflectionParams: need 0 < mu < nu < 1");
  }
  double q() const { return (1.0 + nu) / (nu - mu); }
};

namespace detail {

// Map one jump segment under A^{-1} = diag(1, -1/s) relative to the face
// height, scaling the amplitude by `factor * A^T`.
inline JumpSegment reflect_jump_segment(const JumpSegment& j, double y_face, double s,
                                        double factor) {
  auto map_pt = [&](const Vec2& p) {
    return Vec2{p.x, y_face + (y_face - p.y) / s};
  };
  const Vec2 a = map_pt(j.geom.p0), b = map_pt(j.geom.p1);
  const Vec2 that = b - a;
  const Vec2 nhat = that.perp().normalized();
  // does the original nu-side map to the nhat side?
  const Vec2 mapped_nu{j.geom.normal.x, -j.geom.normal.y / s};
  const double sign = mapped_nu.dot(nhat) >= 0 ? 1.0 : -1.0;
  auto amp = j.amplitude;
  auto eval_amp = [amp, y_face, s, factor, sign](const Vec2& x) {
    const Vec2 orig{x.x, y_face - s * (x.y - y_face)};
    const Vec2 A = amp(orig);
    return Vec2{A.x, -s * A.y} * (factor * sign);
  };
  return {Segment(a, b, nhat), eval_amp};
}

}  // namespace detail

// Extension of f (original below the line y = y_face) to the upper side by
// the two-fold scaled reflection. The evaluator is lazy; jump segments of f
// strictly below the face are kept and their two reflected copies are added,
// clipped to heights <= clip_top. Jumps touching the face are rejected.
inline SbdField reflection_extend_line(const SbdField& f, double y_face,
                                       const ReflectionParams& prm, double clip_top,
                                       double face_x0, double face_x1) {
  const double mu = prm.mu, nu = prm.nu, q = prm.q();
  // precondition: no jump meets the face within its span
  const Segment face({face_x0, y_face}, {face_x1, y_face});
  for (const auto& j : f.jumps.segments) {
    const bool crosses = (j.geom.p0.y - y_face) * (j.geom.p1.y - y_face) < 0 &&
                         segments_cross(j.geom.p0, j.geom.p1, face);
    const bool touches = (j.geom.p0.y == y_face && j.geom.p0.x >= face_x0 &&
                          j.geom.p0.x <= face_x1) ||
                         (j.geom.p1.y == y_face && j.geom.p1.x >= face_x0 &&
                          j.geom.p1.x <= face_x1);
    if (crosses || touches)
      throw std::invalid_argument("reflection_extend_line: jump meets the face");
  }

  auto inner = std::make_shared<SbdField>(f);
  SbdField out;
  out.domain = f.domain;  // callers manage the geometric bookkeeping
  out.h = f.h;
  out.retain = {inner};
  out.eval = [inner, y_face, mu, nu, q](const Vec2& x) {
    if (x.y <= y_face) return inner->eval(x);
    const Vec2 pmu{x.x, y_face - mu * (x.y - y_face)};
    const Vec2 pnu{x.x, y_face - nu * (x.y - y_face)};
    const Vec2 vmu = inner->eval(pmu), vnu = inner->eval(pnu);
    return Vec2{q * vmu.x + (1 - q) * vnu.x, -q * mu * vmu.y - (1 - q) * nu * vnu.y};
  };
  out.jac = [inner, y_face, mu, nu, q](const Vec2& x) {
    if (x.y <= y_face) return inner->jac(x);
    const Vec2 pmu{x.x, y_face - mu * (x.y - y_face)};
    const Vec2 pnu{x.x, y_face - nu * (x.y - y_face)};
    const Mat2 Jm = inner->jac(pmu), Jn = inner->jac(pnu);
    // q A_mu^T J A_mu + (1-q) A_nu^T J A_nu
    Mat2 out_m{Jm.a, -mu * Jm.b, -mu * Jm.c, mu * mu * Jm.d};
    Mat2 out_n{Jn.a, -nu * Jn.b, -nu * Jn.c, nu * nu * Jn.d};
    return out_m * q + out_n * (1 - q);
  };
  for (const auto& j : f.jumps.segments) {
    // keep the below-face part (segments crossing the face line away from the
    // face span are split at the line)
    JumpSegment below = j;
    const double y0 = j.geom.p0.y, y1 = j.geom.p1.y;
    if (y0 >= y_face && y1 >= y_face) continue;
    if (y0 >= y_face || y1 >= y_face) {
      const double t = (y_face - y0) / (y1 - y0);
      const Vec2 cut = j.geom.at(t - (y1 > y0 ? 1e-12 : -1e-12));
      below.geom = (y0 < y_face) ? Segment(j.geom.p0, cut, j.geom.normal)
                                 : Segment(cut, j.geom.p1, j.geom.normal);
      if (below.geom.length() < 1e-13) continue;
    }
    out.jumps.segments.push_back(below);
    for (const auto& [s, factor] : {std::pair{mu, q}, std::pair{nu, 1 - q}}) {
      JumpSegment r = detail::reflect_jump_segment(below, y_face, s, factor);
      // clip to the band (y_face, clip_top]
      const Rect band = Rect::from_bounds(-1e12, y_face, 1e12, clip_top);
      auto c = clip_segment_aligned(r.geom, band);
      if (c) out.jumps.segments.push_back({*c, r.amplitude});
    }
  }
  return out;
}

// Lemma-style extension across the top edge of an axis-aligned rectangle R:
// returns the extension on R-hat = R + its mirror (double-height rect).
inline SbdField reflect_extend(const SbdField& f, const Rect& R,
                               const ReflectionParams& prm = {}) {
  if (!R.axis_aligned())
    throw std::invalid_argument("reflect_extend: R must be axis-aligned");
  const double y_face = R.center.y + R.half.y;
  const double x0 = R.center.x - R.half.x, x1 = R.center.x + R.half.x;
  // restrict the jump list to R before extending
  SbdField base = f;
  base.jumps.segments.clear();
  for (const auto& j : f.jumps.segments) {
    auto c = clip_segment(j.geom, R);
    if (c) base.jumps.segments.push_back({*c, j.amplitude});
  }
  SbdField ext =
      reflection_extend_line(base, y_face, prm, y_face + 2 * R.half.y, x0, x1);
  ext.domain = Rect({R.center.x, y_face}, {R.half.x, 2 * R.half.y});
  // drop jump segments outside R-hat
  JumpSet trimmed;
  for (const auto& j : ext.jumps.segments) {
    auto c = clip_segment(j.geom, ext.domain);
    if (c) trimmed.segments.push_back({*c, j.amplitude});
  }
  ext.jumps = trimmed;
  return ext;
}

struct ExtensionConstants {
  double l1_ratio = 0;           // (2.2b)-type
  double jump_length_ratio = 0;  // (2.2c)-type
  double jump_energy_ratio = 0;  // (2.2d)-type
  double strain_ratio = 0;       // (2.2e)-type, in the L^p integral sense
};

// Measured ratios extension/original for the four extension estimates.
// Zero denominators report as ratio 0.
inline ExtensionConstants measure_extension_constants(const SbdField& f, const Rect& R,
                                                      const ReflectionParams& prm = {},
                                                      double p = 2.0) {
  const SbdField ext = reflect_extend(f, R, prm);
  auto ratio = [](double num, double den) { return den < 1e-14 ? 0.0 : num / den; };

  const double l1_num =
      quad_region(ext.domain, f.h, [&](const Vec2& x) { return ext.eval(x).norm(); });
  const double l1_den =
      quad_region(R, f.h, [&](const Vec2& x) { return f.eval(x).norm(); });

  double len_den = 0, en_den = 0;
  for (const auto& j : f.jumps.segments) {
    auto c = clip_segment(j.geom, R);
    if (!c) continue;
    len_den += c->length();
    en_den += quad_segment(*c, [&](const Vec2& x) { return j.amplitude(x).norm(); });
  }
  double len_num = 0, en_num = 0;
  for (const auto& j : ext.jumps.segments) {
    len_num += j.geom.length();
    en_num += quad_segment(j.geom, [&](const Vec2& x) { return j.amplitude(x).norm(); });
  }

  const double ep_num = quad_region(ext.domain, f.h, [&](const Vec2& x) {
    return std::pow(ext.jac(x).sym().frobenius(), p);
  });
  const double ep_den = quad_region(R, f.h, [&](const Vec2& x) {
    return std::pow(f.jac(x).sym().frobenius(), p);
  });

  ExtensionConstants out;
  out.l1_ratio = ratio(l1_num, l1_den);
  out.jump_length_ratio = ratio(len_num, len_den);
  out.jump_energy_ratio = ratio(en_num, en_den);
  out.strain_ratio = ratio(ep_num, ep_den);
  return out;
}

}  // namespace sbd
