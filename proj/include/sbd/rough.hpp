// Rough approximation runs: partition the run domain by lattice cells of
// size 2/k, classify nodes good/bad, patch exceptional sets near the jump by
// fitted rigid motions, mollify the patched field off the bad region and use
// the per-cell rigid motions on it. Two node rules are supported:
//   korn_poincare: good iff H^1(J cap Q_z) <= theta / k       (Theorem-3.1 style)
//   jump_energy:   good iff |E^j u|(qt_z) <= k^{-2}           (Prop-5.2 style)
// The jump set of the output is exactly the set of lattice edges where the
// assembled values differ; every edge carries an amplitude evaluator.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sbd/core.hpp"
#include "sbd/field.hpp"
#include "sbd/geometry.hpp"
#include "sbd/mollify.hpp"
#include "sbd/rigid.hpp"

namespace sbd {

enum class RoughVariant { korn_poincare, jump_energy };

namespace detail {
inline std::int64_t pack_key(std::int64_t a, std::int64_t b) {
  return ((a + (1ll << 30)) << 32) | (b + (1ll << 30));
}
}  // namespace detail

class RoughRun {
 public:
  struct Options {
    int k = 8;
    double theta = 0.1;
    RoughVariant variant = RoughVariant::korn_poincare;
    bool classify_only = false;
  };

  // node_in_region decides which lattice nodes belong to the run domain; the
  // default (empty) takes every node whose cell meets `node_bbox`.
  static std::shared_ptr<RoughRun> build(
      const SbdField& f, const Options& opt, const Rect& node_bbox,
      std::function<bool(const LatticeNode&)> node_in_region = {}) {
    auto run = std::shared_ptr<RoughRun>(new RoughRun(f, opt));
    run->construct(node_bbox, node_in_region);
    return run;
  }

  // --- evaluation ------------------------------------------------------
  Vec2 eval(const Vec2& x) const {
    if (in_bad_region(x)) return atilde_at(x)(x);
    return molly_value(x);
  }
  Mat2 jac(const Vec2& x) const {
    if (in_bad_region(x)) return atilde_at(x).W();
    Mat2 J;
    molly_value(x, &J);
    return J;
  }
  void eval_both(const Vec2& x, Vec2* v, Mat2* J) const {
    if (in_bad_region(x)) {
      const RigidMotion& a = atilde_at(x);
      *v = a(x);
      *J = a.W();
      return;
    }
    *v = molly_value(x, J);
  }
  bool in_bad_region(const Vec2& x) const {
    return bad_squares_.count(square_key(x)) > 0;
  }
  bool in_omega(const Vec2& x) const {
    if (omega_.empty()) return false;
    const double s = 2.0 / opt_.k;
    const std::int64_t ix0 = static_cast<std::int64_t>(std::floor(x.x / s - 0.5));
    const std::int64_t iy0 = static_cast<std::int64_t>(std::floor(x.y / s - 0.5));
    for (std::int64_t iy = iy0; iy <= iy0 + 1; ++iy)
      for (std::int64_t ix = ix0; ix <= ix0 + 1; ++ix) {
        auto it = omega_.find(detail::pack_key(ix, iy));
        if (it != omega_.end() && it->second.contains(x)) return true;
      }
    return false;
  }
  bool in_excluded(const Vec2& x) const { return in_bad_region(x) || in_omega(x); }

  // --- results ---------------------------------------------------------
  const std::vector<LatticeNode>& nodes() const { return nodes_; }
  const std::vector<char>& good_flags() const { return good_; }
  const std::vector<double>& node_measures() const { return measure_; }
  std::size_t bad_count() const { return bad_count_; }
  double bad_region_area() const {
    return static_cast<double>(bad_squares_.size()) / (double(opt_.k) * opt_.k);
  }
  double omega_area() const { return omega_area_; }
  double jump_length_seen() const { return jump_len_seen_; }
  const std::vector<JumpSegment>& jump_edges() const { return jump_edges_; }
  const Options& options() const { return opt_; }
  const SbdField& input() const { return f_; }

  // rigid motion used on the cell of x inside the bad region
  const RigidMotion& atilde_at(const Vec2& x) const {
    auto it = atilde_.find(node_key_of(x));
    if (it == atilde_.end())
      throw std::logic_error("RoughRun: missing rigid motion for bad cell");
    return it->second;
  }
  // (3.12)-style L1 ratio for a node, for a-posteriori checks
  double atilde_l1_ratio(const LatticeNode& n) const {
    auto it = atilde_.find(detail::pack_key(n.ix, n.iy));
    if (it == atilde_.end()) return 0.0;
    const Rect qt = qt_cell(n.z, opt_.k);
    const RigidMotion& a = it->second;
    const double num =
        quad_region(qt, f_.h, [&](const Vec2& x) { return (f_.eval(x) - a(x)).norm(); });
    const double den = eu_measure(f_, qt).total / opt_.k;
    return den < 1e-14 ? 0.0 : num / den;
  }

 private:
  RoughRun(const SbdField& f, const Options& opt) : f_(f), opt_(opt) {
    moll_.k = opt.k;
    mopt_.base_cells = moll_cells_for(moll_, f.h);
    if (opt.variant == RoughVariant::jump_energy) {
      sharp_ = f.jumps.geometry();
      mopt_.refine_depth = 4;
    }
  }

  struct OmegaPatch {
    Vec2 origin;
    double dx = 0, dy = 0;
    int nx = 0, ny = 0;
    std::unordered_set<std::int64_t> cells;
    RigidMotion a;
    std::size_t order = 0;

    bool contains(const Vec2& x) const {
      const int i = static_cast<int>(std::floor((x.x - origin.x) / dx));
      const int j = static_cast<int>(std::floor((x.y - origin.y) / dy));
      if (i < 0 || j < 0 || i >= nx || j >= ny) return false;
      return cells.count(detail::pack_key(i, j)) > 0;
    }
  };

  std::int64_t square_key(const Vec2& x) const {
    const double k = opt_.k;
    return detail::pack_key(static_cast<std::int64_t>(std::floor(x.x * k)),
                            static_cast<std::int64_t>(std::floor(x.y * k)));
  }
  std::int64_t node_key_of(const Vec2& x) const {
    const double s = 2.0 / opt_.k;
    return detail::pack_key(static_cast<std::int64_t>(std::floor(x.x / s)),
                            static_cast<std::int64_t>(std::floor(x.y / s)));
  }

  // patched field (3.15): u off the exceptional sets, fitted motions on them
  // in node order
  Vec2 ut_eval(const Vec2& y) const {
    if (!omega_.empty()) {
      const double s = 2.0 / opt_.k;
      const std::int64_t ix0 = static_cast<std::int64_t>(std::floor(y.x / s - 0.5));
      const std::int64_t iy0 = static_cast<std::int64_t>(std::floor(y.y / s - 0.5));
      const OmegaPatch* best = nullptr;
      for (std::int64_t iy = iy0; iy <= iy0 + 1; ++iy)
        for (std::int64_t ix = ix0; ix <= ix0 + 1; ++ix) {
          auto it = omega_.find(detail::pack_key(ix, iy));
          if (it != omega_.end() && it->second.contains(y))
            if (!best || it->second.order < best->order) best = &it->second;
        }
      if (best) return best->a(y);
    }
    return f_.eval(y);
  }

  Vec2 molly_value(const Vec2& x, Mat2* J = nullptr) const {
    if (opt_.variant == RoughVariant::korn_poincare)
      return mollify_point(ut_fn_, sharp_, moll_, x, J, mopt_);
    return mollify_point(f_.eval, sharp_, moll_, x, J, mopt_);
  }

  void construct(const Rect& node_bbox,
                 const std::function<bool(const LatticeNode&)>& node_in_region) {
    const int k = opt_.k;
    const double kd = k;
    ut_fn_ = [this](const Vec2& y) { return ut_eval(y); };

    // enumerate nodes whose cell meets the bbox, then filter by region
    Rect enumbox = node_bbox.dilated(2.0 / kd);
    for (const LatticeNode& n : cube_lattice(enumbox, k)) {
      if (node_in_region && !node_in_region(n)) continue;
      nodes_.push_back(n);
    }

    // classification
    good_.resize(nodes_.size(), 1);
    measure_.resize(nodes_.size(), 0.0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const LatticeNode& n = nodes_[i];
      double meas = 0;
      if (opt_.variant == RoughVariant::korn_poincare) {
        meas = length_inside(f_.jumps.geometry(), Q_cell(n.z, k));
        good_[i] = meas <= opt_.theta / kd ? 1 : 0;
      } else {
        const Rect qt = qt_cell(n.z, k);
        for (const auto& j : f_.jumps.segments) {
          auto c = clip_segment(j.geom, qt);
          if (!c) continue;
          meas += quad_segment(*c, [&](const Vec2& x) {
            return sym_tensor_product(j.amplitude(x), j.geom.normal).frobenius();
          });
        }
        good_[i] = meas <= 1.0 / (kd * kd) ? 1 : 0;
      }
      measure_[i] = meas;
      if (!good_[i]) {
        ++bad_count_;
        bad_nodes_.insert(detail::pack_key(n.ix, n.iy));
      }
    }
    jump_len_seen_ = length_inside(f_.jumps.geometry(), node_bbox.dilated(8.0 / kd));

    // bad region as a set of 1/k squares; span 4/k (korn_poincare uses Q_z,
    // jump_energy uses qt_z of half that size)
    const int span = opt_.variant == RoughVariant::korn_poincare ? 4 : 2;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (good_[i]) continue;
      const LatticeNode& n = nodes_[i];
      for (std::int64_t b = 2 * n.iy + 1 - span; b < 2 * n.iy + 1 + span; ++b)
        for (std::int64_t a = 2 * n.ix + 1 - span; a < 2 * n.ix + 1 + span; ++a)
          bad_squares_.insert(detail::pack_key(a, b));
    }

    if (opt_.classify_only) return;

    // rigid motions for every cell that may be queried inside the bad region
    std::unordered_set<std::int64_t> need;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (good_[i]) continue;
      const LatticeNode& n = nodes_[i];
      const int w = span / 2 + 1;
      for (std::int64_t dy = -w; dy <= w; ++dy)
        for (std::int64_t dx = -w; dx <= w; ++dx)
          need.insert(detail::pack_key(n.ix + dx, n.iy + dy));
    }
    for (const std::int64_t key : need) {
      const std::int64_t ix = (key >> 32) - (1ll << 30);
      const std::int64_t iy = (key & 0xffffffffll) - (1ll << 30);
      const Vec2 z{(2.0 * ix + 1.0) / kd, (2.0 * iy + 1.0) / kd};
      // whole-cell fit: the (3.12)-style motion must stay bounded on cells
      // the jump cuts in two
      atilde_[key] = fit_rigid(f_, qt_cell(z, k), 2.0, false).motion;
    }

    // exceptional patches on good nodes (Theorem-3.1 variant only)
    if (opt_.variant == RoughVariant::korn_poincare && !f_.jumps.empty()) {
      const auto jump_geom = f_.jumps.geometry();
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!good_[i]) continue;
        const LatticeNode& n = nodes_[i];
        const Rect qt = qt_cell(n.z, k);
        bool near = false;
        for (const Segment& s : jump_geom)
          if (clip_segment(s, qt.dilated(2 * f_.h + f_.h)).has_value()) {
            near = true;
            break;
          }
        if (!near) continue;
        OmegaPatch patch;
        const double h = f_.h;
        const int nx = std::max(1, static_cast<int>(std::ceil(2 * qt.half.x / h)));
        const int ny = std::max(1, static_cast<int>(std::ceil(2 * qt.half.y / h)));
        patch.origin = {qt.center.x - qt.half.x, qt.center.y - qt.half.y};
        patch.dx = 2 * qt.half.x / nx;
        patch.dy = 2 * qt.half.y / ny;
        patch.nx = nx;
        patch.ny = ny;
        for (int jy = 0; jy < ny; ++jy)
          for (int ix = 0; ix < nx; ++ix) {
            const Vec2 c{patch.origin.x + (ix + 0.5) * patch.dx,
                         patch.origin.y + (jy + 0.5) * patch.dy};
            if (distance_to_segments(c, jump_geom) <= 2 * h)
              patch.cells.insert(detail::pack_key(ix, jy));
          }
        if (patch.cells.empty()) continue;
        patch.a = fit_rigid(f_, qt).motion;
        patch.order = i;
        omega_area_ += patch.dx * patch.dy * static_cast<double>(patch.cells.size());
        omega_[detail::pack_key(n.ix, n.iy)] = std::move(patch);
      }
    }

    build_jump_edges(span);
  }

  void build_jump_edges(int span) {
    const double kd = opt_.k;
    // all unit squares in or adjacent to the bad region
    std::unordered_set<std::int64_t> region;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (good_[i]) continue;
      const LatticeNode& n = nodes_[i];
      for (std::int64_t b = 2 * n.iy - span; b < 2 * n.iy + 2 + span; ++b)
        for (std::int64_t a = 2 * n.ix - span; a < 2 * n.ix + 2 + span; ++a)
          region.insert(detail::pack_key(a, b));
    }
    auto owner_of = [&](std::int64_t a, std::int64_t b) -> std::int64_t {
      // 0: mollified zone; otherwise node key of the cell
      const Vec2 c{(a + 0.5) / kd, (b + 0.5) / kd};
      if (!bad_squares_.count(detail::pack_key(a, b))) return 0;
      return node_key_of(c) + 1;  // shift to keep 0 free
    };
    for (const std::int64_t key : region) {
      const std::int64_t a = (key >> 32) - (1ll << 30);
      const std::int64_t b = (key & 0xffffffffll) - (1ll << 30);
      const std::int64_t o = owner_of(a, b);
      const std::int64_t ox = owner_of(a + 1, b);
      const std::int64_t oy = owner_of(a, b + 1);
      if (o != ox) {
        Segment s({(a + 1) / kd, b / kd}, {(a + 1) / kd, (b + 1) / kd}, Vec2{1, 0});
        add_edge(s, o, ox);
      }
      if (o != oy) {
        Segment s({a / kd, (b + 1) / kd}, {(a + 1) / kd, (b + 1) / kd}, Vec2{0, 1});
        add_edge(s, o, oy);
      }
    }
  }

  void add_edge(const Segment& s, std::int64_t owner_minus, std::int64_t owner_plus) {
    const RoughRun* self = this;
    auto value = [self](std::int64_t owner, const Vec2& x) -> Vec2 {
      if (owner == 0) return self->molly_value(x);
      auto it = self->atilde_.find(owner - 1);
      if (it == self->atilde_.end())
        throw std::logic_error("RoughRun: edge owner without motion");
      return it->second(x);
    };
    jump_edges_.push_back({s, [value, owner_minus, owner_plus](const Vec2& x) {
                             return value(owner_plus, x) - value(owner_minus, x);
                           }});
  }

  SbdField f_;
  Options opt_;
  Mollifier moll_;
  MollifyOptions mopt_;
  VecFn ut_fn_;
  std::vector<Segment> sharp_;

  std::vector<LatticeNode> nodes_;
  std::vector<char> good_;
  std::vector<double> measure_;
  std::size_t bad_count_ = 0;
  std::unordered_set<std::int64_t> bad_nodes_;
  std::unordered_set<std::int64_t> bad_squares_;
  std::unordered_map<std::int64_t, RigidMotion> atilde_;
  std::unordered_map<std::int64_t, OmegaPatch> omega_;
  double omega_area_ = 0;
  double jump_len_seen_ = 0;
  std::vector<JumpSegment> jump_edges_;
};

// ---------------------------------------------------------------------------
// public operations

struct NodeClassification {
  int k = 0;
  double theta = 0;
  std::shared_ptr<RoughRun> run;

  std::size_t node_count() const { return run->nodes().size(); }
  std::size_t bad_count() const { return run->bad_count(); }
  double bad_region_area() const { return run->bad_region_area(); }
  double jump_length() const { return run->jump_length_seen(); }
  bool in_bad_region(const Vec2& x) const { return run->in_bad_region(x); }
};

// Room-for-construction check: the run domain (target) must sit inside the
// field's domain with margin coeff/k. On failure the error reports the
// smallest k admissible for the available margin.
inline void require_margin(const SbdField& f, int k, double coeff, const char* who) {
  const Rect omega = f.target_or_domain();
  const Rect dom = f.domain;
  const double margin =
      std::min(std::min((omega.center.x - omega.half.x) - (dom.center.x - dom.half.x),
                        (dom.center.x + dom.half.x) - (omega.center.x + omega.half.x)),
               std::min((omega.center.y - omega.half.y) - (dom.center.y - dom.half.y),
                        (dom.center.y + dom.half.y) - (omega.center.y + omega.half.y)));
  const double needed = coeff / k;
  if (!f.target || margin < needed) {
    const std::string kreq =
        margin > 0 ? std::to_string(static_cast<long long>(std::ceil(coeff / margin)))
                   : std::string("unattainable (no margin)");
    throw std::invalid_argument(std::string(who) +
                                ": domain margin too small; need margin >= " +
                                std::to_string(needed) + " (have " +
                                std::to_string(margin) +
                                "); required minimum k = " + kreq);
  }
}

inline NodeClassification classify_nodes(const SbdField& f, int k, double theta) {
  if (!(theta > 0 && theta < 1))
    throw std::invalid_argument("classify_nodes: theta in (0,1)");
  require_margin(f, k, 16.0 * kSqrt2, "classify_nodes");
  RoughRun::Options opt;
  opt.k = k;
  opt.theta = theta;
  opt.classify_only = true;
  NodeClassification out;
  out.k = k;
  out.theta = theta;
  out.run = RoughRun::build(f, opt, f.target_or_domain());
  return out;
}

struct RoughApproximant {
  std::shared_ptr<RoughRun> run;
  SbdField uk;  // glued approximant on the target domain

  double excluded_area() const { return run->bad_region_area() + run->omega_area(); }
  bool in_excluded(const Vec2& x) const { return run->in_excluded(x); }
};

namespace detail {
inline SbdField field_of_run(const std::shared_ptr<RoughRun>& run, const Rect& omega) {
  SbdField uk;
  uk.domain = omega;
  uk.h = run->input().h;
  uk.retain = {run};
  const RoughRun* r = run.get();
  uk.eval = [r](const Vec2& x) { return r->eval(x); };
  uk.jac = [r](const Vec2& x) { return r->jac(x); };
  for (const auto& e : run->jump_edges()) {
    auto c = clip_segment(e.geom, omega);
    if (c) uk.jumps.segments.push_back({*c, e.amplitude});
  }
  return uk;
}
}  // namespace detail

inline RoughApproximant build_rough(const SbdField& f, int k, double theta) {
  if (!(theta > 0 && theta < 1))
    throw std::invalid_argument("build_rough: theta in (0,1)");
  require_margin(f, k, 16.0 * kSqrt2, "build_rough");
  RoughRun::Options opt;
  opt.k = k;
  opt.theta = theta;
  RoughApproximant out;
  out.run = RoughRun::build(f, opt, f.target_or_domain());
  out.uk = detail::field_of_run(out.run, f.target_or_domain());
  return out;
}

inline RoughApproximant build_rough_inf(const SbdField& f, int k) {
  require_margin(f, k, 8.0 * kSqrt2, "build_rough_inf");
  RoughRun::Options opt;
  opt.k = k;
  opt.variant = RoughVariant::jump_energy;
  RoughApproximant out;
  out.run = RoughRun::build(f, opt, f.target_or_domain());
  out.uk = detail::field_of_run(out.run, f.target_or_domain());
  return out;
}

struct ConvRough {
  SbdField uk;
  double strain_l1 = 0;      // int_Omega |e(u * phi_k)|
  double ev_enlarged = 0;    // |Eu|(Omega + B(0,1/k))
  bool bound_holds = false;  // strain_l1 <= ev_enlarged (5.3)
};

inline ConvRough build_rough_conv(const SbdField& f, int k) {
  require_margin(f, k, 1.0, "build_rough_conv");
  const Rect omega = f.target_or_domain();
  Mollifier m{k};
  ConvRough out;
  out.uk = mollify(f, m, omega);
  // jump-aware quadrature for the strain of the mollified field
  MollifyOptions opt;
  opt.base_cells = moll_cells_for(m, f.h);
  opt.refine_depth = 4;
  const auto sharp = f.jumps.geometry();
  const double hq = std::min(f.h, 1.0 / (4.0 * k));
  out.strain_l1 = quad_region(omega, hq, [&](const Vec2& x) {
    Mat2 J;
    mollify_point(f.eval, sharp, m, x, &J, opt);
    return J.sym().frobenius();
  });
  out.ev_enlarged = eu_measure(f, omega.dilated(1.0 / k)).total;
  out.bound_holds = out.strain_l1 <= out.ev_enlarged + 1e-6 * (1.0 + out.strain_l1);
  return out;
}

}  // namespace sbd
