// Named synthetic fields used by the command-line tool and the test suites.
// Everything here is deterministic.
#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbd/expr.hpp"
#include "sbd/field.hpp"

namespace sbd {

inline const std::vector<std::string>& corpus_ids() {
  static const std::vector<std::string> ids = {
      "piecewise-rigid-flat", "curved-crack-strained", "pure-jump", "smooth-poly",
      "boundary-trace"};
  return ids;
}

struct FieldSpec {
  Rect domain;
  std::optional<Rect> target;
  double h = 1.0 / 128.0;
  std::string base1 = "0", base2 = "0";
  struct CrackSpec {
    std::vector<Vec2> vertices;
    std::string amp1 = "0", amp2 = "0";
  };
  std::vector<CrackSpec> cracks;

  SbdField build() const {
    std::vector<Crack> cs;
    for (const auto& c : cracks) {
      Crack cr;
      cr.curve = Polyline(c.vertices);
      cr.amp = PolyField::parse(c.amp1, c.amp2);
      cs.push_back(std::move(cr));
    }
    return make_piecewise_field(domain, h, PolyField::parse(base1, base2),
                                std::move(cs), target);
  }
};

inline FieldSpec corpus_field_spec(const std::string& id) {
  FieldSpec spec;
  spec.domain = Rect::from_bounds(-4, -4, 5, 5);
  spec.target = Rect::from_bounds(0, 0, 1, 1);
  spec.h = 1.0 / 128.0;
  if (id == "piecewise-rigid-flat") {
    // two copies of one rigid motion, offset by (1,0) across y = 0.5
    spec.base1 = "0.05 + 0.04*x2";
    spec.base2 = "-0.03 - 0.04*x1";
    FieldSpec::CrackSpec c;
    c.vertices = {{-4.0, 0.5}, {5.0, 0.5}};
    c.amp1 = "1";
    c.amp2 = "0";
    spec.cracks.push_back(c);
  } else if (id == "curved-crack-strained") {
    // gentle parabolic crack, one-sided strains vanishing at the crack,
    // amplitude varying along it
    spec.base1 = "0.3*(x2 - 0.5 - 0.05*(x1-0.5)^2)^2";
    spec.base2 = "0.15*(x2 - 0.5 - 0.05*(x1-0.5)^2)^2";
    FieldSpec::CrackSpec c;
    for (int i = 0; i <= 256; ++i) {
      const double x = -4.0 + 9.0 * i / 256.0;
      c.vertices.push_back({x, 0.5 + 0.05 * (x - 0.5) * (x - 0.5)});
    }
    c.amp1 = "0.6 + 0.25*(x1 - 0.5)";
    c.amp2 = "-0.1*(x1 - 0.5)";
    spec.cracks.push_back(c);
  } else if (id == "pure-jump") {
    // zero below, jump-dominated above a flat crack; the ambient amplitude
    // extension carries a normal derivative so the approximation error has
    // its generic first-order behaviour
    FieldSpec::CrackSpec c;
    c.vertices = {{-4.0, 0.5}, {5.0, 0.5}};
    c.amp1 = "0.6 + 0.35*(x2 - 0.5)";
    c.amp2 = "-0.15*(x2 - 0.5)";
    spec.cracks.push_back(c);
  } else if (id == "smooth-poly") {
    spec.base1 = "0.3*x1^2*x2^2 - 0.1*x1^2";
    spec.base2 = "0.2*x1*x2 + 0.1*x2^2";
  } else if (id == "boundary-trace") {
    // domain equals the target: exercises the zero-extension path; the trace
    // vanishes near the corners
    spec.domain = Rect::from_bounds(0, 0, 1, 1);
    spec.target.reset();
    spec.base1 = "6.4*x2^2*(1-x2)^2";
    spec.base2 = "0";
  } else {
    throw std::invalid_argument("unknown corpus id: " + id);
  }
  return spec;
}

inline SbdField corpus_field(const std::string& id) {
  return corpus_field_spec(id).build();
}

// ---------------------------------------------------------------------------
// test corpora

// ten jump fields through the cube (-2r, 2r)^2 for the commutator estimate
inline std::vector<SbdField> lemma51_corpus(double r, double h) {
  std::vector<SbdField> out;
  for (int i = 0; i < 10; ++i) {
    const double slope = -0.45 + 0.1 * i;  // |slope| <= 0.45
    const double offset = 0.3 * r * std::sin(1.0 + 2.0 * i);
    Crack c;
    const double span = 4.0 * r;
    c.curve = Polyline({{-span, offset - slope * span}, {span, offset + slope * span}});
    const double a1 = 0.3 + 0.1 * i, a2 = (i % 3 == 0) ? 0.4 : -0.2;
    c.amp = PolyField(Poly2::constant(a1), Poly2::constant(a2));
    PolyField base = (i % 2 == 0)
                         ? PolyField::parse("0", "0")
                         : PolyField::parse("0.2*x2^2", "0.1*x1*x2");
    auto f = make_piecewise_field(Rect::from_bounds(-4 * r, -4 * r, 4 * r, 4 * r), h,
                                  std::move(base), {c});
    out.push_back(std::move(f));
  }
  return out;
}

// ten fields on a rectangle for the extension-constant measurements; jump
// sets stay away from the top edge and from verticality
inline std::vector<SbdField> extension_corpus(double h) {
  std::vector<SbdField> out;
  const Rect R = Rect::from_bounds(-1, -1, 1, 0);
  for (int i = 0; i < 10; ++i) {
    std::vector<Crack> cracks;
    PolyField base = PolyField::parse("0", "0");
    switch (i % 5) {
      case 0:
        base = PolyField::parse("0.1 + 0.2*x2", "-0.05 - 0.2*x1");  // rigid
        break;
      case 1:
        base = PolyField::parse("0.3*x1 + 0.1*x2", "0.2*x2");  // affine strain
        break;
      case 2:
        base = PolyField::parse("0.2*x1^2*x2", "0.1*x2^3 - 0.2*x1");
        break;
      case 3: {
        Crack c;
        const double depth = -0.25 - 0.1 * (i / 5.0);
        const double slope = 0.2;
        c.curve = Polyline({{-1.5, depth - 1.5 * slope}, {1.5, depth + 1.5 * slope}});
        c.amp = PolyField::parse("0.5", "0.2");
        cracks.push_back(std::move(c));
        base = PolyField::parse("0.1*x2^2", "0");
        break;
      }
      case 4: {
        Crack c;
        c.curve = Polyline({{-1.5, -0.6}, {1.5, -0.6}});
        c.amp = PolyField::parse("0.8 + 0.2*x1", "-0.3");
        cracks.push_back(std::move(c));
        break;
      }
    }
    auto f = make_piecewise_field(Rect::from_bounds(-2, -2, 2, 2), h, std::move(base),
                                  std::move(cracks));
    out.push_back(std::move(f));
  }
  return out;
}

// twenty jump-free polynomial fields (degree <= 3), deterministic seed
inline std::vector<SbdField> polynomial_corpus(std::uint64_t seed, double h,
                                               const Rect& domain) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-0.5, 0.5);
  std::vector<SbdField> out;
  for (int n = 0; n < 20; ++n) {
    Poly2 u1 = Poly2::constant(coef(rng)), u2 = Poly2::constant(coef(rng));
    const Poly2 x = Poly2::var(0), y = Poly2::var(1);
    std::vector<Poly2> monos = {x,     y,     x * x, x * y, y * y,
                                x * x * x, x * x * y, x * y * y, y * y * y};
    for (const Poly2& m : monos) {
      u1 = u1 + m * coef(rng);
      u2 = u2 + m * coef(rng);
    }
    out.push_back(make_smooth_field(domain, h, PolyField(u1, u2)));
  }
  return out;
}

}  // namespace sbd
