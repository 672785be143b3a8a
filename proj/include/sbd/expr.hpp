// Tiny closed expression vocabulary for field specifications: polynomials in
// x1, x2 (degree <= 4 by convention) written as infix strings, e.g.
// "0.3*x1^2*x2 - 1.5*(x2 - 0.5) + 2". Parsed once into a term list with exact
// partial derivatives, so reference strains are available in closed form.
#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbd/core.hpp"

namespace sbd {

class Poly2 {
 public:
  Poly2() = default;
  static Poly2 constant(double c) {
    Poly2 p;
    if (c != 0.0) p.coef_[{0, 0}] = c;
    return p;
  }
  static Poly2 var(int which) {  // 0 -> x1, 1 -> x2
    Poly2 p;
    if (which == 0)
      p.coef_[{1, 0}] = 1.0;
    else
      p.coef_[{0, 1}] = 1.0;
    return p;
  }

  Poly2 operator+(const Poly2& o) const {
    Poly2 r = *this;
    for (const auto& [k, v] : o.coef_) r.coef_[k] += v;
    r.prune();
    return r;
  }
  Poly2 operator-(const Poly2& o) const {
    Poly2 r = *this;
    for (const auto& [k, v] : o.coef_) r.coef_[k] -= v;
    r.prune();
    return r;
  }
  Poly2 operator*(const Poly2& o) const {
    Poly2 r;
    for (const auto& [ka, va] : coef_)
      for (const auto& [kb, vb] : o.coef_)
        r.coef_[{ka.first + kb.first, ka.second + kb.second}] += va * vb;
    r.prune();
    return r;
  }
  Poly2 operator*(double s) const { return *this * constant(s); }
  Poly2 operator-() const { return constant(0.0) - *this; }

  Poly2 pow(int n) const {
    if (n < 0) throw std::invalid_argument("Poly2: negative exponent");
    Poly2 r = constant(1.0);
    for (int i = 0; i < n; ++i) r = r * (*this);
    return r;
  }

  double eval(const Vec2& x) const {
    double s = 0.0;
    for (const auto& [k, v] : coef_)
      s += v * ipow(x.x, k.first) * ipow(x.y, k.second);
    return s;
  }

  Poly2 d(int which) const {  // partial derivative
    Poly2 r;
    for (const auto& [k, v] : coef_) {
      if (which == 0 && k.first > 0) r.coef_[{k.first - 1, k.second}] += v * k.first;
      if (which == 1 && k.second > 0) r.coef_[{k.first, k.second - 1}] += v * k.second;
    }
    r.prune();
    return r;
  }

  int degree() const {
    int deg = 0;
    for (const auto& [k, v] : coef_) deg = std::max(deg, k.first + k.second);
    return deg;
  }
  bool is_zero() const { return coef_.empty(); }

 private:
  static double ipow(double b, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
  }
  void prune() {
    for (auto it = coef_.begin(); it != coef_.end();)
      it = (it->second == 0.0) ? coef_.erase(it) : std::next(it);
  }
  std::map<std::pair<int, int>, double> coef_;
};

// Recursive-descent parser: numbers, x1/x2 (also x/y aliases), + - * / ^, parens.
// Division only by numeric literals.
namespace detail {
class ExprParser {
 public:
  explicit ExprParser(const std::string& s) : s_(s) {}
  Poly2 parse() {
    Poly2 p = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing input");
    return p;
  }

 private:
  Poly2 expr() {
    Poly2 p = term();
    for (;;) {
      skip_ws();
      if (accept('+'))
        p = p + term();
      else if (accept('-'))
        p = p - term();
      else
        return p;
    }
  }
  Poly2 term() {
    Poly2 p = unary();
    for (;;) {
      skip_ws();
      if (accept('*')) {
        p = p * unary();
      } else if (accept('/')) {
        Poly2 q = unary();
        if (q.degree() != 0) fail("division only by constants");
        const double c = q.eval({0, 0});
        if (c == 0.0) fail("division by zero");
        p = p * (1.0 / c);
      } else {
        return p;
      }
    }
  }
  Poly2 unary() {
    skip_ws();
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }
  Poly2 power() {
    Poly2 base = atom();
    skip_ws();
    if (accept('^')) {
      skip_ws();
      const size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) fail("exponent must be a nonnegative integer");
      return base.pow(std::stoi(s_.substr(start, pos_ - start)));
    }
    return base;
  }
  Poly2 atom() {
    skip_ws();
    if (accept('(')) {
      Poly2 p = expr();
      skip_ws();
      if (!accept(')')) fail("expected ')'");
      return p;
    }
    if (pos_ < s_.size() &&
        (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
      size_t used = 0;
      const double v = std::stod(s_.substr(pos_), &used);
      pos_ += used;
      return Poly2::constant(v);
    }
    if (match_word("x1") || match_word("x")) return Poly2::var(0);
    if (match_word("x2") || match_word("y")) return Poly2::var(1);
    fail("unexpected token");
    return {};
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool match_word(const std::string& w) {
    if (s_.compare(pos_, w.size(), w) != 0) return false;
    const size_t end = pos_ + w.size();
    if (end < s_.size() &&
        (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
      return false;
    pos_ = end;
    return true;
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument("expression '" + s_ + "': " + msg + " at offset " +
                                std::to_string(pos_));
  }

  std::string s_;
  size_t pos_ = 0;
};
}  // namespace detail

inline Poly2 parse_expr(const std::string& s) { return detail::ExprParser(s).parse(); }

// Vector-valued polynomial (one Poly2 per displacement component) with its
// exact Jacobian.
struct PolyField {
  Poly2 u1, u2;
  Poly2 d11, d12, d21, d22;  // d(i)(j) = d u_i / d x_j

  PolyField() = default;
  PolyField(Poly2 a, Poly2 b) : u1(std::move(a)), u2(std::move(b)) {
    d11 = u1.d(0);
    d12 = u1.d(1);
    d21 = u2.d(0);
    d22 = u2.d(1);
  }
  static PolyField parse(const std::string& e1, const std::string& e2) {
    return PolyField(parse_expr(e1), parse_expr(e2));
  }

  Vec2 eval(const Vec2& x) const { return {u1.eval(x), u2.eval(x)}; }
  Mat2 jacobian(const Vec2& x) const {
    return {d11.eval(x), d12.eval(x), d21.eval(x), d22.eval(x)};
  }
};

}  // namespace sbd
