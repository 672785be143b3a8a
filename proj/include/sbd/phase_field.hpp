// Cohesive phase-field functional F_eps(u, v) = int v|e(u)|^2 + psi(v)/eps
// + eps^{p-1}|grad v|^p, its sharp limit F(u) = int |e(u)|^2 + a H^{n-1}(J_u)
// + b int |[u] (.) nu|, the constants a, b, alternating minimization, and the
// desk-scale Gamma-convergence check (1D primary, 2D smoke).
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbd/core.hpp"
#include "sbd/field.hpp"

namespace sbd {

using PsiFn = std::function<double(double)>;

struct CohesiveConstants {
  double a = 0;
  double b = 0;
  double p = 2;
};

// a = 2 p^{1/p} p'^{1/p'} int_0^1 psi^{1/p}, b = 2 psi(0)^{1/2}
inline CohesiveConstants cohesive_constants(const PsiFn& psi, double p) {
  if (!(p > 1)) throw std::invalid_argument("cohesive_constants: p > 1");
  if (std::abs(psi(1.0)) > 1e-12)
    throw std::invalid_argument("cohesive_constants: psi(1) must be 0");
  for (int i = 0; i < 64; ++i) {
    const double s0 = i / 64.0, s1 = (i + 1) / 64.0;
    if (psi(s1) > psi(s0) + 1e-12)
      throw std::invalid_argument("cohesive_constants: psi must be decreasing");
  }
  const double pp = p / (p - 1.0);
  CohesiveConstants c;
  c.p = p;
  const double integral = adaptive_simpson(
      [&](double s) { return std::pow(std::max(psi(s), 0.0), 1.0 / p); }, 0.0, 1.0,
      1e-12);
  c.a = 2.0 * std::pow(p, 1.0 / p) * std::pow(pp, 1.0 / pp) * integral;
  c.b = 2.0 * std::sqrt(std::max(psi(0.0), 0.0));
  return c;
}

// ---------------------------------------------------------------------------
// discrete states (1D bar or 2D grid)

struct PhaseFieldState {
  int dim = 1;     // 1: scalar displacement on a bar, 2: vector on a grid
  int nx = 0, ny = 0;  // cells per axis (nodes = cells + 1)
  double hx = 0, hy = 0;
  double eps = 0;
  double p = 2;
  PsiFn psi;
  // 1D: u[i], i = 0..nx; 2D: u[2*(j*(nx+1)+i)+c]
  std::vector<double> u;
  std::vector<double> v;  // nodal, in [eps, 1]

  std::size_t nodes() const {
    return dim == 1 ? static_cast<std::size_t>(nx + 1)
                    : static_cast<std::size_t>((nx + 1) * (ny + 1));
  }
};

// cellwise energy; v enters through cell averages, all terms midpoint-type
inline double eval_F_eps(const PhaseFieldState& st) {
  const double eps = st.eps, p = st.p;
  double E = 0;
  if (st.dim == 1) {
    for (int i = 0; i < st.nx; ++i) {
      const double vbar = 0.5 * (st.v[i] + st.v[i + 1]);
      const double s = (st.u[i + 1] - st.u[i]) / st.hx;
      const double dv = (st.v[i + 1] - st.v[i]) / st.hx;
      E += st.hx * (vbar * s * s + st.psi(vbar) / eps +
                    std::pow(eps, p - 1.0) * std::pow(std::abs(dv), p));
    }
    return E;
  }
  const int nx = st.nx, ny = st.ny;
  auto uat = [&](int i, int j, int c) {
    return st.u[2 * (static_cast<std::size_t>(j) * (nx + 1) + i) + c];
  };
  auto vat = [&](int i, int j) {
    return st.v[static_cast<std::size_t>(j) * (nx + 1) + i];
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      // cell-centered strains from bilinear differences
      const double ux_x =
          0.5 * ((uat(i + 1, j, 0) - uat(i, j, 0)) + (uat(i + 1, j + 1, 0) - uat(i, j + 1, 0))) /
          st.hx;
      const double uy_y =
          0.5 * ((uat(i, j + 1, 1) - uat(i, j, 1)) + (uat(i + 1, j + 1, 1) - uat(i + 1, j, 1))) /
          st.hy;
      const double ux_y =
          0.5 * ((uat(i, j + 1, 0) - uat(i, j, 0)) + (uat(i + 1, j + 1, 0) - uat(i + 1, j, 0))) /
          st.hy;
      const double uy_x =
          0.5 * ((uat(i + 1, j, 1) - uat(i, j, 1)) + (uat(i + 1, j + 1, 1) - uat(i, j + 1, 1))) /
          st.hx;
      const double e12 = 0.5 * (ux_y + uy_x);
      const double strain2 = ux_x * ux_x + uy_y * uy_y + 2 * e12 * e12;
      const double vbar =
          0.25 * (vat(i, j) + vat(i + 1, j) + vat(i, j + 1) + vat(i + 1, j + 1));
      const double dvx = 0.5 *
                         ((vat(i + 1, j) - vat(i, j)) + (vat(i + 1, j + 1) - vat(i, j + 1))) /
                         st.hx;
      const double dvy = 0.5 *
                         ((vat(i, j + 1) - vat(i, j)) + (vat(i + 1, j + 1) - vat(i + 1, j))) /
                         st.hy;
      const double gv = std::sqrt(dvx * dvx + dvy * dvy);
      E += st.hx * st.hy *
           (vbar * strain2 + st.psi(vbar) / eps + std::pow(eps, p - 1.0) * std::pow(gv, p));
    }
  return E;
}

// sharp limit functional on an SBD^2 field
inline double eval_F_limit(const SbdField& f, const CohesiveConstants& c) {
  const double bulk = quad_region(f.domain, f.h, [&](const Vec2& x) {
    const Mat2 e = f.jac(x).sym();
    return e.a * e.a + e.b * e.b + e.c * e.c + e.d * e.d;
  });
  double len = 0, coh = 0;
  for (const auto& j : f.jumps.segments) {
    len += j.geom.length();
    coh += quad_segment(j.geom, [&](const Vec2& x) {
      return sym_tensor_product(j.amplitude(x), j.geom.normal).frobenius();
    });
  }
  return bulk + c.a * len + c.b * coh;
}

// 1D sharp limit for a bar: elastic + a * (#jumps) + b * sum |[u]|
inline double eval_F_limit_1d(double elastic, int jumps, double total_amp,
                              const CohesiveConstants& c) {
  return elastic + c.a * jumps + c.b * total_amp;
}

// ---------------------------------------------------------------------------
// alternating minimization (1D)

struct MinimizeResult {
  PhaseFieldState state;
  double energy = 0;
  int iterations = 0;
  bool converged = false;
  bool monotone = true;  // energy never increased along the outer loop
};

namespace detail {

// tridiagonal solve (Thomas); diag a, lower l, upper r, rhs d
inline void thomas(std::vector<double>& a, std::vector<double>& l,
                   std::vector<double>& r, std::vector<double>& d) {
  const std::size_t n = a.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = l[i] / a[i - 1];
    a[i] -= m * r[i - 1];
    d[i] -= m * d[i - 1];
  }
  d[n - 1] /= a[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - r[i] * d[i + 1]) / a[i];
}

// u-step: minimize sum vbar_c (u' )^2 h with u(0), u(L) fixed; conjugate
// gradient on the tridiagonal system, relative residual <= 1e-9
inline void u_step_1d(PhaseFieldState& st, double u0, double uL) {
  const int n = st.nx;
  st.u[0] = u0;
  st.u[n] = uL;
  if (n < 2) return;
  // weights per cell
  std::vector<double> wc(n);
  for (int i = 0; i < n; ++i) wc[i] = 0.5 * (st.v[i] + st.v[i + 1]) / st.hx;
  // system for interior nodes: -(w_{i-1} u_{i-1} - (w_{i-1}+w_i) u_i + w_i u_{i+1}) = 0
  const int m = n - 1;
  std::vector<double> x(m), r(m), pvec(m), Ap(m);
  auto apply = [&](const std::vector<double>& y, std::vector<double>& out) {
    for (int i = 0; i < m; ++i) {
      const double yim = i > 0 ? y[i - 1] : 0.0;
      const double yip = i + 1 < m ? y[i + 1] : 0.0;
      out[i] = (wc[i] + wc[i + 1]) * y[i] - wc[i] * yim - wc[i + 1] * yip;
    }
  };
  for (int i = 0; i < m; ++i) x[i] = st.u[i + 1];
  std::vector<double> b(m, 0.0);
  b[0] += wc[0] * u0;
  b[m - 1] += wc[n - 1] * uL;
  apply(x, Ap);
  double rr = 0;
  for (int i = 0; i < m; ++i) {
    r[i] = b[i] - Ap[i];
    rr += r[i] * r[i];
  }
  double bb = 0;
  for (int i = 0; i < m; ++i) bb += b[i] * b[i];
  const double tol2 = 1e-18 * std::max(bb, 1e-300);
  pvec = r;
  for (int it = 0; it < 4 * m + 16 && rr > tol2; ++it) {
    apply(pvec, Ap);
    double pAp = 0;
    for (int i = 0; i < m; ++i) pAp += pvec[i] * Ap[i];
    if (pAp <= 0) break;
    const double alpha = rr / pAp;
    double rr2 = 0;
    for (int i = 0; i < m; ++i) {
      x[i] += alpha * pvec[i];
      r[i] -= alpha * Ap[i];
      rr2 += r[i] * r[i];
    }
    const double beta = rr2 / rr;
    rr = rr2;
    for (int i = 0; i < m; ++i) pvec[i] = r[i] + beta * pvec[i];
  }
  for (int i = 0; i < m; ++i) st.u[i + 1] = x[i];
}

// v-step: minimize over v in [eps,1] with u fixed. For p = 2 with linear
// psi this is a box-constrained tridiagonal QP solved by an active-set loop
// (direct solves with clamping and release); a projected-gradient pass backs
// it up, and the better of the two is kept, so the step never increases the
// energy. General p or psi uses the projected-gradient path alone.
inline void v_step_projected_gradient(PhaseFieldState& st,
                                      const std::vector<double>& s2, int max_it) {
  const int n = st.nx;
  const double eps = st.eps, p = st.p;
  auto energy_v = [&](const std::vector<double>& v) {
    double E = 0;
    for (int i = 0; i < n; ++i) {
      const double vbar = 0.5 * (v[i] + v[i + 1]);
      const double dv = (v[i + 1] - v[i]) / st.hx;
      E += st.hx * (vbar * s2[i] + st.psi(vbar) / eps +
                    std::pow(eps, p - 1.0) * std::pow(std::abs(dv), p));
    }
    return E;
  };
  std::vector<double> g(n + 1);
  double step = st.hx;
  for (int it = 0; it < max_it; ++it) {
    const double E0 = energy_v(st.v);
    for (int i = 0; i <= n; ++i) {
      const double save = st.v[i];
      const double d1 = 1e-7;
      st.v[i] = std::min(save + d1, 1.0);
      const double Ep = energy_v(st.v);
      st.v[i] = std::max(save - d1, eps);
      const double Em = energy_v(st.v);
      const double width = std::min(save + d1, 1.0) - std::max(save - d1, eps);
      st.v[i] = save;
      g[i] = width > 0 ? (Ep - Em) / width : 0.0;
    }
    bool improved = false;
    for (int bt = 0; bt < 40; ++bt) {
      std::vector<double> trial(n + 1);
      for (int i = 0; i <= n; ++i)
        trial[i] = std::clamp(st.v[i] - step * g[i], eps, 1.0);
      if (energy_v(trial) < E0 - 1e-15) {
        st.v = trial;
        improved = true;
        step *= 1.3;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
}

inline void v_step_1d(PhaseFieldState& st) {
  const int n = st.nx;
  const double eps = st.eps, p = st.p;
  std::vector<double> s2(n);
  for (int i = 0; i < n; ++i) {
    const double s = (st.u[i + 1] - st.u[i]) / st.hx;
    s2[i] = s * s;
  }
  const std::vector<double> v_before = st.v;
  const double E_before = eval_F_eps(st);

  const bool linear_psi =
      std::abs(st.psi(0.25) - (st.psi(0.0) + 0.25 * (st.psi(1.0) - st.psi(0.0)))) <
          1e-12 &&
      std::abs(st.psi(0.7) - (st.psi(0.0) + 0.7 * (st.psi(1.0) - st.psi(0.0)))) < 1e-12;

  std::vector<double> qp_candidate;
  if (p == 2.0 && linear_psi) {
    // E(v) = 1/2 v^T A v - d^T v + const with A the eps|v'|^2 stiffness
    // (singular; ridge keeps the free solves well posed) and
    // d_i = -sum_{cells c at i} (h/2)(s2_c + c1/eps).
    const double c1 = st.psi(1.0) - st.psi(0.0);
    const double w = 2.0 * eps / st.hx;
    const double ridge = 1e-12 * w;
    std::vector<double> d(n + 1, 0.0);
    for (int i = 0; i <= n; ++i)
      for (const int c : {i - 1, i}) {
        if (c < 0 || c >= n) continue;
        d[i] += -0.5 * st.hx * (s2[c] + c1 / eps);
      }
    auto A_row = [&](int i, const std::vector<double>& v) {
      double r = ridge * v[i];
      if (i > 0) r += w * (v[i] - v[i - 1]);
      if (i < n) r += w * (v[i] - v[i + 1]);
      return r;
    };
    std::vector<int> state(n + 1, 0);  // 0 free, -1 at eps, +1 at 1
    std::vector<double> v(n + 1);
    for (int i = 0; i <= n; ++i) {
      v[i] = std::clamp(v_before[i], eps, 1.0);
      if (v[i] <= eps) state[i] = -1;
      if (v[i] >= 1.0) state[i] = +1;
    }
    for (int pass = 0; pass < 4 * (n + 2); ++pass) {
      // solve on the free set
      std::vector<double> a, lo, up, rhs;
      a.assign(n + 1, 1.0);
      lo.assign(n + 1, 0.0);
      up.assign(n + 1, 0.0);
      rhs.assign(n + 1, 0.0);
      for (int i = 0; i <= n; ++i) {
        if (state[i] != 0) {
          a[i] = 1.0;
          rhs[i] = state[i] < 0 ? eps : 1.0;
          continue;
        }
        double diag = ridge, r = d[i];
        if (i > 0) {
          diag += w;
          if (state[i - 1] == 0)
            lo[i] = -w;
          else
            r += w * (state[i - 1] < 0 ? eps : 1.0);
        }
        if (i < n) {
          diag += w;
          if (state[i + 1] == 0)
            up[i] = -w;
          else
            r += w * (state[i + 1] < 0 ? eps : 1.0);
        }
        a[i] = diag;
        rhs[i] = r;
      }
      thomas(a, lo, up, rhs);
      v = rhs;
      // clamp the worst violator
      int worst = -1;
      double worst_v = 0;
      for (int i = 0; i <= n; ++i) {
        if (state[i] != 0) continue;
        const double viol = std::max(eps - v[i], v[i] - 1.0);
        if (viol > 1e-14 && (worst < 0 || viol > worst_v)) {
          worst = i;
          worst_v = viol;
        }
      }
      if (worst >= 0) {
        state[worst] = (v[worst] < eps) ? -1 : +1;
        continue;
      }
      // KKT release: lower bound needs grad >= 0, upper needs grad <= 0
      int rel = -1;
      double rel_v = 1e-12;
      for (int i = 0; i <= n; ++i) {
        if (state[i] == 0) continue;
        const double grad = A_row(i, v) - d[i];
        const double score = state[i] < 0 ? -grad : grad;
        if (score > rel_v) {
          rel_v = score;
          rel = i;
        }
      }
      if (rel < 0) break;
      state[rel] = 0;
    }
    for (int i = 0; i <= n; ++i) v[i] = std::clamp(v[i], eps, 1.0);
    qp_candidate = std::move(v);
  }

  // projected-gradient candidate (also the only path for general p / psi)
  v_step_projected_gradient(st, s2, (p == 2.0 && linear_psi) ? 60 : 400);
  if (!qp_candidate.empty()) {
    const std::vector<double> pg = st.v;
    st.v = qp_candidate;
    const double Eqp = eval_F_eps(st);
    st.v = pg;
    const double Epg = eval_F_eps(st);
    if (Eqp < Epg) st.v = qp_candidate;
  }
  if (eval_F_eps(st) > E_before) st.v = v_before;
}

}  // namespace detail

// Alternating minimization for the 1D bar with Dirichlet data u(0) = 0,
// u(L) = delta. v_init seeds the damage variable (defaults to 1).
inline MinimizeResult minimize_F_eps_1d(double L, double delta, double eps,
                                        const PsiFn& psi, double p, double h,
                                        const std::vector<double>& v_init = {},
                                        int max_outer = 500, double rel_tol = 1e-8) {
  if (!(h <= eps / 8.0 + 1e-15))
    throw std::invalid_argument("minimize_F_eps_1d: need h <= eps/8");
  MinimizeResult out;
  PhaseFieldState st;
  st.dim = 1;
  st.nx = std::max(2, static_cast<int>(std::llround(L / h)));
  st.hx = L / st.nx;
  st.eps = eps;
  st.p = p;
  st.psi = psi;
  st.u.assign(st.nx + 1, 0.0);
  for (int i = 0; i <= st.nx; ++i) st.u[i] = delta * i / st.nx;
  st.v.assign(st.nx + 1, 1.0);
  if (!v_init.empty()) {
    if (v_init.size() != st.v.size())
      throw std::invalid_argument("minimize_F_eps_1d: v_init size mismatch");
    for (std::size_t i = 0; i < st.v.size(); ++i)
      st.v[i] = std::clamp(v_init[i], eps, 1.0);
  }
  double prev = eval_F_eps(st);
  out.monotone = true;
  int it = 0;
  for (; it < max_outer; ++it) {
    detail::u_step_1d(st, 0.0, delta);
    detail::v_step_1d(st);
    const double E = eval_F_eps(st);
    if (E > prev + 1e-12 * (1.0 + std::abs(prev))) out.monotone = false;
    if (std::abs(prev - E) <= rel_tol * (1.0 + std::abs(E))) {
      prev = E;
      ++it;
      out.converged = true;
      break;
    }
    prev = E;
  }
  out.state = std::move(st);
  out.energy = prev;
  out.iterations = it;
  return out;
}

// ---------------------------------------------------------------------------
// Gamma-convergence check (1D benchmark)

struct GammaRow {
  double eps = 0;
  double energy = 0;
  double f_limit = 0;
  double rel_error = 0;
  int iterations = 0;
};

// For each eps: minimize F_eps with boundary data matching a single-jump
// target of amplitude delta at x0, from both the elastic start and a seeded
// damage dip at the jump location; report the lower energy.
inline std::vector<GammaRow> gamma_check_1d(double L, double delta, double x0,
                                            const PsiFn& psi, double p,
                                            const std::vector<double>& eps_list,
                                            double f_limit) {
  std::vector<GammaRow> rows;
  for (const double eps : eps_list) {
    const double h = eps / 8.0;
    MinimizeResult elastic = minimize_F_eps_1d(L, delta, eps, psi, p, h);
    // seeded dip around x0
    const int n = std::max(2, static_cast<int>(std::llround(L / h)));
    std::vector<double> seed(n + 1, 1.0);
    for (int i = 0; i <= n; ++i) {
      const double x = L * i / n;
      const double d = std::abs(x - x0);
      if (d < 2.0 * eps) seed[i] = eps;
    }
    MinimizeResult cracked = minimize_F_eps_1d(L, delta, eps, psi, p, h, seed);
    const MinimizeResult& best =
        cracked.energy < elastic.energy ? cracked : elastic;
    GammaRow row;
    row.eps = eps;
    row.energy = best.energy;
    row.f_limit = f_limit;
    row.rel_error = std::abs(best.energy - f_limit) / std::max(f_limit, 1e-300);
    row.iterations = best.iterations;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// 2D alternating minimization (smoke-test grade)

inline MinimizeResult minimize_F_eps_2d(double Lx, double Ly, double delta,
                                        double eps, const PsiFn& psi, double p,
                                        double h, int max_outer = 200,
                                        double rel_tol = 1e-7) {
  MinimizeResult out;
  PhaseFieldState st;
  st.dim = 2;
  st.nx = std::max(2, static_cast<int>(std::llround(Lx / h)));
  st.ny = std::max(2, static_cast<int>(std::llround(Ly / h)));
  st.hx = Lx / st.nx;
  st.hy = Ly / st.ny;
  st.eps = eps;
  st.p = p;
  st.psi = psi;
  st.u.assign(2 * (st.nx + 1) * (st.ny + 1), 0.0);
  st.v.assign((st.nx + 1) * (st.ny + 1), 1.0);
  auto uidx = [&](int i, int j, int c) {
    return 2 * (static_cast<std::size_t>(j) * (st.nx + 1) + i) + c;
  };
  // Dirichlet: u1 = 0 at x = 0, u1 = delta at x = Lx (u2 free there)
  for (int j = 0; j <= st.ny; ++j)
    for (int i = 0; i <= st.nx; ++i) st.u[uidx(i, j, 0)] = delta * i / st.nx;

  auto project_bc = [&](std::vector<double>& u) {
    for (int j = 0; j <= st.ny; ++j) {
      u[uidx(0, j, 0)] = 0.0;
      u[uidx(st.nx, j, 0)] = delta;
    }
  };
  const double gd = 1e-6;
  double prev = eval_F_eps(st);
  int it = 0;
  for (; it < max_outer; ++it) {
    // u-step: a few projected gradient sweeps on the quadratic energy
    for (int sweep = 0; sweep < 20; ++sweep) {
      std::vector<double> g(st.u.size(), 0.0);
      const double E0 = eval_F_eps(st);
      for (std::size_t iu = 0; iu < st.u.size(); ++iu) {
        const double save = st.u[iu];
        st.u[iu] = save + gd;
        const double Ep = eval_F_eps(st);
        st.u[iu] = save;
        g[iu] = (Ep - E0) / gd;
      }
      double step = 0.25 * st.hx * st.hx;
      std::vector<double> trial = st.u;
      for (std::size_t iu = 0; iu < st.u.size(); ++iu)
        trial[iu] = st.u[iu] - step * g[iu];
      project_bc(trial);
      PhaseFieldState t2 = st;
      t2.u = trial;
      if (eval_F_eps(t2) < E0) st.u = trial;
    }
    // v-step: projected gradient
    for (int sweep = 0; sweep < 20; ++sweep) {
      std::vector<double> g(st.v.size(), 0.0);
      const double E0 = eval_F_eps(st);
      for (std::size_t iv = 0; iv < st.v.size(); ++iv) {
        const double save = st.v[iv];
        st.v[iv] = std::clamp(save + gd, st.eps, 1.0);
        const double Ep = eval_F_eps(st);
        st.v[iv] = save;
        g[iv] = (Ep - E0) / gd;
      }
      double step = 0.25 * st.eps * st.hx;
      std::vector<double> trial = st.v;
      for (std::size_t iv = 0; iv < st.v.size(); ++iv)
        trial[iv] = std::clamp(st.v[iv] - step * g[iv], st.eps, 1.0);
      PhaseFieldState t2 = st;
      t2.v = trial;
      if (eval_F_eps(t2) < E0) st.v = trial;
    }
    const double E = eval_F_eps(st);
    if (E > prev + 1e-10 * (1 + std::abs(prev))) out.monotone = false;
    if (std::abs(prev - E) <= rel_tol * (1.0 + std::abs(E))) {
      prev = E;
      out.converged = true;
      break;
    }
    prev = E;
  }
  out.state = std::move(st);
  out.energy = prev;
  out.iterations = it;
  return out;
}

}  // namespace sbd
