#pragma once

// Brute-force backward-Euler reference: the full stress and couple-stress
// tensors plus the plastic multiplier are the unknowns (19 in total) and the
// flow direction is the gradient of the plastic potential obtained by
// forward-mode automatic differentiation. Nothing here reuses the invariant
// reduction of the library.

#include "cosserat/material.hpp"
#include "cosserat/return_map.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace oracle {

using cosserat::Tensor2;

struct Dual {
  double v = 0.0;
  double d = 0.0;
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
inline Dual operator*(double s, Dual a) { return {s * a.v, s * a.d}; }
inline Dual sqrt(Dual a) {
  const double r = std::sqrt(a.v);
  return {r, a.d / (2.0 * r)};
}
inline Dual asin(Dual a) { return {std::asin(a.v), a.d / std::sqrt(1.0 - a.v * a.v)}; }

using DT = std::array<std::array<Dual, 3>, 3>;

inline Dual ddot(const DT& a, const DT& b) {
  Dual s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s = s + a[i][j] * b[i][j];
  return s;
}

inline Dual det(const DT& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
         a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

/// Plastic potential g(sigma, mu) with one directional derivative seeded.
/// Component layout of x: sigma(i,j) at 3i+j, mu(i,j) at 9+3i+j.
inline Dual potential(const std::array<Dual, 18>& x, const cosserat::MaterialModel& m) {
  const auto& e = m.moduli;
  DT sg{}, mu{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      sg[i][j] = x[3 * i + j];
      mu[i][j] = x[9 + 3 * i + j];
    }
  const Dual p = (1.0 / 3.0) * (sg[0][0] + sg[1][1] + sg[2][2]);
  const Dual trm = mu[0][0] + mu[1][1] + mu[2][2];
  DT s{}, a{}, ms{}, ma{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      s[i][j] = 0.5 * (sg[i][j] + sg[j][i]);
      a[i][j] = 0.5 * (sg[i][j] - sg[j][i]);
      ms[i][j] = 0.5 * (mu[i][j] + mu[j][i]);
      ma[i][j] = 0.5 * (mu[i][j] - mu[j][i]);
    }
  for (int i = 0; i < 3; ++i) {
    s[i][i] = s[i][i] - p;
    ms[i][i] = ms[i][i] - (1.0 / 3.0) * trm;
  }
  const Dual ss = ddot(s, s);
  const Dual q2 = 1.5 * (ss + (e.G / e.Gc) * ddot(a, a) + (e.G / e.B) * ddot(ms, ms) +
                         (e.G / e.Bc) * ddot(ma, ma) + (2.0 * e.G / (9.0 * e.Kc)) * (trm * trm));
  const Dual q = sqrt(q2);
  Dual gam{1.0, 0.0};
  if (!m.potential.shape.circular()) {
    const Dual qs = sqrt(1.5 * ss);
    DT u{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) u[i][j] = s[i][j] / qs;
    Dual arg = -13.5 * det(u);
    arg.v = std::clamp(arg.v, -1.0, 1.0);
    const Dual th = (1.0 / 3.0) * asin(arg);
    gam = {m.potential.shape(th.v), m.potential.shape.d1(th.v) * th.d};
  }
  return q * gam + m.potential.M * p;
}

inline Eigen::Matrix<double, 18, 1> potential_gradient(const Eigen::Matrix<double, 18, 1>& x,
                                                       const cosserat::MaterialModel& m) {
  Eigen::Matrix<double, 18, 1> g;
  std::array<Dual, 18> d;
  for (int k = 0; k < 18; ++k) {
    for (int i = 0; i < 18; ++i) d[i] = {x(i), i == k ? 1.0 : 0.0};
    g(k) = potential(d, m).d;
  }
  return g;
}

struct Invariants {
  double p, q, qs, theta;
};

inline Invariants invariants(const Eigen::Matrix<double, 18, 1>& x, const cosserat::MaterialModel& m) {
  std::array<Dual, 18> d;
  for (int i = 0; i < 18; ++i) d[i] = {x(i), 0.0};
  // q from the potential of a circular unit-shape, pressure-free model
  cosserat::MaterialModel probe = m;
  probe.potential = {cosserat::constant_shape(), 0.0};
  Invariants inv{};
  inv.q = potential(d, probe).v;
  inv.p = (x(0) + x(4) + x(8)) / 3.0;
  Eigen::Matrix3d s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s(i, j) = 0.5 * (x(3 * i + j) + x(3 * j + i));
  s -= inv.p * Eigen::Matrix3d::Identity();
  inv.qs = std::sqrt(1.5 * (s.array() * s.array()).sum());
  if (inv.qs > 0) {
    const double arg = std::clamp(-13.5 * (s / inv.qs).determinant(), -1.0, 1.0);
    inv.theta = std::asin(arg) / 3.0;
  }
  return inv;
}

/// Elastic compliance applied to a plastic strain-like rate: stress change
/// produced by plastic strains ep (3x3, index 3i+j) and curvatures kp.
inline Eigen::Matrix<double, 18, 1> elastic_map(const Eigen::Matrix<double, 18, 1>& y,
                                                const cosserat::ElasticModuli& e) {
  Eigen::Matrix<double, 18, 1> out;
  Eigen::Matrix3d a, b;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      a(i, j) = y(3 * i + j);
      b(i, j) = y(9 + 3 * i + j);
    }
  const double tra = a.trace(), trb = b.trace();
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  const Eigen::Matrix3d as = 0.5 * (a + a.transpose()), aw = 0.5 * (a - a.transpose());
  const Eigen::Matrix3d bs = 0.5 * (b + b.transpose()), bw = 0.5 * (b - b.transpose());
  const Eigen::Matrix3d sa = e.K * tra * I + 2.0 * e.G * (as - tra / 3.0 * I) + 2.0 * e.Gc * aw;
  const Eigen::Matrix3d sb = e.Kc * trb * I + 2.0 * e.B * (bs - trb / 3.0 * I) + 2.0 * e.Bc * bw;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      out(3 * i + j) = sa(i, j);
      out(9 + 3 * i + j) = sb(i, j);
    }
  return out;
}

struct Result {
  Tensor2 sigma = Tensor2::Zero();  ///< full, non-symmetric
  Tensor2 mu = Tensor2::Zero();
  double dlambda = 0.0;
  bool plastic = false;
  bool apex = false;
  bool converged = false;
  double residual = 0.0;
};

inline Eigen::Matrix<double, 18, 1> pack(const Tensor2& s, const Tensor2& mu) {
  Eigen::Matrix<double, 18, 1> x;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      x(3 * i + j) = s(i, j);
      x(9 + 3 * i + j) = mu(i, j);
    }
  return x;
}

/// Scaled residual of the closest-point equations at a candidate solution.
inline double residual(const cosserat::GeneralizedState& n, const cosserat::StrainIncrement& inc,
                       const cosserat::MaterialModel& m, const Tensor2& sigma, const Tensor2& mu, double dl) {
  using X18 = Eigen::Matrix<double, 18, 1>;
  X18 strain;
  const Tensor2 eps = n.eps_e + inc.d_eps, om = n.omega_e + inc.d_omega, chi = n.chi_e + inc.d_chi;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      strain(3 * i + j) = eps(i, j) + om(i, j);
      strain(9 + 3 * i + j) = chi(i, j);
    }
  const X18 trial = elastic_map(strain, m.moduli);
  const X18 x = pack(sigma, mu);
  const Invariants ti = invariants(trial, m), iv = invariants(x, m);
  const double sc = std::max({ti.q, std::abs(ti.p), 1.0});
  const double f = iv.q * m.yield.shape(iv.theta) + m.yield.M * iv.p - cosserat::sigma0(m.hardening, n.lambda + dl);
  const double r = (x - trial + elastic_map(dl * potential_gradient(x, m), m.moduli)).norm();
  return std::max(r, std::abs(f)) / sc;
}

inline Result solve(const cosserat::GeneralizedState& n, const cosserat::StrainIncrement& inc,
                    const cosserat::MaterialModel& m) {
  using Vec = Eigen::Matrix<double, 19, 1>;
  using X18 = Eigen::Matrix<double, 18, 1>;
  const auto& e = m.moduli;

  // trial state from the total elastic strains
  X18 strain;
  const Tensor2 eps = n.eps_e + inc.d_eps, om = n.omega_e + inc.d_omega, chi = n.chi_e + inc.d_chi;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      strain(3 * i + j) = eps(i, j) + om(i, j);
      strain(9 + 3 * i + j) = chi(i, j);
    }
  const X18 trial = elastic_map(strain, e);
  const Invariants ti = invariants(trial, m);
  const double ft = ti.q * m.yield.shape(ti.theta) + m.yield.M * ti.p - cosserat::sigma0(m.hardening, n.lambda);

  Result res;
  auto unpack = [&](const X18& x) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        res.sigma(i, j) = x(3 * i + j);
        res.mu(i, j) = x(9 + 3 * i + j);
      }
  };
  if (ft <= 0.0) {
    unpack(trial);
    res.converged = true;
    return res;
  }
  res.plastic = true;
  const double sc = std::max({ti.q, std::abs(ti.p), 1.0});

  const double dl_scale = std::max(ti.q, 1.0) / (3.0 * e.G);

  // Damped Newton with a central-difference Jacobian; the consistency
  // residual is shifted by `f_shift`.
  auto newton = [&](Vec& z, double f_shift) {
    auto res_at = [&](const Vec& w) {
      const X18 x = w.head<18>();
      const double dl = w(18);
      Vec r;
      r.head<18>() = (x - trial + elastic_map(dl * potential_gradient(x, m), e)) / sc;
      const Invariants iv = invariants(x, m);
      r(18) = (iv.q * m.yield.shape(iv.theta) + m.yield.M * iv.p - cosserat::sigma0(m.hardening, n.lambda + dl) -
               f_shift) / sc;
      return r;
    };
    Vec r = res_at(z);
    for (int it = 0; it < 60; ++it) {
      const double rn = r.norm();
      if (rn < 1e-14) return true;
      Eigen::Matrix<double, 19, 19> J;
      for (int k = 0; k < 19; ++k) {
        const double h = 1e-7 * (k < 18 ? std::max(std::abs(z(k)), 1e-3 * sc) : std::max(std::abs(z(k)), dl_scale));
        Vec zp = z, zm = z;
        zp(k) += h;
        zm(k) -= h;
        J.col(k) = (res_at(zp) - res_at(zm)) / (2.0 * h);
      }
      const Vec step = J.fullPivLu().solve(-r);
      double t = 1.0;
      Vec zn = z + step;
      Vec rnew = res_at(zn);
      while (!(rnew.norm() < rn) && t > 1e-4) {
        t *= 0.5;
        zn = z + t * step;
        rnew = res_at(zn);
      }
      if (!(rnew.norm() < rn)) return rn < 1e-12;
      z = zn;
      r = rnew;
    }
    return r.norm() < 1e-12;
  };

  // Homotopy from the trial state: the consistency condition is relaxed to
  // f = (1 - s) f_trial and the solution curve is followed from s = 0 (the
  // trial stress, vanishing multiplier) to s = 1 by pseudo-arclength
  // continuation, which passes folds of f or of the multiplier. Steps where
  // the Lode angle leaps onto a disjoint branch or crosses back are refused.
  using Y = Eigen::Matrix<double, 20, 1>;
  auto unscale = [&](const Y& y) {
    Vec z;
    z.head<18>() = sc * y.head<18>();
    z(18) = dl_scale * y(18);
    return z;
  };
  auto curve_res = [&](const Y& y) {
    const Vec z = unscale(y);
    const X18 x = z.head<18>();
    Vec r;
    r.head<18>() = (x - trial + elastic_map(z(18) * potential_gradient(x, m), e)) / sc;
    const Invariants iv = invariants(x, m);
    r(18) = (iv.q * m.yield.shape(iv.theta) + m.yield.M * iv.p - cosserat::sigma0(m.hardening, n.lambda + z(18)) -
             (1.0 - y(19)) * ft) / sc;
    return r;
  };
  auto curve_jac = [&](const Y& y) {
    Eigen::Matrix<double, 19, 20> J;
    for (int k = 0; k < 20; ++k) {
      const double h = 1e-7 * std::max(std::abs(y(k)), 1e-3);
      Y yp = y, ym = y;
      yp(k) += h;
      ym(k) -= h;
      J.col(k) = (curve_res(yp) - curve_res(ym)) / (2.0 * h);
    }
    return J;
  };
  auto tangent = [&](const Y& y, const Y& prev) {
    Eigen::Matrix<double, 20, 20> A;
    A.topRows<19>() = curve_jac(y);
    A.row(19) = prev.transpose();
    Y rhs = Y::Zero();
    rhs(19) = 1.0;
    Y t = A.fullPivLu().solve(rhs);
    return Y(t / t.norm());
  };
  auto theta_of = [&](const Y& y) { return invariants(unscale(y).head<18>(), m).theta; };

  // for small multipliers the Lode angle moves down the potential slope
  const double side = m.potential.shape.circular() ? 0.0 : (m.potential.shape.d1(ti.theta) > 0.0 ? -1.0 : 1.0);
  Y y = Y::Zero();
  y.head<18>() = trial / sc;
  Y t = Y::Zero();
  t(19) = 1.0;
  t = tangent(y, t);
  double h = 0.02;
  bool ok = false;
  for (int step = 0; step < 4000 && h > 1e-9; ++step) {
    const Y yp = y + h * t;
    Y w = yp;
    bool conv = false;
    // chord iterations with the Jacobian of the predictor
    Eigen::Matrix<double, 20, 20> A;
    A.topRows<19>() = curve_jac(w);
    A.row(19) = t.transpose();
    const Eigen::FullPivLU<Eigen::Matrix<double, 20, 20>> lu(A);
    for (int it = 0; it < 40; ++it) {
      const Vec r = curve_res(w);
      const double pr = t.dot(w - yp);
      if (std::sqrt(r.squaredNorm() + pr * pr) < 1e-13) {
        conv = true;
        break;
      }
      Y rhs;
      rhs.head<19>() = -r;
      rhs(19) = -pr;
      const Y dw = lu.solve(rhs);
      w += dw;
      if (!w.allFinite() || dw.norm() > 0.5 * h + 1e-8) break;
    }
    // the Lode angle stays on one side of its trial value
    const double tw = theta_of(w), ty = theta_of(y);
    const bool same_side = (tw - ti.theta) * side >= -1e-6 && (std::abs(ty - ti.theta) < 1e-6 || (tw - ti.theta) * (ty - ti.theta) > 0.0);
    const bool sane = conv && w(18) >= -1e-12 && invariants(unscale(w).head<18>(), m).q > 1e-6 * sc &&
                      (ti.qs == 0.0 || (std::abs(tw - ty) < 0.05 && same_side));
    if (!sane) {
      h *= 0.5;
      continue;
    }
    if (w(19) >= 1.0) {
      // land on s = 1 from the bracketing pair
      const double a = (1.0 - y(19)) / (w(19) - y(19));
      Vec z = unscale(y + a * (w - y));
      if (newton(z, 0.0) && std::abs(invariants(z.head<18>(), m).theta - theta_of(y)) < 0.05) {
        y.head<18>() = z.head<18>() / sc;
        y(18) = z(18) / dl_scale;
        y(19) = 1.0;
        ok = true;
        break;
      }
      h *= 0.5;
      continue;
    }
    const Y tn = tangent(w, t);
    y = w;
    t = tn;
    h = std::min(2.0 * h, 0.1);
  }
  const Vec zf = unscale(y);
  const Invariants fi = invariants(zf.head<18>(), m);
  if (ok && zf(18) > 0.0 && fi.q > 1e-6 * sc) {
    unpack(zf.head<18>());
    res.dlambda = zf(18);
    res.converged = true;
    res.residual = 0.0;
    return res;
  }

  // vertex: spherical stress, bisection on the volumetric multiplier
  const double M = m.yield.M, Mh = m.potential.M;
  if (M == 0.0 || Mh == 0.0) return res;
  auto fv = [&](double dl) { return M * (ti.p - e.K * Mh * dl) - cosserat::sigma0(m.hardening, n.lambda + dl); };
  double lo = 0.0, hi = dl_scale;
  while (fv(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fv(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double dl = 0.5 * (lo + hi);
  // the trial deviator must lie in the normal cone of the vertex
  const double gh = m.potential.shape(ti.theta);
  if (ti.q > 3.0 * e.G * gh * dl * (1.0 + 1e-12)) return res;
  res.apex = true;
  res.converged = true;
  res.dlambda = dl;
  res.sigma = (ti.p - e.K * Mh * dl) * Tensor2::Identity();
  res.mu.setZero();
  return res;
}

}  // namespace oracle
