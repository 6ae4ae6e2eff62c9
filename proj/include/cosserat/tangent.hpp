#pragma once

// Consistent (algorithmic) Jacobians of the stress-point update: nine
// fourth-order blocks d{sigma_sym, s_skw, mu} / d{eps, omega, chi}.

#include "cosserat/material.hpp"
#include "cosserat/return_map.hpp"
#include "cosserat/tensors.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace cosserat {

enum Block { kSym = 0, kSkw = 1, kCouple = 2 };  // rows: sigma_sym, s_skw, mu
enum Input { kEps = 0, kOmega = 1, kChi = 2 };     // columns

struct ConsistentTangent {
  std::array<std::array<Tensor4, 3>, 3> D;
  Regime regime = Regime::Elastic;

  ConsistentTangent() {
    for (auto& row : D)
      for (auto& b : row) b.setZero();
  }
  Tensor4& operator()(int a, int b) { return D[a][b]; }
  const Tensor4& operator()(int a, int b) const { return D[a][b]; }
};

inline Tensor4 couple_stiffness(const ElasticModuli& m) {
  const Tensor4 ii = Projector4::spherical();
  return m.Kc * ii + 2.0 * m.B * (Projector4::symmetrizer() - ii / 3.0) +
         2.0 * m.Bc * Projector4::skew_symmetrizer();
}

inline ConsistentTangent tangent_elastic(const MaterialModel& model) {
  const ElasticModuli& m = model.moduli;
  ConsistentTangent t;
  t(kSym, kEps) = m.K * Projector4::spherical() + 2.0 * m.G * Projector4::deviatoric_symmetric();
  t(kSkw, kOmega) = 2.0 * m.Gc * Projector4::skew_symmetrizer();
  t(kCouple, kChi) = couple_stiffness(m);
  t.regime = Regime::Elastic;
  return t;
}

namespace detail {

/// Gamma'(theta) d theta / d s, regular at theta = +-pi/6.
inline Tensor2 shape_lode_gradient(const ShapeFunction& shape, const Tensor2& s, double theta) {
  if (shape.circular()) return Tensor2::Zero();
  const LodeInvariants inv = invariants_sym(s);
  if (inv.degenerate) return Tensor2::Zero();
  const double c3 = std::cos(3.0 * theta);
  const double ratio = c3 > 1e-6 ? shape.d1(theta) / (3.0 * c3)
                                  : -shape.d2(theta) / (9.0 * std::sin(3.0 * theta));
  return ratio * lode_sin3_gradient(s);
}

/// Gradients of the predictor scalars with respect to one strain block.
struct PredictorGradients {
  Tensor2 Y = Tensor2::Zero();      ///< q*^2
  Tensor2 Z = Tensor2::Zero();      ///< q_s*^2
  Tensor2 theta = Tensor2::Zero();  ///< theta*
  Tensor2 p = Tensor2::Zero();      ///< p*
};

inline std::array<PredictorGradients, 3> predictor_gradients(const PredictorSet& pr,
                                                             const ElasticModuli& m, bool with_theta) {
  std::array<PredictorGradients, 3> g;
  g[kEps].Y = 6.0 * m.G * pr.s_sym;
  g[kEps].Z = 6.0 * m.G * pr.s_sym;
  g[kEps].p = m.K * Tensor2::Identity();
  if (with_theta) g[kEps].theta = lode_gradient(pr.s_sym, m.G);
  g[kOmega].Y = 6.0 * m.G * pr.s_skw;
  g[kChi].Y = 6.0 * m.G * pr.mu;
  return g;
}

}  // namespace detail

inline ConsistentTangent tangent_radial(const PredictorSet& pr, const StressState& st,
                                        const MaterialModel& model) {
  if (!(pr.q > 0.0)) throw NumericalError("radial tangent: vanishing trial equivalent stress");
  const ElasticModuli& m = model.moduli;
  const double th = pr.theta;
  const double gam = model.yield.shape(th), gh = model.potential.shape(th);
  const double M = model.yield.M, Mh = model.potential.M;
  const double H = 3.0 * m.G * gam * gh + m.K * M * Mh +
                   dsigma0_dlambda(model.hardening, pr.lambda_n + st.dlambda);
  const double c = st.q / pr.q;
  const double dl = st.dlambda;

  // d q* / d{eps, omega, chi}
  const std::array<Tensor2, 3> dqs{3.0 * m.G * pr.s_sym / pr.q, 3.0 * m.G * pr.s_skw / pr.q,
                                   3.0 * m.G * pr.mu / pr.q};
  // yield-shape variation with the trial Lode angle
  const Tensor2 dgam = 2.0 * m.G * detail::shape_lode_gradient(model.yield.shape, pr.s_sym, th);

  ConsistentTangent t;
  t.regime = Regime::Radial;
  const Tensor2 I = Tensor2::Identity();
  const Tensor4 e_couple = couple_stiffness(m);
  for (int b = 0; b < 3; ++b) {
    Tensor2 ddl = gam * dqs[b];
    if (b == kEps) ddl += M * m.K * I + st.q * dgam;
    ddl /= H;
    const Tensor2 dc = -3.0 * m.G * gh * ddl / pr.q + 3.0 * m.G * gh * dl * dqs[b] / (pr.q * pr.q);
    Tensor2 dp = -m.K * Mh * ddl;
    if (b == kEps) dp += m.K * I;
    t(kSym, b) = outer(I, dp) + outer(pr.s_sym, dc);
    t(kSkw, b) = outer(pr.s_skw, dc);
    t(kCouple, b) = outer(pr.mu, dc);
  }
  t(kSym, kEps) += 2.0 * m.G * c * Projector4::deviatoric_symmetric();
  t(kSkw, kOmega) += 2.0 * m.Gc * c * Projector4::skew_symmetrizer();
  t(kCouple, kChi) += c * e_couple;
  return t;
}

inline ConsistentTangent tangent_general(const PredictorSet& pr, const StressState& st,
                                         const MaterialModel& model) {
  const ElasticModuli& m = model.moduli;
  if (!pr.eigen) throw NumericalError("general tangent: missing predictor eigensystem");
  const EigenSystem& es = *pr.eigen;
  const double th = st.theta;
  const double G = m.G;
  const double Z = pr.qs * pr.qs;
  const double d = pr.theta - th;
  const double s2d = std::sin(2.0 * d), c2d = std::cos(2.0 * d);
  const GeneralScalars s = general_scalars(pr, model, th);
  const double r = s.r, dl = s.dl, q = s.q;
  const double gh = model.potential.shape(th), gh1 = model.potential.shape.d1(th);
  const double gam = model.yield.shape(th);
  const double M = model.yield.M, Mh = model.potential.M;
  const double hs = dsigma0_dlambda(model.hardening, pr.lambda_n + dl);

  // partial derivatives at fixed theta w.r.t. x = (Y, Z, theta*, p*)
  const std::array<double, 4> r_x{1.0 / (2.0 * r), -std::sin(d) * std::sin(d) / (2.0 * r), -Z * s2d / (2.0 * r), 0.0};
  std::array<double, 4> dl_x{}, q_x{}, p_x{}, f_x{};
  for (int k = 0; k < 4; ++k) dl_x[k] = -dl * r_x[k] / r;
  dl_x[1] += s2d / (6.0 * G * r * gh1);
  dl_x[2] += Z * 2.0 * c2d / (6.0 * G * r * gh1);
  for (int k = 0; k < 4; ++k) {
    q_x[k] = r_x[k] - 3.0 * G * gh * dl_x[k];
    p_x[k] = (k == 3 ? 1.0 : 0.0) - m.K * Mh * dl_x[k];
    f_x[k] = q_x[k] * gam + M * p_x[k] - hs * dl_x[k];
  }

  const auto grads = detail::predictor_gradients(pr, m, true);
  const double c = q / r;
  const double qs_star = pr.qs;
  const double cd = std::cos(d), sd = std::sin(d);
  const auto beta = std::array<double, 3>{2.0 * kPi / 3.0, 0.0, -2.0 * kPi / 3.0};

  ConsistentTangent t;
  t.regime = Regime::General;
  for (int b = 0; b < 3; ++b) {
    const auto& g = grads[b];
    const std::array<const Tensor2*, 4> gx{&g.Y, &g.Z, &g.theta, &g.p};
    Tensor2 df = Tensor2::Zero(), ddl = Tensor2::Zero(), dr = Tensor2::Zero(), dq = Tensor2::Zero(),
            dp = Tensor2::Zero();
    for (int k = 0; k < 4; ++k) {
      df += f_x[k] * *gx[k];
      ddl += dl_x[k] * *gx[k];
      dr += r_x[k] * *gx[k];
      dq += q_x[k] * *gx[k];
      dp += p_x[k] * *gx[k];
    }
    const Tensor2 dth = -df / s.df;
    ddl += s.ddl * dth;
    dr += s.dr * dth;
    dq += s.dq * dth;
    dp += s.dp * dth;
    const Tensor2 dc = dq / r - q * dr / (r * r);
    Tensor2 dqs = dc * qs_star * cd - c * qs_star * sd * (g.theta - dth);
    if (qs_star > 0.0) dqs += c * cd * g.Z / (2.0 * qs_star);

    Tensor4 dsym = Tensor4::Zero();
    for (int i = 0; i < 3; ++i) {
      const Tensor2 dsig = dp + (2.0 / 3.0) * (std::sin(th + beta[i]) * dqs + st.qs * std::cos(th + beta[i]) * dth);
      dsym += outer(es.bases[i], dsig);
    }
    t(kSym, b) = dsym;
    t(kSkw, b) = outer(pr.s_skw, dc);
    t(kCouple, b) = outer(pr.mu, dc);
  }
  const auto sig = principal_from_invariants(st.p, st.qs, th);
  for (int i = 0; i < 3; ++i) t(kSym, kEps) += sig[i] * es.spins[i];
  t(kSkw, kOmega) += 2.0 * m.Gc * c * Projector4::skew_symmetrizer();
  t(kCouple, kChi) += c * couple_stiffness(m);
  return t;
}

inline ConsistentTangent tangent_apex(const PredictorSet& pr, const StressState& st, const MaterialModel& model) {
  const double K = model.moduli.K;
  const double kmm = K * model.yield.M * model.potential.M;
  const double den = kmm + dsigma0_dlambda(model.hardening, pr.lambda_n + st.dlambda);
  if (den == 0.0) throw NumericalError("apex tangent singular");
  ConsistentTangent t;
  t.regime = Regime::Apex;
  t(kSym, kEps) = K * (1.0 - kmm / den) * Projector4::spherical();
  return t;
}

/// Tangent matching the regime of an integration result.
inline ConsistentTangent consistent_tangent(const IntegrationResult& res, const MaterialModel& model) {
  switch (res.stress.regime) {
    case Regime::Elastic: return tangent_elastic(model);
    case Regime::Radial: return tangent_radial(res.pred, res.stress, model);
    case Regime::General: return tangent_general(res.pred, res.stress, model);
    case Regime::Apex: return tangent_apex(res.pred, res.stress, model);
  }
  return tangent_elastic(model);
}

/// Central-difference tangent of integrate() with the regime held fixed.
inline ConsistentTangent fd_tangent(const GeneralizedState& n, const StrainIncrement& inc,
                                    const MaterialModel& model, double h, const SolverOptions& opt = {}) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_tangent: step must be positive");
  const Regime base = integrate(n, inc, model, opt).stress.regime;
  ConsistentTangent t;
  t.regime = base;
  for (int b = 0; b < 3; ++b) {
    for (int k = 0; k < 9; ++k) {
      const auto [i, j] = component_pair(k);
      double step = h;
      bool done = false;
      for (int shrink = 0; shrink <= 5 && !done; ++shrink, step /= 10.0) {
        StrainIncrement ip = inc, im = inc;
        Tensor2& tp = b == kEps ? ip.d_eps : b == kOmega ? ip.d_omega : ip.d_chi;
        Tensor2& tm = b == kEps ? im.d_eps : b == kOmega ? im.d_omega : im.d_chi;
        tp(i, j) += step;
        tm(i, j) -= step;
        const IntegrationResult rp = integrate(n, ip, model, opt);
        const IntegrationResult rm = integrate(n, im, model, opt);
        if (rp.stress.regime != base || rm.stress.regime != base) continue;
        t(kSym, b).col(k) = (flatten(rp.stress.sigma_sym) - flatten(rm.stress.sigma_sym)) / (2.0 * step);
        t(kSkw, b).col(k) = (flatten(rp.stress.s_skw) - flatten(rm.stress.s_skw)) / (2.0 * step);
        t(kCouple, b).col(k) = (flatten(rp.stress.mu) - flatten(rm.stress.mu)) / (2.0 * step);
        done = true;
      }
      if (!done) throw NumericalError("state too close to regime boundary");
    }
  }
  return t;
}

}  // namespace cosserat
