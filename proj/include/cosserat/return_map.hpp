#pragma once

// Backward-Euler stress-point integrator for the micropolar model.
// Every plastic correction reduces to one scalar equation: in the plastic
// multiplier for the radial and apex returns, in the Lode angle for the
// general return.

#include "cosserat/material.hpp"
#include "cosserat/tensors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace cosserat {

/// Converged elastic strains and accumulated plastic multiplier.
struct GeneralizedState {
  Tensor2 eps_e = Tensor2::Zero();    ///< symmetric
  Tensor2 omega_e = Tensor2::Zero();  ///< skew
  Tensor2 chi_e = Tensor2::Zero();
  double lambda = 0.0;
};

struct StrainIncrement {
  Tensor2 d_eps = Tensor2::Zero();
  Tensor2 d_omega = Tensor2::Zero();
  Tensor2 d_chi = Tensor2::Zero();
};

enum class Regime { Elastic = 0, Radial = 1, General = 2, Apex = 3 };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Elastic: return "elastic";
    case Regime::Radial: return "radial";
    case Regime::General: return "general";
    case Regime::Apex: return "apex";
  }
  return "unknown";
}

struct PredictorSet {
  Tensor2 eps = Tensor2::Zero();  ///< trial elastic strain (symmetric)
  Tensor2 omega = Tensor2::Zero();
  Tensor2 chi = Tensor2::Zero();
  Tensor2 s_sym = Tensor2::Zero();
  Tensor2 s_skw = Tensor2::Zero();
  Tensor2 mu = Tensor2::Zero();
  double tr_mu = 0.0;
  double p = 0.0;
  double q = 0.0;
  double qs = 0.0;
  double theta = 0.0;
  bool degenerate = true;  ///< q_s* == 0, Lode angle undefined
  double lambda_n = 0.0;
  double f = 0.0;  ///< trial yield function
  std::optional<EigenSystem> eigen;
};

struct StressState {
  Tensor2 sigma_sym = Tensor2::Zero();
  Tensor2 s_skw = Tensor2::Zero();
  Tensor2 mu = Tensor2::Zero();
  double p = 0.0;
  double q = 0.0;
  double qs = 0.0;
  double theta = 0.0;
  double r = 0.0;        ///< q + 3 G Gamma_hat dlambda
  double dlambda = 0.0;
  Regime regime = Regime::Elastic;

  Tensor2 sigma() const { return sigma_sym + s_skw; }
};

struct ScalarSolveReport {
  int iterations = 0;
  double residual = 0.0;
  int damping_events = 0;
};

class ReturnMapError : public std::runtime_error {
 public:
  ReturnMapError(const std::string& what, ScalarSolveReport r)
      : std::runtime_error(what), report(r) {}
  ScalarSolveReport report;
};

struct SolverOptions {
  double tol = 0.0;  ///< absolute yield tolerance; <= 0 selects the default
  int max_iterations = 50;
  double stationary_tol = 1e-10;
};

struct IntegrationResult {
  StressState stress;
  GeneralizedState state;
  ScalarSolveReport report;
  PredictorSet pred;
};

/// Outcome of a single return algorithm. q may be negative, in which case
/// the caller must hand over to the apex return.
struct ReturnResult {
  StressState stress;
  ScalarSolveReport report;
};

// ---------------------------------------------------------------------------

inline PredictorSet compute_predictors(const GeneralizedState& n, const StrainIncrement& inc,
                                       const MaterialModel& model) {
  const ElasticModuli& m = model.moduli;
  PredictorSet pr;
  pr.eps = sym(n.eps_e + inc.d_eps);
  pr.omega = skw(n.omega_e + inc.d_omega);
  pr.chi = n.chi_e + inc.d_chi;
  pr.lambda_n = n.lambda;

  const MicropolarStress t = elastic_stress(pr.eps, pr.omega, pr.chi, m);
  pr.p = t.sigma_sym.trace() / 3.0;
  pr.s_sym = dev(t.sigma_sym);
  pr.s_skw = t.s_skw;
  pr.mu = t.mu;
  pr.tr_mu = t.mu.trace();

  const Tensor2 dm = dev(pr.mu);
  pr.q = cosserat_q(pr.s_sym, pr.s_skw, sym(dm), skw(dm), pr.tr_mu, m.G, m.Gc, m.B, m.Bc, m.Kc);
  const LodeInvariants inv = invariants_sym(pr.s_sym);
  pr.qs = std::min(inv.qs, pr.q);
  pr.theta = inv.theta;
  pr.degenerate = inv.degenerate;
  // a symmetric deviator at roundoff level carries no Lode information
  if (pr.qs <= 1e-12 * std::max(pr.q, std::abs(pr.p))) {
    pr.qs = 0.0;
    pr.theta = 0.0;
    pr.degenerate = true;
  }
  pr.f = yield_function(model, pr.p, pr.q, pr.theta, pr.lambda_n);
  return pr;
}

inline double default_tolerance(const PredictorSet& pr, const MaterialModel& model) {
  return 1e-10 * std::max({sigma0(model.hardening, pr.lambda_n), pr.q, 1.0});
}

namespace detail {

inline double resolve_tol(const SolverOptions& opt, const PredictorSet& pr, const MaterialModel& model) {
  return opt.tol > 0.0 ? opt.tol : default_tolerance(pr, model);
}

/// Safeguarded Newton for a scalar root bracketed by [lo, hi] with f(lo) > 0
/// and f(hi) < 0 (either ordering of lo and hi on the real line).
template <typename Fn>
double bracketed_newton(Fn&& fn, double lo, double hi, double x, double tol, int cap,
                        ScalarSolveReport& rep, const char* what) {
  for (int it = 1; it <= cap; ++it) {
    auto [f, df] = fn(x);
    rep.iterations = it;
    rep.residual = std::abs(f);
    if (!std::isfinite(f)) throw ReturnMapError(std::string(what) + ": non-finite residual", rep);
    if (std::abs(f) <= tol) return x;
    if (f > 0.0)
      lo = x;
    else
      hi = x;
    double next = x - f / df;
    const bool inside = std::isfinite(next) && (next - lo) * (next - hi) < 0.0;
    if (!inside) {
      next = 0.5 * (lo + hi);
      ++rep.damping_events;
    }
    if (next == x || std::abs(hi - lo) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x)) {
      auto [fn2, dfn2] = fn(next);
      (void)dfn2;
      rep.residual = std::abs(fn2);
      if (std::abs(fn2) <= 1e3 * tol) return next;
      throw ReturnMapError(std::string(what) + ": bracket collapsed above tolerance", rep);
    }
    x = next;
  }
  throw ReturnMapError(std::string(what) + ": iteration cap reached", rep);
}

inline StressState scaled_state(const PredictorSet& pr, double factor) {
  StressState st;
  st.sigma_sym = pr.p * Tensor2::Identity() + factor * pr.s_sym;
  st.s_skw = factor * pr.s_skw;
  st.mu = factor * pr.mu;
  return st;
}

}  // namespace detail

/// Return for Gamma_hat'(theta*) = 0: the Lode angle is preserved and every
/// deviatoric quantity scales by q/q*.
inline ReturnResult return_radial(const PredictorSet& pr, const MaterialModel& model,
                                  const SolverOptions& opt = {}) {
  if (!(pr.q > 0.0)) throw ReturnMapError("radial return: vanishing equivalent stress", {});
  const ElasticModuli& m = model.moduli;
  const double th = pr.theta;
  const double gam = model.yield.shape(th), gh = model.potential.shape(th);
  const double M = model.yield.M, Mh = model.potential.M;
  const double a = 3.0 * m.G * gam * gh + m.K * M * Mh;
  const double tol = detail::resolve_tol(opt, pr, model);

  auto fn = [&](double dl) {
    const double q = pr.q - 3.0 * m.G * gh * dl;
    const double p = pr.p - m.K * Mh * dl;
    const double f = q * gam + M * p - sigma0(model.hardening, pr.lambda_n + dl);
    const double df = -a - dsigma0_dlambda(model.hardening, pr.lambda_n + dl);
    return std::pair{f, df};
  };

  ScalarSolveReport rep;
  const double f0 = pr.f;
  double x = f0 / (a + dsigma0_dlambda(model.hardening, pr.lambda_n));
  if (!(x > 0.0) || !std::isfinite(x)) x = f0 / a;
  // upper bracket: grow until the residual changes sign
  double hi = std::max(x, pr.q / (3.0 * m.G * gh));
  for (int k = 0; fn(hi).first > 0.0; ++k) {
    if (k > 60) throw ReturnMapError("radial return: no sign change", rep);
    hi *= 2.0;
  }
  const double dl = detail::bracketed_newton(fn, 0.0, hi, x, tol, opt.max_iterations, rep, "radial return");

  ReturnResult out;
  out.report = rep;
  StressState& st = out.stress;
  st.dlambda = dl;
  st.q = pr.q - 3.0 * m.G * gh * dl;
  st.r = pr.q;
  const double factor = st.q / pr.q;
  st.p = pr.p - m.K * Mh * dl;
  const StressState sc = detail::scaled_state(pr, factor);
  st.sigma_sym = st.p * Tensor2::Identity() + factor * pr.s_sym;
  st.s_skw = sc.s_skw;
  st.mu = sc.mu;
  st.qs = factor * pr.qs;
  st.theta = pr.theta;
  st.regime = Regime::Radial;
  return out;
}

/// Quantities of the general return as functions of the trial Lode angle
/// theta (Appendix-style scalar chain), with first derivatives.
struct GeneralScalars {
  double r, dr, dl, ddl, q, dq, p, dp, f, df;
};

inline GeneralScalars general_scalars(const PredictorSet& pr, const MaterialModel& model, double th) {
  const ElasticModuli& m = model.moduli;
  const double d = pr.theta - th;
  const double z = pr.qs * pr.qs;
  const double A = z / (6.0 * m.G);
  const double sd = std::sin(d);
  GeneralScalars s{};
  s.r = std::sqrt(std::max(0.0, pr.q * pr.q - z * sd * sd));
  s.dr = z * std::sin(2.0 * d) / (2.0 * s.r);
  const double gh = model.potential.shape(th), gh1 = model.potential.shape.d1(th),
               gh2 = model.potential.shape.d2(th);
  s.dl = A * std::sin(2.0 * d) / (s.r * gh1);
  s.ddl = -2.0 * A * std::cos(2.0 * d) / (s.r * gh1) - s.dl * (s.dr / s.r + gh2 / gh1);
  s.q = s.r - 3.0 * m.G * gh * s.dl;
  s.dq = s.dr - 3.0 * m.G * (gh1 * s.dl + gh * s.ddl);
  const double Mh = model.potential.M;
  s.p = pr.p - m.K * Mh * s.dl;
  s.dp = -m.K * Mh * s.ddl;
  const double lam = pr.lambda_n + s.dl;
  const double g = model.yield.shape(th), g1 = model.yield.shape.d1(th);
  s.f = s.q * g + model.yield.M * s.p - sigma0(model.hardening, lam);
  s.df = s.dq * g + s.q * g1 + model.yield.M * s.dp - dsigma0_dlambda(model.hardening, lam) * s.ddl;
  return s;
}

/// Nearest stationary angle of the potential strictly on the descent side
/// of theta*.
inline double bracket_end(const PredictorSet& pr, const MaterialModel& model) {
  const double dir = model.potential.shape.d1(pr.theta) > 0.0 ? -1.0 : 1.0;
  const auto& st = model.potential.shape.stationary();
  double best = dir > 0 ? kLodeLimit : -kLodeLimit;
  for (double t : st) {
    if (dir > 0 && t > pr.theta && t < best) best = t;
    if (dir < 0 && t < pr.theta && t > best) best = t;
  }
  return best;
}

/// Return for Gamma_hat'(theta*) != 0: scalar equation in the updated Lode
/// angle, symmetric stress rebuilt on the predictor eigenbasis.
inline ReturnResult return_general(PredictorSet& pr, const MaterialModel& model,
                                   const SolverOptions& opt = {}) {
  if (pr.degenerate || !(pr.qs > 0.0))
    throw ReturnMapError("general return: undefined predictor Lode angle", {});
  const double tol = detail::resolve_tol(opt, pr, model);
  const double end = bracket_end(pr, model);
  const double dir = end > pr.theta ? 1.0 : -1.0;
  const double span = std::abs(end - pr.theta);

  auto fn = [&](double th) {
    const GeneralScalars s = general_scalars(pr, model, th);
    return std::pair{s.f, s.df};
  };

  ScalarSolveReport rep;
  // hi end: approach the stationary angle until f is negative
  double gap = 0.5 * span;
  double hi = end - dir * gap;
  for (int k = 0; !(fn(hi).first < 0.0); ++k) {
    if (k > 200 || gap < 1e-300) throw ReturnMapError("general return: no sign change toward stationary angle", rep);
    gap *= 0.25;
    hi = end - dir * gap;
  }
  const double x0 = pr.theta + dir * std::min(1e-3, 0.5 * std::abs(hi - pr.theta));
  const double th = detail::bracketed_newton(fn, pr.theta, hi, x0, tol, opt.max_iterations, rep,
                                             "general return");

  const GeneralScalars s = general_scalars(pr, model, th);
  if (!pr.eigen) pr.eigen = eigensystem(pr.eps);

  ReturnResult out;
  out.report = rep;
  StressState& st = out.stress;
  st.theta = th;
  st.dlambda = s.dl;
  st.r = s.r;
  st.q = s.q;
  st.p = s.p;
  const double factor = s.q / s.r;
  st.qs = factor * pr.qs * std::cos(pr.theta - th);
  const auto sig = principal_from_invariants(st.p, st.qs, th);
  st.sigma_sym.setZero();
  for (int i = 0; i < 3; ++i) st.sigma_sym += sig[i] * pr.eigen->bases[i];
  st.s_skw = factor * pr.s_skw;
  st.mu = factor * pr.mu;
  st.regime = Regime::General;
  return out;
}

/// Return to the vertex of a pressure-sensitive cone.
inline ReturnResult return_apex(const PredictorSet& pr, const MaterialModel& model,
                                const SolverOptions& opt = {}) {
  const double M = model.yield.M, Mh = model.potential.M;
  if (M == 0.0 || Mh == 0.0)
    throw ReturnMapError("apex undefined for pressure-insensitive model", {});
  const double K = model.moduli.K;
  const double tol = detail::resolve_tol(opt, pr, model);
  auto fn = [&](double dl) {
    const double f = M * pr.p - K * M * Mh * dl - sigma0(model.hardening, pr.lambda_n + dl);
    const double df = -K * M * Mh - dsigma0_dlambda(model.hardening, pr.lambda_n + dl);
    return std::pair{f, df};
  };
  ScalarSolveReport rep;
  const double f0 = fn(0.0).first;
  if (!(f0 > 0.0)) throw ReturnMapError("apex return: trial pressure inside the vertex", rep);
  const double denom = K * M * Mh + dsigma0_dlambda(model.hardening, pr.lambda_n);
  double x = f0 / denom;
  if (!(x > 0.0) || !std::isfinite(x)) x = f0 / (K * M * Mh);
  double hi = std::max(x, f0 / (K * M * Mh));
  for (int k = 0; fn(hi).first > 0.0; ++k) {
    if (k > 60) throw ReturnMapError("apex return: no sign change", rep);
    hi *= 2.0;
  }
  const double dl = detail::bracketed_newton(fn, 0.0, hi, x, tol, opt.max_iterations, rep, "apex return");

  ReturnResult out;
  out.report = rep;
  StressState& st = out.stress;
  st.dlambda = dl;
  st.p = pr.p - K * Mh * dl;
  st.sigma_sym = st.p * Tensor2::Identity();
  st.q = st.qs = st.r = 0.0;
  st.theta = pr.theta;
  st.regime = Regime::Apex;
  return out;
}

/// Elastic strains that produce the given stresses.
inline GeneralizedState recover_elastic_state(const StressState& st, const ElasticModuli& m, double lambda) {
  GeneralizedState g;
  const double p = st.sigma_sym.trace() / 3.0;
  g.eps_e = p / (3.0 * m.K) * Tensor2::Identity() + dev(st.sigma_sym) / (2.0 * m.G);
  g.omega_e = st.s_skw / (2.0 * m.Gc);
  const Tensor2 d = dev(st.mu);
  g.chi_e = st.mu.trace() / (9.0 * m.Kc) * Tensor2::Identity() + sym(d) / (2.0 * m.B) + skw(d) / (2.0 * m.Bc);
  g.lambda = lambda;
  return g;
}

inline bool radial_regime(const PredictorSet& pr, const MaterialModel& model, double stationary_tol) {
  return pr.degenerate || is_stationary(model.potential.shape, pr.theta, stationary_tol);
}

/// Predictor/corrector update of one stress point.
inline IntegrationResult integrate(const GeneralizedState& n, const StrainIncrement& inc,
                                   const MaterialModel& model, const SolverOptions& opt = {}) {
  IntegrationResult res;
  res.pred = compute_predictors(n, inc, model);
  PredictorSet& pr = res.pred;

  if (pr.f <= 0.0) {
    StressState& st = res.stress;
    st.sigma_sym = pr.p * Tensor2::Identity() + pr.s_sym;
    st.s_skw = pr.s_skw;
    st.mu = pr.mu;
    st.p = pr.p;
    st.q = st.r = pr.q;
    st.qs = pr.qs;
    st.theta = pr.theta;
    st.regime = Regime::Elastic;
    res.state.eps_e = pr.eps;
    res.state.omega_e = pr.omega;
    res.state.chi_e = pr.chi;
    res.state.lambda = n.lambda;
    return res;
  }

  ReturnResult rr;
  bool apex = !(pr.q > 0.0);
  if (!apex) {
    rr = radial_regime(pr, model, opt.stationary_tol) ? return_radial(pr, model, opt)
                                                       : return_general(pr, model, opt);
    apex = rr.stress.q < 0.0;
    // fully softened pressure-insensitive point: q sits at zero within the
    // scalar tolerance, collapse the deviatoric part instead of the vertex
    if (apex && (model.yield.M == 0.0 || model.potential.M == 0.0) &&
        rr.stress.q >= -detail::resolve_tol(opt, pr, model)) {
      StressState& st = rr.stress;
      st.q = st.qs = 0.0;
      st.sigma_sym = st.p * Tensor2::Identity();
      st.s_skw.setZero();
      st.mu.setZero();
      apex = false;
    }
  }
  if (apex) {
    const ScalarSolveReport first = rr.report;
    rr = return_apex(pr, model, opt);
    rr.report.iterations += first.iterations;
    rr.report.damping_events += first.damping_events;
  }
  res.stress = rr.stress;
  res.report = rr.report;
  res.state = recover_elastic_state(rr.stress, model.moduli, n.lambda + rr.stress.dlambda);
  return res;
}

}  // namespace cosserat
