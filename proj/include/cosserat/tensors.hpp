#pragma once

// Second-order tensor algebra for the micropolar kernel.
//
// Full (non-symmetric) tensors are flattened to 9-vectors in the fixed order
//   xx, yy, zz, xy, yx, yz, zy, zx, xz
// and fourth-order operators are 9x9 matrices acting on that layout, so
// that (A (x) B) : X == A * (B . X) with "." the plain dot product of the
// flattened components (which equals the double contraction A:B).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cosserat {

using Tensor2 = Eigen::Matrix3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Tensor4 = Eigen::Matrix<double, 9, 9>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kLodeLimit = kPi / 6.0;

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline constexpr std::array<std::array<int, 2>, 9> kComponents{{
    {0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 0}, {0, 2}}};
inline constexpr std::array<std::array<int, 3>, 3> kIndex{{{0, 3, 8}, {4, 1, 5}, {7, 6, 2}}};
}  // namespace detail

/// Position of component (i, j) in the flattened layout.
constexpr int component_index(int i, int j) { return detail::kIndex[i][j]; }
constexpr std::array<int, 2> component_pair(int k) { return detail::kComponents[k]; }

inline Vec9 flatten(const Tensor2& t) {
  Vec9 v;
  for (int k = 0; k < 9; ++k) v(k) = t(detail::kComponents[k][0], detail::kComponents[k][1]);
  return v;
}

inline Tensor2 unflatten(const Vec9& v) {
  Tensor2 t;
  for (int k = 0; k < 9; ++k) t(detail::kComponents[k][0], detail::kComponents[k][1]) = v(k);
  return t;
}

inline Tensor2 identity2() { return Tensor2::Identity(); }
inline Tensor2 sym(const Tensor2& t) { return 0.5 * (t + t.transpose()); }
inline Tensor2 skw(const Tensor2& t) { return 0.5 * (t - t.transpose()); }
inline Tensor2 sph(const Tensor2& t) { return (t.trace() / 3.0) * Tensor2::Identity(); }
inline Tensor2 dev(const Tensor2& t) { return t - sph(t); }

/// A : B = sum_ij A_ij B_ij
inline double contract(const Tensor2& a, const Tensor2& b) { return (a.array() * b.array()).sum(); }
inline double norm(const Tensor2& t) { return std::sqrt(contract(t, t)); }

inline Tensor4 outer(const Tensor2& a, const Tensor2& b) { return flatten(a) * flatten(b).transpose(); }

inline Tensor2 apply(const Tensor4& d, const Tensor2& x) { return unflatten(d * flatten(x)); }

// Constant fourth-order projectors.
struct Projector4 {
  static Tensor4 identity() { return Tensor4::Identity(); }

  /// X -> sym(X)
  static Tensor4 symmetrizer() {
    Tensor4 p = Tensor4::Zero();
    for (int k = 0; k < 9; ++k) {
      auto [i, j] = detail::kComponents[k];
      p(k, component_index(i, j)) += 0.5;
      p(k, component_index(j, i)) += 0.5;
    }
    return p;
  }

  /// X -> skw(X)
  static Tensor4 skew_symmetrizer() {
    Tensor4 p = Tensor4::Zero();
    for (int k = 0; k < 9; ++k) {
      auto [i, j] = detail::kComponents[k];
      p(k, component_index(i, j)) += 0.5;
      p(k, component_index(j, i)) -= 0.5;
    }
    return p;
  }

  /// I (x) I : X -> tr(X) I
  static Tensor4 spherical() { return outer(Tensor2::Identity(), Tensor2::Identity()); }

  /// X -> dev(sym(X))
  static Tensor4 deviatoric_symmetric() { return symmetrizer() - spherical() / 3.0; }
};

// ---------------------------------------------------------------------------
// Invariants

struct LodeInvariants {
  double qs = 0.0;     ///< sqrt(3/2 s:s)
  double theta = 0.0;  ///< Lode angle in [-pi/6, pi/6]
  bool degenerate = false;
};

/// Equivalent stress and Lode angle of a symmetric deviatoric tensor.
/// sin(3 theta) = -(27/2) det(s) / qs^3; theta is reported as 0 (degenerate)
/// when qs vanishes.
inline LodeInvariants invariants_sym(const Tensor2& s) {
  LodeInvariants out;
  out.qs = std::sqrt(1.5 * contract(s, s));
  if (!(out.qs > 0.0) || !std::isfinite(out.qs)) {
    out.qs = 0.0;
    out.degenerate = true;
    return out;
  }
  const Tensor2 u = s / out.qs;  // scale first: det of tiny tensors underflows
  double arg = -13.5 * u.determinant();
  arg = std::clamp(arg, -1.0, 1.0);
  out.theta = std::asin(arg) / 3.0;
  return out;
}

/// Equivalent von Mises stress of the full micropolar stress state.
inline double cosserat_q(const Tensor2& s_sym, const Tensor2& s_skw, const Tensor2& m_sym,
                         const Tensor2& m_skw, double tr_mu, double G, double Gc, double B,
                         double Bc, double Kc) {
  const double bracket = contract(s_sym, s_sym) + (G / Gc) * contract(s_skw, s_skw) +
                         (G / B) * contract(m_sym, m_sym) + (G / Bc) * contract(m_skw, m_skw) +
                         (2.0 * G / Kc) * tr_mu * tr_mu / 9.0;
  return std::sqrt(1.5 * bracket);
}

/// Ordered principal values p + 2/3 qs sin(theta + {2pi/3, 0, -2pi/3}).
inline std::array<double, 3> principal_from_invariants(double p, double qs, double theta) {
  const double a = 2.0 * qs / 3.0;
  return {p + a * std::sin(theta + 2.0 * kPi / 3.0), p + a * std::sin(theta),
          p + a * std::sin(theta - 2.0 * kPi / 3.0)};
}

/// d sin(3 theta) / d s for a symmetric deviatoric s with q_s > 0. Bounded
/// everywhere, including the triaxial states theta = +-pi/6.
inline Tensor2 lode_sin3_gradient(const Tensor2& s) {
  const double j2 = 0.5 * contract(s, s);
  if (!(j2 > 0.0)) throw NumericalError("lode gradient: vanishing deviator");
  const double j3 = s.determinant();
  const Tensor2 dj3 = s * s - (2.0 / 3.0) * j2 * Tensor2::Identity();
  return -1.5 * std::sqrt(3.0) * (dj3 / std::pow(j2, 1.5) - 1.5 * j3 * s / std::pow(j2, 2.5));
}

/// d theta / d s for a symmetric deviatoric s (q_s > 0, |theta| < pi/6).
inline Tensor2 lode_gradient_stress(const Tensor2& s) {
  const LodeInvariants inv = invariants_sym(s);
  const double cos3 = std::cos(3.0 * inv.theta);
  const Tensor2 g = lode_sin3_gradient(s);
  if (cos3 < 1e-12) throw NumericalError("lode gradient: stationary Lode angle");
  return g / (3.0 * cos3);
}

/// Gradient of the elastic-predictor Lode angle with respect to total strain,
/// where s = 2G dev(sym(eps)).
inline Tensor2 lode_gradient(const Tensor2& s_sym, double G) {
  return 2.0 * G * lode_gradient_stress(s_sym);
}

// ---------------------------------------------------------------------------
// Spectral machinery

struct EigenSystem {
  std::array<double, 3> values{};       ///< descending
  std::array<Eigen::Vector3d, 3> vectors;
  std::array<Tensor2, 3> bases;         ///< n_i (x) n_i
  std::array<Tensor4, 3> spins;         ///< d bases / d eps
};

/// Spectral decomposition of a symmetric tensor together with the
/// derivatives of its eigenbases (distinct eigenvalues required).
inline EigenSystem eigensystem(const Tensor2& eps) {
  const Tensor2 e = sym(eps);
  const double mean = e.trace() / 3.0;
  // the deviator has the same eigenvectors and better conditioning
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(dev(e));
  if (solver.info() != Eigen::Success) throw NumericalError("eigensystem: solver failed");
  EigenSystem es;
  // Eigen returns ascending order
  for (int i = 0; i < 3; ++i) {
    es.values[i] = solver.eigenvalues()(2 - i) + mean;
    es.vectors[i] = solver.eigenvectors().col(2 - i);
    es.bases[i] = es.vectors[i] * es.vectors[i].transpose();
  }
  const double scale = std::max(norm(e), std::numeric_limits<double>::min());
  for (int i = 0; i < 2; ++i)
    if (es.values[i] - es.values[i + 1] < 1e-10 * scale)
      throw NumericalError("eigensystem: degenerate spectrum");

  for (int a = 0; a < 3; ++a) {
    es.spins[a].setZero();
    for (int b = 0; b < 3; ++b) {
      if (b == a) continue;
      const Tensor2 t = es.vectors[a] * es.vectors[b].transpose();
      const Tensor2 m = t + t.transpose();
      es.spins[a] += outer(m, 0.5 * m) / (es.values[a] - es.values[b]);
    }
  }
  return es;
}

}  // namespace cosserat
