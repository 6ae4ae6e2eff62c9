#pragma once

// Material description: micropolar elasticity, deviatoric shape functions,
// meridional slopes and isotropic hardening/softening laws.

#include "cosserat/tensors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace cosserat {

/// Micropolar isotropic elastic moduli. G, K, Gc in stress units; B, Bc, Kc in
/// force units (stress x length^2).
struct ElasticModuli {
  double G = 0.0;
  double K = 0.0;
  double Gc = 0.0;
  double B = 0.0;
  double Bc = 0.0;
  double Kc = 0.0;

  ElasticModuli() = default;
  ElasticModuli(double shear, double bulk, double cosserat_shear, double bending,
                double skew_bending, double curvature_bulk)
      : G(shear), K(bulk), Gc(cosserat_shear), B(bending), Bc(skew_bending), Kc(curvature_bulk) {
    if (!(G > 0 && K > 0 && Gc > 0 && B > 0 && Bc > 0 && Kc > 0))
      throw std::invalid_argument("ElasticModuli: all moduli must be strictly positive");
  }
};

struct MicropolarStress {
  Tensor2 sigma_sym = Tensor2::Zero();
  Tensor2 s_skw = Tensor2::Zero();
  Tensor2 mu = Tensor2::Zero();
};

inline MicropolarStress elastic_stress(const Tensor2& eps_e, const Tensor2& omega_e,
                                       const Tensor2& chi_e, const ElasticModuli& m) {
  MicropolarStress out;
  const Tensor2 e = sym(eps_e);
  out.sigma_sym = m.K * e.trace() * Tensor2::Identity() + 2.0 * m.G * dev(e);
  out.s_skw = 2.0 * m.Gc * skw(omega_e);
  const Tensor2 g = dev(chi_e);
  out.mu = m.Kc * chi_e.trace() * Tensor2::Identity() + 2.0 * m.B * sym(g) + 2.0 * m.Bc * skw(g);
  return out;
}

// ---------------------------------------------------------------------------
// Deviatoric shape functions Gamma(theta) on [-pi/6, pi/6]

class ShapeFunction {
 public:
  class Impl {
   public:
    virtual ~Impl() = default;
    virtual double value(double theta) const = 0;
    virtual double d1(double theta) const = 0;
    virtual double d2(double theta) const = 0;
    virtual bool circular() const { return false; }
    virtual std::string name() const = 0;
  };

  explicit ShapeFunction(std::shared_ptr<const Impl> impl);

  double operator()(double theta) const { return impl_->value(theta); }
  double d1(double theta) const { return impl_->d1(theta); }
  double d2(double theta) const { return impl_->d2(theta); }
  bool circular() const { return impl_->circular(); }
  std::string name() const { return impl_->name(); }

  /// Lode angles where d1 vanishes, ascending, always including +-pi/6.
  /// Empty for circular shapes (stationary everywhere).
  const std::vector<double>& stationary() const { return stationary_; }

  bool same_as(const ShapeFunction& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<const Impl> impl_;
  std::vector<double> stationary_;
};

struct StationaryAngles {
  bool everywhere = false;
  std::vector<double> angles;
};

namespace detail {

inline std::vector<double> find_stationary_angles(const ShapeFunction::Impl& shape) {
  constexpr int kScan = 4000;
  const double a = -kLodeLimit;
  const double h = 2.0 * kLodeLimit / kScan;
  std::vector<double> roots{-kLodeLimit};
  // interior points only: d1 vanishes at the ends by symmetry
  double x0 = a + h;
  double f0 = shape.d1(x0);
  for (int i = 2; i < kScan; ++i) {
    const double x1 = a + i * h;
    const double f1 = shape.d1(x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if (f0 * f1 < 0.0) {
      double lo = x0, hi = x1, flo = f0;
      while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        const double fm = shape.d1(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  roots.push_back(kLodeLimit);
  return roots;
}

}  // namespace detail

inline ShapeFunction::ShapeFunction(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {
  if (!impl_) throw std::invalid_argument("ShapeFunction: null implementation");
  if (!impl_->circular()) stationary_ = detail::find_stationary_angles(*impl_);
}

inline StationaryAngles stationary_angles(const ShapeFunction& shape) {
  if (shape.circular()) return {true, {}};
  return {false, shape.stationary()};
}

/// Distance-based lookup used by the regime dispatch.
inline bool is_stationary(const ShapeFunction& shape, double theta, double tol) {
  if (shape.circular()) return true;
  for (double t : shape.stationary())
    if (std::abs(t - theta) <= tol) return true;
  return false;
}

namespace shapes {

/// Gamma == 1: von Mises / Drucker-Prager family.
class Constant final : public ShapeFunction::Impl {
 public:
  double value(double) const override { return 1.0; }
  double d1(double) const override { return 0.0; }
  double d2(double) const override { return 0.0; }
  bool circular() const override { return true; }
  std::string name() const override { return "constant"; }
};

/// Clamped cubic spline with zero end slopes through tabulated values.
class Spline final : public ShapeFunction::Impl {
 public:
  Spline(std::vector<double> angles, std::vector<double> values)
      : x_(std::move(angles)), y_(std::move(values)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw std::invalid_argument("Spline: need >= 2 matching nodes");
    if (std::abs(x_.front() + kLodeLimit) > 1e-12 || std::abs(x_.back() - kLodeLimit) > 1e-12)
      throw std::invalid_argument("Spline: nodes must span [-pi/6, pi/6]");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(y_[i] > 0.0)) throw std::invalid_argument("Spline: values must be positive");
      if (i > 0 && !(x_[i] > x_[i - 1])) throw std::invalid_argument("Spline: nodes not increasing");
    }
    // second derivatives from the clamped tridiagonal system
    std::vector<double> a(n), b(n), c(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == 0) {
        const double h = x_[1] - x_[0];
        a[i] = 0.0, b[i] = h / 3.0, c[i] = h / 6.0, r[i] = (y_[1] - y_[0]) / h;
      } else if (i == n - 1) {
        const double h = x_[i] - x_[i - 1];
        a[i] = h / 6.0, b[i] = h / 3.0, c[i] = 0.0, r[i] = -(y_[i] - y_[i - 1]) / h;
      } else {
        const double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
        a[i] = hl / 6.0, b[i] = (hl + hr) / 3.0, c[i] = hr / 6.0;
        r[i] = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
      }
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      r[i] -= w * r[i - 1];
    }
    m_.assign(n, 0.0);
    m_[n - 1] = r[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (r[i] - c[i] * m_[i + 1]) / b[i];
  }

  double value(double t) const override {
    auto [i, h, u, v] = locate(t);
    return u * y_[i] + v * y_[i + 1] +
           ((u * u * u - u) * m_[i] + (v * v * v - v) * m_[i + 1]) * h * h / 6.0;
  }
  double d1(double t) const override {
    auto [i, h, u, v] = locate(t);
    return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * u * u) * m_[i] + (3.0 * v * v - 1.0) * m_[i + 1]) * h / 6.0;
  }
  double d2(double t) const override {
    auto [i, h, u, v] = locate(t);
    return u * m_[i] + v * m_[i + 1];
  }
  std::string name() const override { return "spline"; }

 private:
  struct Cell {
    std::size_t i;
    double h, u, v;
  };
  Cell locate(double t) const {
    t = std::clamp(t, x_.front(), x_.back());
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    if (i >= x_.size() - 1) i = x_.size() - 2;
    const double h = x_[i + 1] - x_[i];
    const double v = (t - x_[i]) / h;
    return {i, h, 1.0 - v, v};
  }

  std::vector<double> x_, y_, m_;
};

/// Rounded classical shape
///   Gamma(theta) = cos[ acos(beta sin 3theta)/3 - gamma pi/6 ] / N,
/// normalised so that Gamma(pi/6) = 1. beta -> 1 recovers the sharp
/// polygonal criteria; gamma = 1 is Tresca, gamma = 0 gives the smooth
/// Matsuoka-Nakai-like family, intermediate/other gamma values reproduce
/// Mohr-Coulomb for a given friction angle.
class LodeCosine final : public ShapeFunction::Impl {
 public:
  LodeCosine(double beta, double gamma, std::string label)
      : beta_(beta), gamma_(gamma), label_(std::move(label)) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("LodeCosine: beta must lie in (0, 1)");
    norm_ = std::cos(std::acos(beta_) / 3.0 - gamma_ * kPi / 6.0);
    if (!(norm_ > 0.0)) throw std::invalid_argument("LodeCosine: non-positive normalisation");
  }

  double value(double t) const override { return std::cos(arg(t)) / norm_; }
  double d1(double t) const override { return -std::sin(arg(t)) * darg(t) / norm_; }
  double d2(double t) const override {
    const double x = arg(t), dx = darg(t);
    const double s3 = std::sin(3.0 * t), c3 = std::cos(3.0 * t);
    const double w = 1.0 - beta_ * beta_ * s3 * s3;
    const double ddx = 3.0 * beta_ * s3 / std::sqrt(w) - 3.0 * beta_ * beta_ * beta_ * c3 * c3 * s3 / (w * std::sqrt(w));
    return (-std::cos(x) * dx * dx - std::sin(x) * ddx) / norm_;
  }
  std::string name() const override { return label_; }

 private:
  double arg(double t) const { return std::acos(beta_ * std::sin(3.0 * t)) / 3.0 - gamma_ * kPi / 6.0; }
  double darg(double t) const {
    const double s3 = std::sin(3.0 * t);
    return -beta_ * std::cos(3.0 * t) / std::sqrt(1.0 - beta_ * beta_ * s3 * s3);
  }

  double beta_, gamma_, norm_;
  std::string label_;
};

}  // namespace shapes

inline ShapeFunction constant_shape() { return ShapeFunction(std::make_shared<shapes::Constant>()); }

inline ShapeFunction spline_shape(std::vector<double> angles, std::vector<double> values) {
  return ShapeFunction(std::make_shared<shapes::Spline>(std::move(angles), std::move(values)));
}

/// Spline through values sampled from any callable on n uniform nodes.
template <typename F>
ShapeFunction spline_shape_from(F&& gamma, int nodes) {
  std::vector<double> x(nodes), y(nodes);
  for (int i = 0; i < nodes; ++i) {
    x[i] = -kLodeLimit + 2.0 * kLodeLimit * i / (nodes - 1);
    y[i] = gamma(x[i]);
  }
  x.back() = kLodeLimit;
  return spline_shape(std::move(x), std::move(y));
}

/// Rounded Mohr-Coulomb deviatoric section for friction angle phi (rad).
inline ShapeFunction rounded_mohr_coulomb_shape(double phi, double beta) {
  const double gamma = 1.0 + 6.0 / kPi * std::atan(std::sin(phi) / std::sqrt(3.0));
  return ShapeFunction(std::make_shared<shapes::LodeCosine>(beta, gamma, "mohr-coulomb"));
}

inline ShapeFunction rounded_tresca_shape(double beta) {
  return ShapeFunction(std::make_shared<shapes::LodeCosine>(beta, 1.0, "tresca"));
}

inline ShapeFunction matsuoka_nakai_like_shape(double beta) {
  return ShapeFunction(std::make_shared<shapes::LodeCosine>(beta, 0.0, "matsuoka-nakai"));
}

/// Compression-meridian slope of Mohr-Coulomb in f = q Gamma + M p - sigma0
/// (tension positive).
inline double mohr_coulomb_slope(double phi) { return 6.0 * std::sin(phi) / (3.0 - std::sin(phi)); }
inline double mohr_coulomb_sigma0(double cohesion, double phi) {
  return 6.0 * cohesion * std::cos(phi) / (3.0 - std::sin(phi));
}

// ---------------------------------------------------------------------------
// Hardening

struct LinearHardening {
  double sigma0 = 0.0;  ///< initial strength
  double h = 0.0;       ///< d sigma0 / d lambda
};

struct ExponentialHardening {
  double initial = 0.0;
  double final = 0.0;
  double rate = 0.0;  ///< a_lambda
};

using HardeningLaw = std::variant<LinearHardening, ExponentialHardening>;

inline double sigma0(const HardeningLaw& law, double lambda) {
  return std::visit(
      [lambda](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, LinearHardening>)
          return l.sigma0 + l.h * lambda;
        else
          return l.final + (l.initial - l.final) * std::exp(-l.rate * lambda);
      },
      law);
}

inline double dsigma0_dlambda(const HardeningLaw& law, double lambda) {
  return std::visit(
      [lambda](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, LinearHardening>)
          return l.h;
        else
          return -l.rate * (l.initial - l.final) * std::exp(-l.rate * lambda);
      },
      law);
}

// ---------------------------------------------------------------------------

struct Surface {
  ShapeFunction shape = constant_shape();
  double M = 0.0;  ///< meridional slope
};

/// f = q Gamma(theta) + M p - sigma0(lambda),  g = q Gamma_hat(theta) + M_hat p
struct MaterialModel {
  ElasticModuli moduli;
  Surface yield;
  Surface potential;
  HardeningLaw hardening = LinearHardening{};

  bool associated() const {
    return yield.M == potential.M &&
           (yield.shape.same_as(potential.shape) ||
            (yield.shape.circular() && potential.shape.circular()));
  }
};

inline double yield_function(const MaterialModel& m, double p, double q, double theta, double lambda) {
  return q * m.yield.shape(theta) + m.yield.M * p - sigma0(m.hardening, lambda);
}

}  // namespace cosserat
