#include "cosserat/tensors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace cosserat;

namespace {

Tensor2 random_tensor(std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor2 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t(i, j) = u(rng);
  return t;
}

Tensor2 random_deviator(std::mt19937& rng) { return dev(sym(random_tensor(rng))); }

double rel(const Tensor2& a, const Tensor2& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST(Layout, FlattenRoundTripAndOrder) {
  Tensor2 t;
  t << 1, 4, 9, 5, 2, 6, 8, 7, 3;  // value = flattened position + 1
  const Vec9 v = flatten(t);
  for (int k = 0; k < 9; ++k) EXPECT_EQ(v(k), k + 1);
  EXPECT_EQ(unflatten(v), t);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(v(component_index(i, j)), t(i, j));
}

TEST(Layout, Projectors) {
  std::mt19937 rng(3);
  const Tensor2 x = random_tensor(rng);
  EXPECT_LT((apply(Projector4::symmetrizer(), x) - sym(x)).norm(), 1e-15);
  EXPECT_LT((apply(Projector4::skew_symmetrizer(), x) - skw(x)).norm(), 1e-15);
  EXPECT_LT((apply(Projector4::deviatoric_symmetric(), x) - dev(sym(x))).norm(), 1e-15);
  EXPECT_LT((apply(Projector4::spherical(), x) - x.trace() * Tensor2::Identity()).norm(), 1e-15);
}

TEST(InvariantsSym, TriaxialExtensionLimit) {
  const auto inv = invariants_sym(Eigen::Vector3d(2, -1, -1).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(inv.qs, 3.0, 1e-14);
  EXPECT_NEAR(inv.theta, -kPi / 6.0, 1e-12);
  EXPECT_FALSE(inv.degenerate);
}

TEST(InvariantsSym, PureShearHasZeroLode) {
  const auto inv = invariants_sym(Eigen::Vector3d(1, 0, -1).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(inv.qs, std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(inv.theta, 0.0, 1e-14);
}

TEST(InvariantsSym, ZeroTensorIsDegenerate) {
  const auto inv = invariants_sym(Tensor2::Zero());
  EXPECT_TRUE(inv.degenerate);
  EXPECT_EQ(inv.qs, 0.0);
  EXPECT_EQ(inv.theta, 0.0);
}

TEST(InvariantsSym, TinyTensorsKeepTheirAngle) {
  const Tensor2 s = Eigen::Vector3d(2, -1, -1).asDiagonal().toDenseMatrix();
  EXPECT_NEAR(invariants_sym(1e-120 * s).theta, -kPi / 6.0, 1e-12);
}

TEST(InvariantsSym, MatchesEigenvaluesByBruteForceFit) {
  std::mt19937 rng(11);
  for (int t = 0; t < 20; ++t) {
    const Tensor2 s = random_deviator(rng);
    Eigen::SelfAdjointEigenSolver<Tensor2> es(s);
    std::array<double, 3> ev{es.eigenvalues()(2), es.eigenvalues()(1), es.eigenvalues()(0)};
    // brute-force scan of (qs, theta) against the ordered eigenvalues
    double best = 1e300, qbest = 0, tbest = 0;
    const double qn = std::sqrt(1.5) * s.norm();
    for (int k = 0; k <= 20000; ++k) {
      const double th = -kPi / 6.0 + kPi / 3.0 * k / 20000.0;
      const auto p = principal_from_invariants(0.0, qn, th);
      double e = 0;
      for (int i = 0; i < 3; ++i) e += (p[i] - ev[i]) * (p[i] - ev[i]);
      if (e < best) best = e, qbest = qn, tbest = th;
    }
    const auto inv = invariants_sym(s);
    EXPECT_NEAR(inv.qs, qbest, 1e-12 * qbest);
    EXPECT_NEAR(inv.theta, tbest, 1e-4);
    const auto p = principal_from_invariants(0.0, inv.qs, inv.theta);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], ev[i], 1e-12 * inv.qs);
  }
}

TEST(CosseratQ, ReducesToSymmetricPart) {
  std::mt19937 rng(5);
  const Tensor2 s = random_deviator(rng);
  const double q = cosserat_q(s, Tensor2::Zero(), Tensor2::Zero(), Tensor2::Zero(), 0.0, 100, 10, 5, 5, 7);
  EXPECT_NEAR(q, invariants_sym(s).qs, 1e-14);
}

TEST(CosseratQ, SkewOnly) {
  const double tau = 2.5;
  Tensor2 k = Tensor2::Zero();
  k(0, 1) = tau;
  k(1, 0) = -tau;
  const double q = cosserat_q(Tensor2::Zero(), k, Tensor2::Zero(), Tensor2::Zero(), 0.0, 11.0, 1.0, 1, 1, 1);
  EXPECT_NEAR(q, std::sqrt(3.0 * 11.0) * tau, 1e-13);
}

TEST(CosseratQ, CoupledTermsIdentity) {
  std::mt19937 rng(8);
  const double G = 300, Gc = 70, B = 20, Bc = 35, Kc = 55;
  for (int t = 0; t < 10; ++t) {
    const Tensor2 s = random_deviator(rng), k = skw(random_tensor(rng)), mu = random_tensor(rng);
    const Tensor2 md = dev(mu), ms = sym(md), mk = skw(md);
    const double tr = mu.trace();
    double sum = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        sum += G / Gc * k(i, j) * k(i, j) + G / B * ms(i, j) * ms(i, j) + G / Bc * mk(i, j) * mk(i, j);
    sum += 2 * G / Kc * tr * tr / 9;
    const double q = cosserat_q(s, k, ms, mk, tr, G, Gc, B, Bc, Kc);
    const double qs = invariants_sym(s).qs;
    EXPECT_NEAR(q * q - qs * qs, 1.5 * sum, 1e-10 * q * q);
  }
}

TEST(PrincipalFromInvariants, Spherical) {
  const auto p = principal_from_invariants(-7.0, 0.0, 0.3);
  for (double v : p) EXPECT_DOUBLE_EQ(v, -7.0);
}

TEST(PrincipalFromInvariants, TriaxialLimits) {
  // consistent with invariants_sym(diag(2,-1,-1)) = (3, -pi/6)
  const auto a = principal_from_invariants(0.0, 3.0, -kPi / 6.0);
  EXPECT_NEAR(a[0], 2.0, 1e-14);
  EXPECT_NEAR(a[1], -1.0, 1e-14);
  EXPECT_NEAR(a[2], -1.0, 1e-14);
  const auto b = principal_from_invariants(0.0, 3.0, kPi / 6.0);
  EXPECT_NEAR(b[0], 1.0, 1e-14);
  EXPECT_NEAR(b[1], 1.0, 1e-14);
  EXPECT_NEAR(b[2], -2.0, 1e-14);
}

TEST(PrincipalFromInvariants, RoundTrip) {
  std::mt19937 rng(21);
  for (int t = 0; t < 50; ++t) {
    const Tensor2 sig = sym(random_tensor(rng, 100.0));
    const double p = sig.trace() / 3.0;
    const auto inv = invariants_sym(dev(sig));
    const auto pv = principal_from_invariants(p, inv.qs, inv.theta);
    Eigen::SelfAdjointEigenSolver<Tensor2> es(sig);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(pv[i], es.eigenvalues()(2 - i), 1e-12 * 100.0);
  }
}

TEST(Eigensystem, DiagonalInput) {
  const EigenSystem es = eigensystem(Eigen::Vector3d(3e-3, 2e-3, 1e-3).asDiagonal().toDenseMatrix());
  for (int i = 0; i < 3; ++i) {
    Tensor2 e = Tensor2::Zero();
    e(i, i) = 1.0;
    EXPECT_LT((es.bases[i] - e).norm(), 1e-14);
    EXPECT_NEAR(es.values[i], (3 - i) * 1e-3, 1e-17);
  }
}

TEST(Eigensystem, DegenerateSpectrumThrows) {
  EXPECT_THROW(eigensystem(Eigen::Vector3d(1, 1, 2).asDiagonal().toDenseMatrix()), NumericalError);
}

TEST(Eigensystem, BasesAreEigenvalueGradients) {
  std::mt19937 rng(13);
  const double h = 1e-7;
  for (int t = 0; t < 10; ++t) {
    const Tensor2 eps = sym(random_tensor(rng, 1e-2));
    const EigenSystem es = eigensystem(eps);
    for (int a = 0; a < 3; ++a) {
      Tensor2 fd;
      for (int k = 0; k < 9; ++k) {
        const auto [i, j] = detail::kComponents[k];
        Tensor2 E = Tensor2::Zero();
        E(i, j) = 1.0;
        const double vp = eigensystem(eps + h * sym(E)).values[a];
        const double vm = eigensystem(eps - h * sym(E)).values[a];
        fd(i, j) = (vp - vm) / (2 * h);
      }
      EXPECT_LT(rel(es.bases[a], fd), 1e-5);
    }
  }
}

TEST(Eigensystem, SpinsMatchFiniteDifferences) {
  std::mt19937 rng(17);
  const double h = 1e-7;
  for (int t = 0; t < 10; ++t) {
    const Tensor2 eps = sym(random_tensor(rng, 1e-2));
    const EigenSystem es = eigensystem(eps);
    for (int a = 0; a < 3; ++a) {
      Tensor4 fd;
      for (int k = 0; k < 9; ++k) {
        const auto [i, j] = detail::kComponents[k];
        Tensor2 E = Tensor2::Zero();
        E(i, j) = 1.0;
        // derivative along sym(E): the spins act on the symmetric part
        const Tensor2 d = (eigensystem(eps + h * sym(E)).bases[a] - eigensystem(eps - h * sym(E)).bases[a]) / (2 * h);
        fd.col(k) = flatten(d);
      }
      const Tensor4 an = es.spins[a] * Projector4::symmetrizer();
      EXPECT_LT((an - fd).norm() / an.norm(), 1e-4);
    }
  }
}

TEST(LodeGradient, FiniteDifferences) {
  std::mt19937 rng(23);
  const double h = 1e-7;
  int checked = 0;
  while (checked < 20) {
    const Tensor2 s = random_deviator(rng);
    if (std::abs(invariants_sym(s).theta) > 0.45) continue;
    const Tensor2 g = lode_gradient_stress(s);
    Tensor2 fd;
    for (int k = 0; k < 9; ++k) {
      const auto [i, j] = detail::kComponents[k];
      Tensor2 E = Tensor2::Zero();
      E(i, j) = 1.0;
      fd(i, j) = (invariants_sym(dev(s + h * sym(E))).theta - invariants_sym(dev(s - h * sym(E))).theta) / (2 * h);
    }
    EXPECT_LT(rel(g, fd), 1e-5);
    ++checked;
  }
}

TEST(LodeGradient, StrainGradientScalesWithShearModulus) {
  std::mt19937 rng(29);
  const Tensor2 s = random_deviator(rng);
  EXPECT_LT(rel(lode_gradient(s, 40.0), 80.0 * lode_gradient_stress(s)), 1e-15);
}

TEST(LodeGradient, HomogeneousOfDegreeMinusOne) {
  std::mt19937 rng(31);
  const Tensor2 s = random_deviator(rng);
  const Tensor2 g = lode_gradient_stress(s), g3 = lode_gradient_stress(3.0 * s);
  EXPECT_LT(rel(3.0 * g3, g), 1e-12);
}

TEST(LodeGradient, OrthogonalToRadialDirection) {
  Tensor2 s = Eigen::Vector3d(1.0, 0.01, -1.01).asDiagonal().toDenseMatrix();
  s(0, 1) = s(1, 0) = 0.2;
  s = dev(s);
  const Tensor2 g = lode_gradient_stress(s);
  EXPECT_LT(std::abs(contract(g, s)), 1e-12 * norm(g) * norm(s));
}

TEST(LodeGradient, StationaryAngleHandling) {
  const Tensor2 s = Eigen::Vector3d(2, -1, -1).asDiagonal().toDenseMatrix();
  EXPECT_THROW(lode_gradient_stress(s), NumericalError);
  const Tensor2 g = lode_sin3_gradient(s);
  EXPECT_TRUE(g.allFinite());
  EXPECT_THROW(lode_sin3_gradient(Tensor2::Zero()), NumericalError);
}
