#pragma once

// Plane-strain eight-node serendipity element: shape functions, quadrature
// and the generalized strain operators B (strain), W (relative rotation)
// and M (curvature).

#include "cosserat/tensors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosserat::fem {

enum class Continuum { Cauchy, Cosserat };

inline int dofs_per_node(Continuum c) { return c == Continuum::Cosserat ? 3 : 2; }

struct QuadratureRule {
  std::vector<Eigen::Vector2d> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

inline QuadratureRule gauss_rule(int n) {
  std::vector<double> x, w;
  if (n == 1) {
    x = {0.0};
    w = {2.0};
  } else if (n == 2) {
    const double a = 1.0 / std::sqrt(3.0);
    x = {-a, a};
    w = {1.0, 1.0};
  } else if (n == 3) {
    const double a = std::sqrt(0.6);
    x = {-a, 0.0, a};
    w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  } else {
    throw std::invalid_argument("gauss_rule: supported orders are 1, 2, 3");
  }
  QuadratureRule q;
  for (std::size_t j = 0; j < x.size(); ++j)
    for (std::size_t i = 0; i < x.size(); ++i) {
      q.points.emplace_back(x[i], x[j]);
      q.weights.push_back(w[i] * w[j]);
    }
  return q;
}

/// 3x3 for Cosserat elements, 2x2 reduced for Cauchy, unless overridden.
inline QuadratureRule quadrature_rule(Continuum c, int order = 0) {
  if (order > 0) return gauss_rule(order);
  return gauss_rule(c == Continuum::Cosserat ? 3 : 2);
}

using ShapeValues = Eigen::Matrix<double, 8, 1>;
using ShapeGradients = Eigen::Matrix<double, 8, 2>;

inline constexpr std::array<std::array<double, 2>, 8> kNodeXi{
    {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}, {0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

inline ShapeValues shape_functions(double xi, double eta) {
  ShapeValues n;
  for (int a = 0; a < 4; ++a) {
    const double xa = kNodeXi[a][0], ya = kNodeXi[a][1];
    n(a) = 0.25 * (1 + xi * xa) * (1 + eta * ya) * (xi * xa + eta * ya - 1);
  }
  n(4) = 0.5 * (1 - xi * xi) * (1 - eta);
  n(5) = 0.5 * (1 + xi) * (1 - eta * eta);
  n(6) = 0.5 * (1 - xi * xi) * (1 + eta);
  n(7) = 0.5 * (1 - xi) * (1 - eta * eta);
  return n;
}

/// Derivatives with respect to (xi, eta).
inline ShapeGradients shape_derivatives(double xi, double eta) {
  ShapeGradients d;
  for (int a = 0; a < 4; ++a) {
    const double xa = kNodeXi[a][0], ya = kNodeXi[a][1];
    d(a, 0) = 0.25 * xa * (1 + eta * ya) * (2 * xi * xa + eta * ya);
    d(a, 1) = 0.25 * ya * (1 + xi * xa) * (xi * xa + 2 * eta * ya);
  }
  d(4, 0) = -xi * (1 - eta);
  d(4, 1) = -0.5 * (1 - xi * xi);
  d(5, 0) = 0.5 * (1 - eta * eta);
  d(5, 1) = -(1 + xi) * eta;
  d(6, 0) = -xi * (1 + eta);
  d(6, 1) = 0.5 * (1 - xi * xi);
  d(7, 0) = -0.5 * (1 - eta * eta);
  d(7, 1) = -(1 - xi) * eta;
  return d;
}

struct PointGeometry {
  ShapeValues N;
  ShapeGradients dNdx;  ///< real-coordinate derivatives
  double detJ = 0.0;
  Eigen::Vector2d x;
};

inline PointGeometry point_geometry(const Eigen::Matrix<double, 8, 2>& coords, double xi, double eta,
                                    int element_id = -1) {
  PointGeometry g;
  g.N = shape_functions(xi, eta);
  const ShapeGradients dxi = shape_derivatives(xi, eta);
  const Eigen::Matrix2d J = dxi.transpose() * coords;  // J(i,j) = d x_j / d xi_i
  g.detJ = J.determinant();
  if (!(g.detJ > 0.0))
    throw std::runtime_error("element " + std::to_string(element_id) + ": non-positive Jacobian determinant");
  g.dNdx = dxi * J.inverse().transpose();
  g.x = coords.transpose() * g.N;
  return g;
}

using RowsMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

struct BWM {
  RowsMatrix B;  ///< 5 x 3n: eps_xx, eps_yy, eps_zz, eps_xy, eps_yx
  RowsMatrix W;  ///< 5 x 3n: 0, 0, 0, omega_xy, omega_yx
  RowsMatrix M;  ///< 2 x 3n: theta_z,x  theta_z,y
  double detJ = 0.0;
};

/// Plane-strain Cosserat operators, nodal ordering (u_x, u_y, theta_z).
inline BWM bwm_matrices(const Eigen::Matrix<double, 8, 2>& coords, double xi, double eta, int element_id = -1) {
  const PointGeometry g = point_geometry(coords, xi, eta, element_id);
  BWM o;
  o.detJ = g.detJ;
  o.B = RowsMatrix::Zero(5, 24);
  o.W = RowsMatrix::Zero(5, 24);
  o.M = RowsMatrix::Zero(2, 24);
  for (int a = 0; a < 8; ++a) {
    const double nx = g.dNdx(a, 0), ny = g.dNdx(a, 1), n = g.N(a);
    const int c = 3 * a;
    o.B(0, c) = nx;
    o.B(1, c + 1) = ny;
    o.B(3, c) = 0.5 * ny;
    o.B(3, c + 1) = 0.5 * nx;
    o.B(4, c) = 0.5 * ny;
    o.B(4, c + 1) = 0.5 * nx;
    o.W(3, c) = -0.5 * ny;
    o.W(3, c + 1) = 0.5 * nx;
    o.W(3, c + 2) = -n;
    o.W(4, c) = 0.5 * ny;
    o.W(4, c + 1) = -0.5 * nx;
    o.W(4, c + 2) = n;
    o.M(0, c + 2) = nx;
    o.M(1, c + 2) = ny;
  }
  return o;
}

/// Classical plane-strain operator, nodal ordering (u_x, u_y); rows
/// eps_xx, eps_yy, gamma_xy.
inline RowsMatrix cauchy_b_matrix(const PointGeometry& g) {
  RowsMatrix B = RowsMatrix::Zero(3, 16);
  for (int a = 0; a < 8; ++a) {
    const double nx = g.dNdx(a, 0), ny = g.dNdx(a, 1);
    B(0, 2 * a) = nx;
    B(1, 2 * a + 1) = ny;
    B(2, 2 * a) = ny;
    B(2, 2 * a + 1) = nx;
  }
  return B;
}

/// Lifting from the reduced generalized strain vector to the stacked full
/// tensors [eps; omega; chi] (27 components in the kernel layout). Its
/// transpose extracts the work-conjugate reduced stress vector.
inline RowsMatrix lifting(Continuum c) {
  if (c == Continuum::Cauchy) {
    RowsMatrix P = RowsMatrix::Zero(27, 3);
    P(component_index(0, 0), 0) = 1.0;
    P(component_index(1, 1), 1) = 1.0;
    P(component_index(0, 1), 2) = 0.5;
    P(component_index(1, 0), 2) = 0.5;
    return P;
  }
  RowsMatrix P = RowsMatrix::Zero(27, 12);
  const int eps_rows[5] = {component_index(0, 0), component_index(1, 1), component_index(2, 2),
                           component_index(0, 1), component_index(1, 0)};
  for (int r = 0; r < 5; ++r) {
    P(eps_rows[r], r) = 1.0;
    P(9 + eps_rows[r], 5 + r) = 1.0;
  }
  // chi_ij = d theta_j / d x_i
  P(18 + component_index(0, 2), 10) = 1.0;
  P(18 + component_index(1, 2), 11) = 1.0;
  return P;
}

/// Stacked reduced operator G = [B; W; M] (Cosserat) or B (Cauchy).
struct GeneralizedOperator {
  RowsMatrix G;
  double weight = 0.0;  ///< quadrature weight times det J (unit thickness)
  Eigen::Vector2d x;
};

inline GeneralizedOperator generalized_operator(Continuum c, const Eigen::Matrix<double, 8, 2>& coords,
                                                const Eigen::Vector2d& xi, double w, int element_id = -1) {
  GeneralizedOperator op;
  if (c == Continuum::Cosserat) {
    const BWM bwm = bwm_matrices(coords, xi.x(), xi.y(), element_id);
    op.G.resize(12, 24);
    op.G << bwm.B, bwm.W, bwm.M;
    op.weight = w * bwm.detJ;
    op.x = coords.transpose() * shape_functions(xi.x(), xi.y());
  } else {
    const PointGeometry g = point_geometry(coords, xi.x(), xi.y(), element_id);
    op.G = cauchy_b_matrix(g);
    op.weight = w * g.detJ;
    op.x = g.x;
  }
  return op;
}

}  // namespace cosserat::fem
