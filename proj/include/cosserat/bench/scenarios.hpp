#pragma once

// Benchmark problems: plane-strain biaxial compression with a weak zone and
// the rigid strip footing, for classical and micropolar continua.

#include "cosserat/fem/assembly.hpp"
#include "cosserat/fem/element.hpp"
#include "cosserat/fem/mesh.hpp"
#include "cosserat/fem/io.hpp"
#include "cosserat/fem/solver.hpp"
#include "cosserat/material.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosserat::bench {

inline double deg(double d) { return d * kPi / 180.0; }

struct RunConfig {
  std::string scenario = "footing";  ///< biaxial | footing | custom
  std::string variant = "tresca";    ///< footing: tresca | tresca-softening | ngamma
  std::string continuum = "cosserat";
  int mesh_level = 1;

  // elasticity (stress in kPa, couple moduli in kN)
  double G = 4166.7e3, K = 5555.6e3, Gc = 250e3, B = 250e3, Bc = 250e3, Kc = 250e3;

  // yield and potential
  std::string criterion = "tresca";  ///< tresca | mohr-coulomb | drucker-prager | lode-cosine
  double phi = 0.0, phi_g = 0.0;    ///< degrees
  double beta = 0.999;
  double lode_gamma = 0.0;           ///< lode-cosine only
  double cohesion = 490.0, cohesion_final = 0.0, a_lambda = 0.0, hardening_modulus = 0.0;

  // geometry and loading
  double width = 25.0, height = 25.0, footing_half_width = 1.0;
  double fine_zone = 3.0;
  double edge_size = 0.0;  ///< element size at the footing edge; 0: level default
  bool rough = false;
  double unit_weight = 0.0;
  double k0 = -1.0;  ///< < 0: 1 - sin(phi)
  double confinement = 100.0;
  double weak_x0 = 0.0, weak_x1 = 0.5, weak_y0 = 4.5, weak_y1 = 5.0, weak_dphi = 5.0;
  double final_displacement = 0.01;  ///< normalized: u/B (footing) or axial strain (biaxial)
  int steps = 40;
  int quadrature_order = 0;
  std::string mesh_file;     ///< custom scenario: mesh in the plain text format
  double mesh_jitter = 0.0;  ///< interior corner perturbation, fraction of the local size
  unsigned seed = 1;

  // solver
  double rtol = 1e-8;
  int max_iterations = 25;
  int max_bisections = 4;
};

inline RunConfig default_config(const std::string& scenario, const std::string& variant = "") {
  RunConfig c;
  c.scenario = scenario;
  if (scenario == "biaxial") {
    c.variant = "weak-zone";
    c.G = 55000;
    c.K = 33333;
    c.Gc = 5000;
    c.B = c.Bc = c.Kc = 5000;
    c.criterion = "mohr-coulomb";
    c.phi = 30;
    c.phi_g = 20;
    c.beta = 0.9999;
    c.cohesion = 0.0;
    c.width = 2.5;
    c.height = 10.0;
    c.final_displacement = 0.015;
    c.steps = 60;
    return c;
  }
  if (scenario == "custom") {
    RunConfig b = default_config("biaxial");
    b.scenario = "custom";
    b.variant = "box-compression";
    b.weak_dphi = 5.0;
    return b;
  }
  if (scenario != "footing") throw std::invalid_argument("unknown scenario '" + scenario + "'");
  c.variant = variant.empty() ? "tresca" : variant;
  if (c.variant == "tresca" || c.variant == "tresca-softening") {
    c.criterion = "tresca";
    c.beta = 0.999;
    c.cohesion = 490;
    c.a_lambda = c.variant == "tresca-softening" ? 10.0 : 0.0;
    c.final_displacement = 0.01;
    c.steps = 40;
  } else if (c.variant == "ngamma") {
    c.criterion = "mohr-coulomb";
    c.phi = 25;
    c.phi_g = 0.5;
    c.beta = 0.9999;
    c.cohesion = 0.0;
    c.unit_weight = 18.0;
    c.rough = true;
    c.final_displacement = 2e-4;
    c.steps = 40;
    c.max_bisections = 8;
  } else {
    throw std::invalid_argument("unknown footing variant '" + c.variant + "'");
  }
  return c;
}

inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (c.scenario != "biaxial" && c.scenario != "footing" && c.scenario != "custom")
    fail("scenario must be biaxial, footing or custom");
  if (c.scenario == "custom" && c.mesh_file.empty()) fail("custom scenario needs mesh_file");
  if (c.edge_size < 0.0) fail("edge_size must be non-negative");
  if (c.mesh_jitter < 0.0 || c.mesh_jitter >= 0.3) fail("mesh_jitter must lie in [0, 0.3)");
  if (c.continuum != "cauchy" && c.continuum != "cosserat") fail("continuum must be cauchy or cosserat");
  const int max_level = c.scenario == "footing" ? 4 : 3;
  if (c.mesh_level < 1 || c.mesh_level > max_level)
    fail("mesh_level must lie in [1, " + std::to_string(max_level) + "]");
  if (c.steps < 1) fail("steps must be positive");
  if (!(c.final_displacement > 0)) fail("final_displacement must be positive");
  if (c.criterion != "tresca" && c.criterion != "mohr-coulomb" && c.criterion != "drucker-prager" &&
      c.criterion != "lode-cosine")
    fail("unknown criterion '" + c.criterion + "'");
  if (!(c.beta > 0 && c.beta < 1)) fail("beta must lie in (0, 1)");
  if (c.phi < 0 || c.phi >= 90 || c.phi_g < 0 || c.phi_g >= 90) fail("friction angles must lie in [0, 90)");
  if (c.cohesion < 0 || c.cohesion_final < 0 || c.a_lambda < 0) fail("strength parameters must be non-negative");
  if (c.scenario == "footing" && !(c.footing_half_width < c.fine_zone && c.fine_zone < c.width &&
                                   c.fine_zone < c.height))
    fail("footing geometry must satisfy half_width < fine_zone < width, height");
}

/// Strength in f = q Gamma + M p - sigma0 for the configured criterion.
inline double criterion_sigma0(const RunConfig& c, double cohesion, double phi_deg) {
  if (c.criterion == "tresca") return 2.0 * cohesion;
  return mohr_coulomb_sigma0(cohesion, deg(phi_deg));
}

inline MaterialModel make_material(const RunConfig& c, double dphi = 0.0) {
  MaterialModel m;
  m.moduli = ElasticModuli(c.G, c.K, c.Gc, c.B, c.Bc, c.Kc);
  const double phi = c.phi - dphi, phig = c.phi_g - dphi;
  if (c.criterion == "tresca") {
    m.yield = {rounded_tresca_shape(c.beta), 0.0};
    m.potential = m.yield;
  } else if (c.criterion == "mohr-coulomb") {
    m.yield = {rounded_mohr_coulomb_shape(deg(phi), c.beta), mohr_coulomb_slope(deg(phi))};
    m.potential = phig == phi ? m.yield
                              : Surface{rounded_mohr_coulomb_shape(deg(phig), c.beta), mohr_coulomb_slope(deg(phig))};
  } else if (c.criterion == "drucker-prager") {
    m.yield = {constant_shape(), mohr_coulomb_slope(deg(phi))};
    m.potential = {m.yield.shape, mohr_coulomb_slope(deg(phig))};
  } else {
    const ShapeFunction s(std::make_shared<shapes::LodeCosine>(c.beta, c.lode_gamma, "lode-cosine"));
    m.yield = {s, mohr_coulomb_slope(deg(phi))};
    m.potential = {s, mohr_coulomb_slope(deg(phig))};
  }
  const double s_i = criterion_sigma0(c, c.cohesion, phi);
  if (c.a_lambda > 0.0)
    m.hardening = ExponentialHardening{s_i, criterion_sigma0(c, c.cohesion_final, phi), c.a_lambda};
  else
    m.hardening = LinearHardening{s_i, c.hardening_modulus};
  return m;
}

/// n intervals from a to b whose first interval has length `first`.
inline std::vector<double> graded_from(double a, double b, int n, double first) {
  const double L = b - a;
  if (first * n >= L) return fem::graded_coordinates(a, b, n, 1.0);
  double lo = 1.0, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double r = 0.5 * (lo + hi);
    const double total = first * (std::pow(r, n) - 1.0) / (r - 1.0);
    (total > L ? hi : lo) = r;
  }
  return fem::graded_coordinates(a, b, n, 0.5 * (lo + hi));
}

struct Scenario {
  fem::Problem problem;
  fem::NewtonConfig newton;
  int steps = 1;
  double displacement_scale = 1.0;  ///< divides the control displacement
  double reaction_scale = 1.0;      ///< divides the reaction
  double reaction_sign = 1.0;
  std::string displacement_label, reaction_label;
};

namespace detail {

/// Consistent nodal loads of a uniform traction on every element edge
/// lying on the line coordinate(axis) == value.
inline void edge_traction(fem::Problem& pb, int axis, double value, const Eigen::Vector2d& t) {
  static const int edges[4][3] = {{0, 1, 4}, {1, 2, 5}, {2, 3, 6}, {3, 0, 7}};
  const fem::Mesh& m = pb.mesh;
  for (const auto& c : m.elements)
    for (const auto& ed : edges) {
      bool on = true;
      for (int k = 0; k < 3; ++k) on = on && std::abs(m.nodes[c[ed[k]]](axis) - value) < 1e-9;
      if (!on) continue;
      const double L = (m.nodes[c[ed[1]]] - m.nodes[c[ed[0]]]).norm();
      const double w[3] = {L / 6.0, L / 6.0, 2.0 * L / 3.0};
      for (int k = 0; k < 3; ++k)
        for (int d = 0; d < 2; ++d) pb.f_ext(pb.dof(c[ed[k]], d)) += w[k] * t(d);
    }
}

inline void body_force(fem::Problem& pb, const Eigen::Vector2d& b) {
  const fem::QuadratureRule rule = fem::gauss_rule(3);
  for (int e = 0; e < pb.mesh.num_elements(); ++e) {
    const auto x = pb.mesh.element_coordinates(e);
    for (int g = 0; g < rule.size(); ++g) {
      const fem::PointGeometry pg = fem::point_geometry(x, rule.points[g].x(), rule.points[g].y(), e);
      for (int a = 0; a < 8; ++a)
        for (int d = 0; d < 2; ++d)
          pb.f_ext(pb.dof(pb.mesh.elements[e][a], d)) += rule.weights[g] * pg.detJ * pg.N(a) * b(d);
    }
  }
}

}  // namespace detail

struct FootingMeshLevel {
  int under, beside, depth, outer;
  double edge;  ///< element size at the footing edge
};

inline FootingMeshLevel footing_mesh_level(int level) {
  static const FootingMeshLevel table[4] = {
      {4, 6, 8, 7, 0.15}, {6, 9, 12, 9, 0.08}, {8, 12, 16, 10, 0.05}, {10, 18, 20, 11, 0.04}};
  return table[level - 1];
}

inline std::vector<double> mirrored(const std::vector<double>& x) {
  std::vector<double> out;
  const double a = x.front(), b = x.back();
  for (auto it = x.rbegin(); it != x.rend(); ++it) out.push_back(a + b - *it);
  return out;
}

/// Refined towards the footing edge and the ground surface, graded beyond
/// the fine zone.
inline fem::Mesh footing_mesh(const RunConfig& c) {
  FootingMeshLevel L = footing_mesh_level(c.mesh_level);
  if (c.edge_size > 0.0) L.edge = c.edge_size;
  const double b = c.footing_half_width, fz = c.fine_zone;
  const auto under = mirrored(graded_from(0.0, b, L.under, L.edge));
  const auto beside = graded_from(b, fz, L.beside, L.edge);
  const auto xs = fem::join_coordinates(
      {under, beside, graded_from(fz, c.width, L.outer, beside.back() - beside[beside.size() - 2])});
  const auto top = graded_from(0.0, fz, L.depth, L.edge);
  const auto deep = graded_from(fz, c.height, L.outer, top.back() - top[top.size() - 2]);
  std::vector<double> ys;
  for (auto it = deep.rbegin(); it != deep.rend(); ++it) ys.push_back(-*it);
  for (auto it = top.rbegin() + 1; it != top.rend(); ++it) ys.push_back(-*it);
  return fem::structured_mesh(xs, ys);
}

inline fem::Mesh biaxial_mesh(const RunConfig& c) {
  const int nx = 5 * c.mesh_level;
  return fem::structured_mesh(fem::graded_coordinates(0.0, c.width, nx),
                              fem::graded_coordinates(0.0, c.height, 4 * nx));
}

/// Random perturbation of interior corner nodes; midside nodes are moved
/// back to the midpoints of their straight edges.
inline void jitter_mesh(fem::Mesh& m, double fraction, unsigned seed) {
  if (fraction <= 0.0) return;
  Eigen::Vector2d lo = m.nodes[0], hi = m.nodes[0];
  for (const auto& x : m.nodes) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  std::vector<double> size(m.num_nodes(), std::numeric_limits<double>::infinity());
  std::vector<char> corner(m.num_nodes(), 0);
  for (const auto& c : m.elements)
    for (int a = 0; a < 4; ++a) {
      const int i = c[a], j = c[(a + 1) % 4];
      const double L = (m.nodes[i] - m.nodes[j]).norm();
      size[i] = std::min(size[i], L);
      size[j] = std::min(size[j], L);
      corner[i] = 1;
    }
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < m.num_nodes(); ++i) {
    const Eigen::Vector2d x = m.nodes[i];
    const double d = u(rng), e = u(rng);
    const bool boundary = std::abs(x.x() - lo.x()) < 1e-9 || std::abs(x.x() - hi.x()) < 1e-9 ||
                          std::abs(x.y() - lo.y()) < 1e-9 || std::abs(x.y() - hi.y()) < 1e-9;
    if (!corner[i] || boundary) continue;
    m.nodes[i] += fraction * size[i] * Eigen::Vector2d(d, e);
  }
  for (const auto& c : m.elements)
    for (int a = 0; a < 4; ++a) m.nodes[c[4 + a]] = 0.5 * (m.nodes[c[a]] + m.nodes[c[(a + 1) % 4]]);
}

inline fem::Mesh load_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file '" + path + "'");
  return fem::read_mesh_text(in);
}

inline Scenario build_scenario(const RunConfig& c) {
  validate(c);
  Scenario s;
  fem::Problem& pb = s.problem;
  pb.continuum = c.continuum == "cosserat" ? fem::Continuum::Cosserat : fem::Continuum::Cauchy;
  pb.quadrature_order = c.quadrature_order;
  const bool cosserat = pb.continuum == fem::Continuum::Cosserat;
  s.steps = c.steps;
  s.newton.rtol = c.rtol;
  s.newton.max_iterations = c.max_iterations;
  s.newton.max_bisections = c.max_bisections;

  if (c.scenario == "footing") {
    pb.mesh = footing_mesh(c);
    jitter_mesh(pb.mesh, c.mesh_jitter, c.seed);
    pb.materials = {make_material(c)};
    pb.f_ext = fem::Vector::Zero(pb.num_dofs());
    const double b = c.footing_half_width;
    const double settlement = c.final_displacement * 2.0 * b;
    for (int i = 0; i < pb.mesh.num_nodes(); ++i) {
      const Eigen::Vector2d& x = pb.mesh.nodes[i];
      const bool bottom = std::abs(x.y() + c.height) < 1e-9;
      const bool left = std::abs(x.x()) < 1e-9, right = std::abs(x.x() - c.width) < 1e-9;
      const bool under = std::abs(x.y()) < 1e-9 && x.x() <= b + 1e-9;
      if (bottom) {
        pb.fix(i, 0);
        pb.fix(i, 1);
      }
      if (left || right) pb.fix(i, 0);
      if (left && cosserat) pb.fix(i, 2);
      if (under) {
        pb.fix(i, 1, -settlement);
        pb.reaction_dofs.push_back(pb.dof(i, 1));
        if (c.rough) pb.fix(i, 0);
        if (left) pb.control_dof = pb.dof(i, 1);
      }
    }
    if (c.unit_weight > 0.0) {
      const double k0 = c.k0 >= 0.0 ? c.k0 : 1.0 - std::sin(deg(c.phi));
      const double gam = c.unit_weight;
      pb.initial_stress = [gam, k0](const Eigen::Vector2d& x, int) {
        const double sv = gam * x.y();
        return Tensor2(Eigen::Vector3d(k0 * sv, sv, k0 * sv).asDiagonal());
      };
      detail::body_force(pb, Eigen::Vector2d(0.0, -gam));
    }
    s.displacement_scale = -2.0 * b;
    s.reaction_sign = -1.0;
    if (c.variant == "ngamma" || c.unit_weight > 0.0) {
      s.reaction_scale = b * 0.5 * c.unit_weight * 2.0 * b;
      s.reaction_label = "N_gamma";
    } else {
      s.reaction_scale = b * c.cohesion;
      s.reaction_label = "q_b/S_u";
    }
    s.displacement_label = "u/B";
    s.newton.characteristic_force = std::max(1.0, s.reaction_scale);
  } else {
    if (c.scenario == "custom") {
      pb.mesh = load_mesh_file(c.mesh_file);
      jitter_mesh(pb.mesh, c.mesh_jitter, c.seed);
    } else {
      pb.mesh = biaxial_mesh(c);
      jitter_mesh(pb.mesh, c.mesh_jitter, c.seed);
      fem::tag_box(pb.mesh, c.weak_x0, c.weak_x1, c.weak_y0, c.weak_y1, 1);
    }
    Eigen::Vector2d lo = pb.mesh.nodes[0], hi = pb.mesh.nodes[0];
    for (const auto& x : pb.mesh.nodes) {
      lo = lo.cwiseMin(x);
      hi = hi.cwiseMax(x);
    }
    const double width = hi.x() - lo.x(), height = hi.y() - lo.y();
    pb.materials = {make_material(c), make_material(c, c.weak_dphi)};
    pb.f_ext = fem::Vector::Zero(pb.num_dofs());
    const double shortening = c.final_displacement * height;
    for (int i = 0; i < pb.mesh.num_nodes(); ++i) {
      const Eigen::Vector2d& x = pb.mesh.nodes[i];
      if (std::abs(x.x() - lo.x()) < 1e-9) pb.fix(i, 0);
      if (std::abs(x.y() - lo.y()) < 1e-9) pb.fix(i, 1);
      if (std::abs(x.y() - hi.y()) < 1e-9) {
        pb.fix(i, 1, -shortening);
        pb.reaction_dofs.push_back(pb.dof(i, 1));
        if (std::abs(x.x() - lo.x()) < 1e-9) pb.control_dof = pb.dof(i, 1);
      }
    }
    const double p0 = c.confinement;
    if (p0 != 0.0) {
      pb.initial_stress = [p0](const Eigen::Vector2d&, int) { return Tensor2(-p0 * Tensor2::Identity()); };
      detail::edge_traction(pb, 0, hi.x(), Eigen::Vector2d(-p0, 0.0));
    }
    s.displacement_scale = -height;
    s.reaction_sign = -1.0;
    s.reaction_scale = width;
    s.displacement_label = "axial_strain";
    s.reaction_label = "axial_stress";
    s.newton.characteristic_force = std::max(1.0, std::abs(p0) * width);
  }
  return s;
}

struct CurvePoint {
  double x, y;
};

inline std::vector<CurvePoint> normalized_curve(const Scenario& s, const std::vector<fem::StepRecord>& steps) {
  std::vector<CurvePoint> out;
  for (const auto& r : steps)
    out.push_back({r.displacement / s.displacement_scale, s.reaction_sign * r.reaction / s.reaction_scale});
  return out;
}

/// Largest normalized reaction and the step where it occurs.
inline std::pair<double, int> peak(const std::vector<CurvePoint>& c) {
  std::pair<double, int> best{-std::numeric_limits<double>::infinity(), -1};
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i].y > best.first) best = {c[i].y, static_cast<int>(i)};
  return best;
}

/// Relative spread of the last `n` reactions; small values mean a plateau.
inline double plateau_spread(const std::vector<CurvePoint>& c, int n) {
  if (static_cast<int>(c.size()) < n || n < 2) return std::numeric_limits<double>::infinity();
  double lo = c.back().y, hi = c.back().y;
  for (int i = 0; i < n; ++i) {
    lo = std::min(lo, c[c.size() - 1 - i].y);
    hi = std::max(hi, c[c.size() - 1 - i].y);
  }
  return (hi - lo) / std::max(std::abs(hi), 1e-300);
}

/// Linear interpolation of the reaction at normalized displacement x.
inline double curve_at(const std::vector<CurvePoint>& c, double x) {
  if (c.empty()) throw std::invalid_argument("curve_at: empty curve");
  if (x <= c.front().x) return c.front().y;
  for (std::size_t i = 1; i < c.size(); ++i)
    if (x <= c[i].x) {
      const double t = (x - c[i - 1].x) / (c[i].x - c[i - 1].x);
      return (1.0 - t) * c[i - 1].y + t * c[i].y;
    }
  return c.back().y;
}

struct RunResult {
  fem::SolveHistory history;
  std::vector<CurvePoint> curve;
  int elements = 0, nodes = 0, dofs = 0;
};

using StepObserver = std::function<void(const fem::StepRecord&, const fem::Vector& u, const fem::Assembler&)>;

inline RunResult run_scenario(const Scenario& s, int max_steps = -1, const StepObserver& observer = {}) {
  RunResult r;
  r.elements = s.problem.mesh.num_elements();
  r.nodes = s.problem.mesh.num_nodes();
  r.dofs = s.problem.num_dofs();
  fem::NewtonSolver solver(s.problem, s.newton);
  auto cb = [&](const fem::StepRecord& rec) {
    if (observer) observer(rec, solver.displacement(), solver.assembler());
  };
  r.history = solver.run(s.steps, cb, max_steps);
  r.curve = normalized_curve(s, r.history.steps);
  return r;
}

inline RunResult run_config(const RunConfig& c, int max_steps = -1, const StepObserver& observer = {}) {
  return run_scenario(build_scenario(c), max_steps, observer);
}

}  // namespace cosserat::bench
