#pragma once

// Eight-node serendipity meshes: storage, structured generation with
// grading, and a plain text format.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosserat::fem {

/// Connectivity: corners counter-clockwise, then the midside nodes of the
/// edges (1-2, 2-3, 3-4, 4-1). Same ordering as VTK_QUADRATIC_QUAD.
using Connectivity = std::array<int, 8>;

struct Mesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<Connectivity> elements;
  std::vector<int> regions;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }

  Eigen::Matrix<double, 8, 2> element_coordinates(int e) const {
    Eigen::Matrix<double, 8, 2> x;
    for (int a = 0; a < 8; ++a) x.row(a) = nodes[elements[e][a]].transpose();
    return x;
  }

  Eigen::Vector2d centroid(int e) const {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (int a = 0; a < 4; ++a) c += nodes[elements[e][a]];
    return c / 4.0;
  }
};

/// n intervals on [a, b]; each interval is `ratio` times the previous one.
inline std::vector<double> graded_coordinates(double a, double b, int n, double ratio = 1.0) {
  if (n < 1) throw std::invalid_argument("graded_coordinates: need at least one interval");
  std::vector<double> x(n + 1);
  double total = 0.0, h = 1.0;
  for (int i = 0; i < n; ++i, h *= ratio) total += h;
  x[0] = a;
  h = (b - a) / total;
  for (int i = 1; i <= n; ++i, h *= ratio) x[i] = x[i - 1] + h;
  x[n] = b;
  return x;
}

/// Concatenate coordinate segments sharing their end points.
inline std::vector<double> join_coordinates(const std::vector<std::vector<double>>& parts) {
  std::vector<double> out;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!out.empty() && i == 0) {
        if (std::abs(out.back() - p[0]) > 1e-12 * (1.0 + std::abs(p[0])))
          throw std::invalid_argument("join_coordinates: segments do not touch");
        continue;
      }
      out.push_back(p[i]);
    }
  }
  return out;
}

/// Tensor-product mesh over the given corner-line coordinates, straight-sided
/// elements with midside nodes at edge midpoints. Region 0 everywhere.
inline Mesh structured_mesh(const std::vector<double>& xs, const std::vector<double>& ys) {
  const int nx = static_cast<int>(xs.size()) - 1, ny = static_cast<int>(ys.size()) - 1;
  if (nx < 1 || ny < 1) throw std::invalid_argument("structured_mesh: empty grid");
  Mesh m;
  const int gx = 2 * nx + 1, gy = 2 * ny + 1;
  std::vector<int> id(static_cast<std::size_t>(gx) * gy, -1);
  for (int j = 0; j < gy; ++j) {
    const double y = j % 2 == 0 ? ys[j / 2] : 0.5 * (ys[j / 2] + ys[j / 2 + 1]);
    for (int i = 0; i < gx; ++i) {
      if (i % 2 == 1 && j % 2 == 1) continue;
      const double x = i % 2 == 0 ? xs[i / 2] : 0.5 * (xs[i / 2] + xs[i / 2 + 1]);
      id[j * gx + i] = m.num_nodes();
      m.nodes.emplace_back(x, y);
    }
  }
  auto at = [&](int i, int j) { return id[j * gx + i]; };
  for (int ey = 0; ey < ny; ++ey)
    for (int ex = 0; ex < nx; ++ex) {
      const int i = 2 * ex, j = 2 * ey;
      m.elements.push_back({at(i, j), at(i + 2, j), at(i + 2, j + 2), at(i, j + 2), at(i + 1, j),
                            at(i + 2, j + 1), at(i + 1, j + 2), at(i, j + 1)});
      m.regions.push_back(0);
    }
  return m;
}

/// Tag every element whose centroid lies inside the axis-aligned box.
inline int tag_box(Mesh& m, double x0, double x1, double y0, double y1, int region) {
  int n = 0;
  for (int e = 0; e < m.num_elements(); ++e) {
    const Eigen::Vector2d c = m.centroid(e);
    if (c.x() > x0 && c.x() < x1 && c.y() > y0 && c.y() < y1) {
      m.regions[e] = region;
      ++n;
    }
  }
  return n;
}

/// Nodes whose coordinate lies within tol of a line x = value or y = value.
inline std::vector<int> nodes_where(const Mesh& m, int axis, double value, double tol = 1e-9) {
  std::vector<int> out;
  for (int i = 0; i < m.num_nodes(); ++i)
    if (std::abs(m.nodes[i](axis) - value) <= tol) out.push_back(i);
  return out;
}

// Text format:
//   nodes <n>
//   <id> <x> <y>
//   elements <m>
//   <id> <n1> ... <n8> <region>
inline void write_mesh_text(std::ostream& os, const Mesh& m) {
  os.precision(17);
  os << "nodes " << m.num_nodes() << "\n";
  for (int i = 0; i < m.num_nodes(); ++i) os << i << " " << m.nodes[i].x() << " " << m.nodes[i].y() << "\n";
  os << "elements " << m.num_elements() << "\n";
  for (int e = 0; e < m.num_elements(); ++e) {
    os << e;
    for (int a : m.elements[e]) os << " " << a;
    os << " " << m.regions[e] << "\n";
  }
}

inline Mesh read_mesh_text(std::istream& is) {
  Mesh m;
  std::string key;
  int n = 0;
  if (!(is >> key >> n) || key != "nodes") throw std::runtime_error("mesh: expected 'nodes <count>'");
  std::map<int, int> index;
  for (int k = 0; k < n; ++k) {
    int id;
    double x, y;
    if (!(is >> id >> x >> y)) throw std::runtime_error("mesh: truncated node list");
    index[id] = k;
    m.nodes.emplace_back(x, y);
  }
  if (!(is >> key >> n) || key != "elements") throw std::runtime_error("mesh: expected 'elements <count>'");
  for (int k = 0; k < n; ++k) {
    int id, region;
    Connectivity c;
    if (!(is >> id)) throw std::runtime_error("mesh: truncated element list");
    for (int& a : c) {
      int raw;
      if (!(is >> raw)) throw std::runtime_error("mesh: truncated element list");
      auto it = index.find(raw);
      if (it == index.end()) throw std::runtime_error("mesh: element " + std::to_string(id) + " references unknown node");
      a = it->second;
    }
    if (!(is >> region)) throw std::runtime_error("mesh: missing region tag");
    m.elements.push_back(c);
    m.regions.push_back(region);
  }
  return m;
}

}  // namespace cosserat::fem
