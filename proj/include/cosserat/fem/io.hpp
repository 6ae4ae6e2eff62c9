#pragma once

// Result output: legacy-VTK unstructured grids and CSV load curves, plus a
// minimal legacy-VTK reader used to validate written files.

#include "cosserat/fem/assembly.hpp"
#include "cosserat/fem/solver.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosserat::fem {

inline constexpr int kVtkQuadraticQuad = 23;

struct CellFields {
  std::vector<double> lambda, p, q, theta, plastic_fraction;
};

inline CellFields cell_averages(const Assembler& a) {
  CellFields c;
  for (const auto& el : a.gauss_points()) {
    double lam = 0, p = 0, q = 0, th = 0, pl = 0;
    for (const auto& gp : el) {
      lam += gp.committed.lambda;
      p += gp.committed_stress.p;
      q += gp.committed_stress.q;
      th += gp.committed_stress.theta;
      pl += gp.committed_stress.regime != Regime::Elastic ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(el.size());
    c.lambda.push_back(lam / n);
    c.p.push_back(p / n);
    c.q.push_back(q / n);
    c.theta.push_back(th / n);
    c.plastic_fraction.push_back(pl / n);
  }
  return c;
}

inline void write_vtk(std::ostream& os, const Problem& pb, const Vector& u, const Assembler& a,
                      const std::string& title = "cosserat") {
  const Mesh& m = pb.mesh;
  const int nd = pb.ndpn();
  os.precision(12);
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << m.num_nodes() << " double\n";
  for (const auto& x : m.nodes) os << x.x() << " " << x.y() << " 0\n";
  os << "CELLS " << m.num_elements() << " " << 9 * m.num_elements() << "\n";
  for (const auto& c : m.elements) {
    os << 8;
    for (int v : c) os << " " << v;
    os << "\n";
  }
  os << "CELL_TYPES " << m.num_elements() << "\n";
  for (int e = 0; e < m.num_elements(); ++e) os << kVtkQuadraticQuad << "\n";

  os << "POINT_DATA " << m.num_nodes() << "\n";
  os << "VECTORS displacement double\n";
  for (int i = 0; i < m.num_nodes(); ++i) os << u(i * nd) << " " << u(i * nd + 1) << " 0\n";
  os << "SCALARS rotation double 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < m.num_nodes(); ++i) os << (nd == 3 ? u(i * nd + 2) : 0.0) << "\n";

  const CellFields c = cell_averages(a);
  os << "CELL_DATA " << m.num_elements() << "\n";
  auto scalar = [&](const char* name, const std::vector<double>& v) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double x : v) os << x << "\n";
  };
  scalar("lambda", c.lambda);
  scalar("p", c.p);
  scalar("q", c.q);
  scalar("lode_angle", c.theta);
  scalar("plastic_fraction", c.plastic_fraction);
  os << "SCALARS region int 1\nLOOKUP_TABLE default\n";
  for (int r : m.regions) os << r << "\n";
}

inline void write_curve_csv(std::ostream& os, const std::vector<StepRecord>& steps,
                            double displacement_scale = 1.0, double reaction_scale = 1.0) {
  os.precision(12);
  os << "step,load_factor,displacement,reaction,normalized_displacement,normalized_reaction,iterations\n";
  for (const auto& s : steps)
    os << s.step << "," << s.load_factor << "," << s.displacement << "," << s.reaction << ","
       << s.displacement / displacement_scale + 0.0 << "," << s.reaction / reaction_scale + 0.0 << "," << s.iterations << "\n";
}

/// Structure of a legacy-VTK unstructured grid as read back from disk.
struct VtkGrid {
  int points = 0;
  int cells = 0;
  std::vector<int> cell_types;
  std::map<std::string, std::vector<double>> point_data;
  std::map<std::string, std::vector<double>> cell_data;
};

inline VtkGrid read_vtk(std::istream& is) {
  VtkGrid g;
  std::string line;
  std::getline(is, line);
  if (line.rfind("# vtk DataFile", 0) != 0) throw std::runtime_error("vtk: bad header");
  std::getline(is, line);  // title
  std::getline(is, line);
  if (line != "ASCII") throw std::runtime_error("vtk: only ASCII supported");
  std::string tok;
  is >> tok >> tok;
  if (tok != "UNSTRUCTURED_GRID") throw std::runtime_error("vtk: expected UNSTRUCTURED_GRID");
  std::map<std::string, std::vector<double>>* section = nullptr;
  int section_size = 0;
  while (is >> tok) {
    if (tok == "POINTS") {
      std::string type;
      is >> g.points >> type;
      double v;
      for (int i = 0; i < 3 * g.points; ++i)
        if (!(is >> v)) throw std::runtime_error("vtk: truncated POINTS");
    } else if (tok == "CELLS") {
      int size;
      is >> g.cells >> size;
      for (int c = 0; c < g.cells; ++c) {
        int n;
        if (!(is >> n)) throw std::runtime_error("vtk: truncated CELLS");
        for (int k = 0; k < n; ++k) {
          int id;
          is >> id;
          if (id < 0 || id >= g.points) throw std::runtime_error("vtk: cell references missing point");
        }
      }
    } else if (tok == "CELL_TYPES") {
      int n;
      is >> n;
      g.cell_types.resize(n);
      for (int& t : g.cell_types) is >> t;
    } else if (tok == "POINT_DATA") {
      is >> section_size;
      section = &g.point_data;
    } else if (tok == "CELL_DATA") {
      is >> section_size;
      section = &g.cell_data;
    } else if (tok == "SCALARS" || tok == "VECTORS") {
      if (!section) throw std::runtime_error("vtk: data outside a section");
      std::string name, type;
      is >> name >> type;
      int comps = 3;
      if (tok == "SCALARS") {
        std::getline(is, line);
        std::istringstream rest(line);
        if (!(rest >> comps)) comps = 1;
        is >> tok;
        if (tok != "LOOKUP_TABLE") throw std::runtime_error("vtk: expected LOOKUP_TABLE");
        is >> tok;
      }
      auto& v = (*section)[name];
      v.resize(static_cast<std::size_t>(section_size) * comps);
      for (double& x : v)
        if (!(is >> x)) throw std::runtime_error("vtk: truncated data array " + name);
    } else {
      throw std::runtime_error("vtk: unexpected token " + tok);
    }
  }
  return g;
}

}  // namespace cosserat::fem
