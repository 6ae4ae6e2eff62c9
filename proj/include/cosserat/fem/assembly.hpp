#pragma once

// Problem definition, Gauss-point storage and assembly of internal forces
// and consistent stiffness.

#include "cosserat/fem/element.hpp"
#include "cosserat/fem/mesh.hpp"
#include "cosserat/material.hpp"
#include "cosserat/return_map.hpp"
#include "cosserat/tangent.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosserat::fem {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct Problem {
  Mesh mesh;
  Continuum continuum = Continuum::Cosserat;
  int quadrature_order = 0;  ///< 0: default rule of the continuum
  std::vector<MaterialModel> materials;  ///< indexed by region tag

  /// Prescribed DOFs: value = base + load_factor * reference.
  std::map<int, std::pair<double, double>> prescribed;
  Vector f_ext;  ///< dead loads, constant during the analysis

  std::vector<int> reaction_dofs;  ///< internal forces summed into the reported reaction
  int control_dof = -1;            ///< DOF whose value is reported as displacement

  std::function<Tensor2(const Eigen::Vector2d&, int region)> initial_stress;

  int ndpn() const { return dofs_per_node(continuum); }
  int num_dofs() const { return mesh.num_nodes() * ndpn(); }
  int dof(int node, int comp) const { return node * ndpn() + comp; }

  void fix(int node, int comp, double reference = 0.0, double base = 0.0) {
    prescribed[dof(node, comp)] = {base, reference};
  }
};

struct GaussPoint {
  GeneralizedState committed;
  GeneralizedState trial;
  StressState committed_stress;
  StressState stress;
  RowsMatrix committed_D;
  RowsMatrix D;  ///< reduced consistent tangent P^T D P
  ScalarSolveReport report;
};

struct RegimeCounts {
  std::array<long, 4> n{};
  long total() const { return n[0] + n[1] + n[2] + n[3]; }
  void add(Regime r) { ++n[static_cast<int>(r)]; }
  RegimeCounts& operator+=(const RegimeCounts& o) {
    for (int i = 0; i < 4; ++i) n[i] += o.n[i];
    return *this;
  }
};

/// Reduce the nine fourth-order blocks to the element strain space.
inline RowsMatrix reduce_tangent(const ConsistentTangent& t, const RowsMatrix& P) {
  RowsMatrix full(27, 27);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) full.block<9, 9>(9 * a, 9 * b) = t(a, b);
  return P.transpose() * full * P;
}

inline Eigen::Matrix<double, 27, 1> stacked_stress(const StressState& s) {
  Eigen::Matrix<double, 27, 1> v;
  v << flatten(s.sigma_sym), flatten(s.s_skw), flatten(s.mu);
  return v;
}

/// Working data of a discretized problem: precomputed element operators,
/// Gauss-point states and the fixed sparsity pattern of the free block.
class Assembler {
 public:
  explicit Assembler(const Problem& pb) : pb_(pb), P_(lifting(pb.continuum)) {
    const int ne = pb.mesh.num_elements();
    const QuadratureRule rule = quadrature_rule(pb.continuum, pb.quadrature_order);
    for (int e = 0; e < ne; ++e) {
      if (pb.mesh.regions[e] < 0 || pb.mesh.regions[e] >= static_cast<int>(pb.materials.size()))
        throw std::runtime_error("element " + std::to_string(e) + ": no material for region " +
                                 std::to_string(pb.mesh.regions[e]));
    }
    ops_.resize(ne);
    gps_.resize(ne);
    const int nd = pb.ndpn();
    edofs_.resize(ne);
    for (int e = 0; e < ne; ++e) {
      const auto coords = pb.mesh.element_coordinates(e);
      const MaterialModel& mat = pb.materials[pb.mesh.regions[e]];
      const RowsMatrix De = reduce_tangent(tangent_elastic(mat), P_);
      for (int g = 0; g < rule.size(); ++g) {
        ops_[e].push_back(generalized_operator(pb.continuum, coords, rule.points[g], rule.weights[g], e));
        GaussPoint gp;
        if (pb.initial_stress) {
          StressState s;
          s.sigma_sym = sym(pb.initial_stress(ops_[e].back().x, pb.mesh.regions[e]));
          gp.committed = recover_elastic_state(s, mat.moduli, 0.0);
          s.p = s.sigma_sym.trace() / 3.0;
          const LodeInvariants inv = invariants_sym(dev(s.sigma_sym));
          s.q = s.r = s.qs = inv.qs;
          s.theta = inv.theta;
          gp.committed_stress = s;
        }
        gp.committed_D = De;
        gp.trial = gp.committed;
        gp.stress = gp.committed_stress;
        gp.D = De;
        gps_[e].push_back(gp);
      }
      for (int a = 0; a < 8; ++a)
        for (int c = 0; c < nd; ++c) edofs_[e].push_back(pb.dof(pb.mesh.elements[e][a], c));
    }
    build_pattern();
  }

  const Problem& problem() const { return pb_; }
  int num_free() const { return nfree_; }
  const std::vector<int>& free_index() const { return free_; }
  const std::vector<std::vector<GaussPoint>>& gauss_points() const { return gps_; }
  std::vector<std::vector<GaussPoint>>& gauss_points() { return gps_; }
  const std::vector<std::vector<GeneralizedOperator>>& operators() const { return ops_; }
  const RowsMatrix& lift() const { return P_; }

  struct Output {
    Vector f_int;  ///< all DOFs
    SparseMatrix K;  ///< free-free block (only when requested)
    Vector k_fp_du;  ///< free rows of K * du_prescribed (only when requested)
    RegimeCounts regimes;
    int max_scalar_iterations = 0;
  };

  /// Evaluate Gauss points for the displacement u (increment from u_n).
  /// committed=true reuses the committed stresses and tangents instead.
  Output evaluate(const Vector& u, const Vector& u_n, bool committed, bool with_stiffness,
                  const Vector* du_prescribed = nullptr) {
    const int ne = pb_.mesh.num_elements();
    std::vector<Vector> fe(ne);
    std::vector<RowsMatrix> ke(ne);
    std::vector<RegimeCounts> counts(ne);
    std::vector<int> scalar_its(ne, 0);
    std::vector<std::string> errors(ne);

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int e = 0; e < ne; ++e) {
      try {
        evaluate_element(e, u, u_n, committed, with_stiffness, fe[e], ke[e], counts[e], scalar_its[e]);
      } catch (const std::exception& ex) {
        errors[e] = ex.what();
      }
    }
    for (int e = 0; e < ne; ++e)
      if (!errors[e].empty()) throw ReturnMapError("element " + std::to_string(e) + ": " + errors[e], {});

    Output out;
    out.f_int = Vector::Zero(pb_.num_dofs());
    if (with_stiffness) {
      std::fill(values_.begin(), values_.end(), 0.0);
      if (du_prescribed) out.k_fp_du = Vector::Zero(nfree_);
    }
    for (int e = 0; e < ne; ++e) {
      const auto& dofs = edofs_[e];
      const int n = static_cast<int>(dofs.size());
      for (int i = 0; i < n; ++i) out.f_int(dofs[i]) += fe[e](i);
      out.regimes += counts[e];
      out.max_scalar_iterations = std::max(out.max_scalar_iterations, scalar_its[e]);
      if (!with_stiffness) continue;
      const auto& slots = slots_[e];
      for (int j = 0; j < n; ++j) {
        const int fj = free_[dofs[j]];
        for (int i = 0; i < n; ++i) {
          const int fi = free_[dofs[i]];
          if (fi < 0) continue;
          if (fj >= 0)
            values_[slots[j * n + i]] += ke[e](i, j);
          else if (du_prescribed)
            out.k_fp_du(fi) += ke[e](i, j) * (*du_prescribed)(dofs[j]);
        }
      }
    }
    if (with_stiffness) {
      out.K = pattern_;
      std::copy(values_.begin(), values_.end(), out.K.valuePtr());
      regularize(out.K);
    }
    return out;
  }

  void commit() {
    for (auto& el : gps_)
      for (auto& gp : el) {
        gp.committed = gp.trial;
        gp.committed_stress = gp.stress;
        gp.committed_D = gp.D;
      }
  }

  void rollback() {
    for (auto& el : gps_)
      for (auto& gp : el) {
        gp.trial = gp.committed;
        gp.stress = gp.committed_stress;
        gp.D = gp.committed_D;
      }
  }

  Vector element_dofs(int e, const Vector& u) const {
    Vector v(edofs_[e].size());
    for (std::size_t i = 0; i < edofs_[e].size(); ++i) v(i) = u(edofs_[e][i]);
    return v;
  }

 private:
  void evaluate_element(int e, const Vector& u, const Vector& u_n, bool committed, bool with_stiffness,
                        Vector& f, RowsMatrix& k, RegimeCounts& counts, int& its) {
    const MaterialModel& mat = pb_.materials[pb_.mesh.regions[e]];
    const Vector du = element_dofs(e, u) - element_dofs(e, u_n);
    const int n = static_cast<int>(du.size());
    f = Vector::Zero(n);
    if (with_stiffness) k = RowsMatrix::Zero(n, n);
    for (std::size_t g = 0; g < ops_[e].size(); ++g) {
      const GeneralizedOperator& op = ops_[e][g];
      GaussPoint& gp = gps_[e][g];
      if (!committed) {
        const Eigen::Matrix<double, 27, 1> d = P_ * (op.G * du);
        StrainIncrement inc;
        inc.d_eps = unflatten(d.segment<9>(0));
        inc.d_omega = unflatten(d.segment<9>(9));
        inc.d_chi = unflatten(d.segment<9>(18));
        const IntegrationResult r = integrate(gp.committed, inc, mat);
        gp.trial = r.state;
        gp.stress = r.stress;
        gp.report = r.report;
        gp.D = reduce_tangent(consistent_tangent(r, mat), P_);
        its = std::max(its, r.report.iterations);
      }
      const StressState& s = committed ? gp.committed_stress : gp.stress;
      const RowsMatrix& D = committed ? gp.committed_D : gp.D;
      counts.add(s.regime);
      f.noalias() += op.weight * (op.G.transpose() * (P_.transpose() * stacked_stress(s)));
      if (with_stiffness) k.noalias() += op.weight * (op.G.transpose() * D * op.G);
    }
  }

  void build_pattern() {
    const int ndof = pb_.num_dofs();
    free_.assign(ndof, -1);
    nfree_ = 0;
    for (int i = 0; i < ndof; ++i)
      if (!pb_.prescribed.count(i)) free_[i] = nfree_++;
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto& dofs : edofs_)
      for (int a : dofs)
        for (int b : dofs)
          if (free_[a] >= 0 && free_[b] >= 0) trip.emplace_back(free_[a], free_[b], 1.0);
    pattern_.resize(nfree_, nfree_);
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();
    values_.assign(pattern_.nonZeros(), 0.0);
    slots_.resize(edofs_.size());
    for (std::size_t e = 0; e < edofs_.size(); ++e) {
      const auto& dofs = edofs_[e];
      const std::size_t n = dofs.size();
      slots_[e].assign(n * n, -1);
      for (std::size_t j = 0; j < n; ++j) {
        const int fj = free_[dofs[j]];
        if (fj < 0) continue;
        const int* rows = pattern_.innerIndexPtr();
        const int begin = pattern_.outerIndexPtr()[fj], end = pattern_.outerIndexPtr()[fj + 1];
        for (std::size_t i = 0; i < n; ++i) {
          const int fi = free_[dofs[i]];
          if (fi < 0) continue;
          const int* pos = std::lower_bound(rows + begin, rows + end, fi);
          slots_[e][j * n + i] = static_cast<int>(pos - rows);
        }
      }
    }
  }

  /// Rows with vanishing stiffness (e.g. rotations surrounded by fully
  /// relaxed apex points) get a small diagonal so the factorization exists.
  static void regularize(SparseMatrix& K) {
    double dmax = 0.0;
    for (int j = 0; j < K.outerSize(); ++j) dmax = std::max(dmax, std::abs(K.coeff(j, j)));
    const double floor = 1e-12 * dmax;
    for (int j = 0; j < K.outerSize(); ++j) {
      double colmax = 0.0;
      for (SparseMatrix::InnerIterator it(K, j); it; ++it) colmax = std::max(colmax, std::abs(it.value()));
      if (colmax <= floor) K.coeffRef(j, j) += 1e-8 * dmax;
    }
  }

  const Problem& pb_;
  RowsMatrix P_;
  std::vector<std::vector<GeneralizedOperator>> ops_;
  std::vector<std::vector<GaussPoint>> gps_;
  std::vector<std::vector<int>> edofs_;
  std::vector<int> free_;
  int nfree_ = 0;
  SparseMatrix pattern_;
  std::vector<double> values_;
  std::vector<std::vector<int>> slots_;
};

}  // namespace cosserat::fem
