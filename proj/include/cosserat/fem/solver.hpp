#pragma once

// Displacement-controlled incremental Newton solver with step bisection.

#include "cosserat/fem/assembly.hpp"

#include <Eigen/SparseLU>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cosserat::fem {

struct NewtonConfig {
  double rtol = 1e-8;
  double atol = 0.0;  ///< absolute floor; 0 selects 1e-10 * characteristic_force
  double characteristic_force = 1.0;
  int max_iterations = 25;
  int max_bisections = 4;
};

struct StepRecord {
  int step = 0;
  double load_factor = 0.0;
  double displacement = 0.0;
  double reaction = 0.0;
  int iterations = 0;
  int bisections = 0;
  std::vector<double> residuals;  ///< free-DOF residual norm after each update
  RegimeCounts regimes;           ///< of the converged state
};

struct SolveHistory {
  std::vector<StepRecord> steps;
  bool completed = false;
  std::string failure;
  double seconds = 0.0;
  long gauss_evaluations = 0;
  RegimeCounts regimes;  ///< over every Gauss-point evaluation
  int total_iterations = 0;
};

class NewtonSolver {
 public:
  NewtonSolver(const Problem& pb, NewtonConfig cfg) : pb_(pb), asm_(pb), cfg_(cfg) {
    u_ = Vector::Zero(pb.num_dofs());
    for (const auto& [d, v] : pb.prescribed) u_(d) = v.first;
    u_n_ = u_;
    if (pb.f_ext.size() == pb.num_dofs())
      f_ext_ = pb.f_ext;
    else
      f_ext_ = Vector::Zero(pb.num_dofs());
  }

  Assembler& assembler() { return asm_; }
  const Vector& displacement() const { return u_n_; }
  double load_factor() const { return lambda_n_; }

  double reaction(const Vector& f_int) const {
    double r = 0.0;
    for (int d : pb_.reaction_dofs) r += f_int(d);
    return r;
  }

  /// Advance the prescribed load factor to `target`, bisecting on failure.
  /// Returns false (with `why` filled) if the step cannot be completed.
  bool advance(double target, StepRecord& rec, SolveHistory& hist, std::string& why) {
    // each entry: sub-goal and its bisection depth
    std::vector<std::pair<double, int>> stack{{target, 0}};
    rec.bisections = 0;
    while (!stack.empty()) {
      const auto [goal, depth] = stack.back();
      StepRecord sub;
      std::string err;
      if (attempt(goal, sub, hist, err)) {
        stack.pop_back();
        rec.iterations += sub.iterations;
        rec.residuals = sub.residuals;
        rec.regimes = sub.regimes;
        rec.reaction = sub.reaction;
        continue;
      }
      if (depth >= cfg_.max_bisections) {
        why = err;
        return false;
      }
      ++rec.bisections;
      stack.back().second = depth + 1;
      stack.push_back({0.5 * (lambda_n_ + goal), depth + 1});
    }
    rec.load_factor = lambda_n_;
    rec.displacement = pb_.control_dof >= 0 ? u_n_(pb_.control_dof) : 0.0;
    return true;
  }

  /// Equal increments of the load factor from the current state up to 1;
  /// max_steps >= 0 stops early after that many increments.
  SolveHistory run(int steps, const std::function<void(const StepRecord&)>& on_step = {}, int max_steps = -1) {
    SolveHistory hist;
    const auto t0 = std::chrono::steady_clock::now();
    StepRecord first;
    first.step = 0;
    const auto out = asm_.evaluate(u_n_, u_n_, true, false);
    first.reaction = reaction(out.f_int);
    first.regimes = out.regimes;
    first.displacement = pb_.control_dof >= 0 ? u_n_(pb_.control_dof) : 0.0;
    hist.steps.push_back(first);
    if (on_step) on_step(first);
    const double start = lambda_n_;
    for (int s = 1; s <= steps && (max_steps < 0 || s <= max_steps); ++s) {
      StepRecord rec;
      rec.step = s;
      std::string why;
      if (!advance(start + (1.0 - start) * s / steps, rec, hist, why)) {
        hist.failure = "step " + std::to_string(s) + ": " + why;
        break;
      }
      hist.steps.push_back(rec);
      if (on_step) on_step(rec);
    }
    hist.completed = hist.failure.empty();
    hist.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return hist;
  }

 private:
  bool attempt(double goal, StepRecord& rec, SolveHistory& hist, std::string& why) {
    const int nf = asm_.num_free();
    const auto& fidx = asm_.free_index();
    Vector du_p = Vector::Zero(pb_.num_dofs());
    for (const auto& [d, v] : pb_.prescribed) du_p(d) = v.first + goal * v.second - u_n_(d);

    auto free_part = [&](const Vector& full) {
      Vector r(nf);
      for (int i = 0; i < pb_.num_dofs(); ++i)
        if (fidx[i] >= 0) r(fidx[i]) = full(i);
      return r;
    };
    auto scatter = [&](const Vector& df, Vector& u) {
      for (int i = 0; i < pb_.num_dofs(); ++i)
        if (fidx[i] >= 0) u(i) += df(fidx[i]);
    };

    auto factor = [&](const SparseMatrix& K) {
      // the sparsity pattern never changes: order once, refactorize after
      if (!analyzed_) {
        lu_.analyzePattern(K);
        analyzed_ = true;
      }
      lu_.factorize(K);
      return lu_.info() == Eigen::Success;
    };

    // predictor with the committed tangent
    Vector u = u_n_;
    try {
      auto out = asm_.evaluate(u_n_, u_n_, true, true, &du_p);
      if (!factor(out.K)) {
        why = "singular predictor stiffness";
        return false;
      }
      const Vector rhs = -(free_part(out.f_int - f_ext_) + out.k_fp_du);
      const Vector df = lu_.solve(rhs);
      u += du_p;
      scatter(df, u);
    } catch (const std::exception& ex) {
      why = ex.what();
      return false;
    }

    const double atol = cfg_.atol > 0.0 ? cfg_.atol : 1e-10 * cfg_.characteristic_force;
    rec.residuals.clear();
    Assembler::Output out;
    Vector r;
    double rn = 0.0;
    auto evaluate = [&](const Vector& trial) {
      out = asm_.evaluate(trial, u_n_, false, true);
      hist.gauss_evaluations += out.regimes.total();
      hist.regimes += out.regimes;
      r = free_part(out.f_int - f_ext_);
      rn = r.norm();
      return std::isfinite(rn);
    };
    try {
      if (!evaluate(u)) throw std::runtime_error("non-finite residual");
      for (int it = 1;; ++it) {
        ++hist.total_iterations;
        rec.residuals.push_back(rn);
        rec.iterations = it;
        double react = 0.0;
        for (const auto& [d, v] : pb_.prescribed) react += out.f_int(d) * out.f_int(d);
        const double scale = std::max(std::sqrt(react), f_ext_.norm());
        if (rn <= cfg_.rtol * scale + atol) {
          asm_.commit();
          u_n_ = u;
          lambda_n_ = goal;
          rec.reaction = reaction(out.f_int);
          rec.regimes = out.regimes;
          return true;
        }
        if (it >= cfg_.max_iterations) break;
        if (!factor(out.K)) {
          why = "singular tangent stiffness";
          asm_.rollback();
          return false;
        }
        const Vector df = lu_.solve(-r);
        if (!df.allFinite()) break;
        // backtracking on the residual norm; full steps near the solution
        const double r0 = rn;
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 8 && !accepted; ++ls, alpha *= 0.5) {
          Vector trial = u;
          scatter(alpha * df, trial);
          bool ok = false;
          try {
            ok = evaluate(trial);
          } catch (const ReturnMapError&) {
          }
          if (ok && rn <= (1.0 - 1e-4 * alpha) * r0) {
            u = trial;
            accepted = true;
          }
        }
        if (!accepted) break;
      }
    } catch (const std::exception& ex) {
      why = ex.what();
      asm_.rollback();
      return false;
    }
    std::ostringstream os;
    os << "no convergence after " << rec.iterations << " iterations, residual "
       << (rec.residuals.empty() ? 0.0 : rec.residuals.back());
    why = os.str();
    asm_.rollback();
    return false;
  }

  const Problem& pb_;
  Assembler asm_;
  NewtonConfig cfg_;
  Vector u_, u_n_, f_ext_;
  double lambda_n_ = 0.0;
  Eigen::SparseLU<SparseMatrix> lu_;
  bool analyzed_ = false;
};

}  // namespace cosserat::fem
