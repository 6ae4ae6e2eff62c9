#pragma once

// Run artefacts: normalized CSV curve, VTK snapshots and a JSON summary.

#include "cosserat/bench/scenarios.hpp"
#include "cosserat/fem/io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace cosserat::bench {

inline nlohmann::json config_json(const RunConfig& c) {
  return {{"scenario", c.scenario},
          {"variant", c.variant},
          {"continuum", c.continuum},
          {"mesh_level", c.mesh_level},
          {"G", c.G},
          {"K", c.K},
          {"Gc", c.Gc},
          {"B", c.B},
          {"Bc", c.Bc},
          {"Kc", c.Kc},
          {"criterion", c.criterion},
          {"phi", c.phi},
          {"phi_g", c.phi_g},
          {"beta", c.beta},
          {"lode_gamma", c.lode_gamma},
          {"cohesion", c.cohesion},
          {"cohesion_final", c.cohesion_final},
          {"a_lambda", c.a_lambda},
          {"hardening_modulus", c.hardening_modulus},
          {"width", c.width},
          {"height", c.height},
          {"footing_half_width", c.footing_half_width},
          {"fine_zone", c.fine_zone},
          {"edge_size", c.edge_size},
          {"rough", c.rough},
          {"unit_weight", c.unit_weight},
          {"k0", c.k0},
          {"confinement", c.confinement},
          {"weak_zone", {c.weak_x0, c.weak_x1, c.weak_y0, c.weak_y1}},
          {"weak_dphi", c.weak_dphi},
          {"final_displacement", c.final_displacement},
          {"steps", c.steps},
          {"quadrature_order", c.quadrature_order},
          {"mesh_file", c.mesh_file},
          {"mesh_jitter", c.mesh_jitter},
          {"seed", c.seed},
          {"rtol", c.rtol},
          {"max_iterations", c.max_iterations},
          {"max_bisections", c.max_bisections}};
}

inline nlohmann::json regime_json(const fem::RegimeCounts& r) {
  nlohmann::json j;
  for (int i = 0; i < 4; ++i) j[regime_name(static_cast<Regime>(i))] = r.n[i];
  return j;
}

inline nlohmann::json summary_json(const RunConfig& c, const Scenario& s, const RunResult& r) {
  nlohmann::json j;
  j["config"] = config_json(c);
  j["mesh"] = {{"elements", r.elements}, {"nodes", r.nodes}, {"dofs", r.dofs}};
  j["completed"] = r.history.completed;
  j["failure"] = r.history.failure;
  j["seconds"] = r.history.seconds;
  j["steps_completed"] = r.history.steps.empty() ? 0 : static_cast<int>(r.history.steps.size()) - 1;
  j["newton_iterations"] = r.history.total_iterations;
  j["gauss_point_evaluations"] = r.history.gauss_evaluations;
  j["regimes"] = regime_json(r.history.regimes);
  nlohmann::json per_step = nlohmann::json::array();
  for (const auto& st : r.history.steps)
    per_step.push_back({{"step", st.step}, {"iterations", st.iterations}, {"bisections", st.bisections},
                        {"residuals", st.residuals}, {"regimes", regime_json(st.regimes)}});
  j["steps"] = per_step;
  j["labels"] = {{"displacement", s.displacement_label}, {"reaction", s.reaction_label}};
  if (!r.curve.empty()) {
    const auto [pk, at] = peak(r.curve);
    j["peak"] = {{"value", pk}, {"step", at}, {"displacement", r.curve[at].x}};
    j["final"] = {{"value", r.curve.back().y}, {"displacement", r.curve.back().x}};
  }
  return j;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

inline void write_curve(const std::filesystem::path& p, const Scenario& s, const RunResult& r) {
  auto os = open_output(p);
  fem::write_curve_csv(os, r.history.steps, s.displacement_scale, s.reaction_sign * s.reaction_scale);
  if (!os) throw std::runtime_error("write failed for '" + p.string() + "'");
}

inline void write_summary(const std::filesystem::path& p, const RunConfig& c, const Scenario& s,
                          const RunResult& r) {
  auto os = open_output(p);
  os << summary_json(c, s, r).dump(2) << "\n";
  if (!os) throw std::runtime_error("write failed for '" + p.string() + "'");
}

/// Runs the configuration and writes curve.csv, summary.json and VTK
/// snapshots every `vtk_every` steps (0: final state only) into out_dir.
inline RunResult run_and_emit(const RunConfig& c, const std::filesystem::path& out_dir, int vtk_every = 0,
                              int max_steps = -1) {
  std::filesystem::create_directories(out_dir);
  const Scenario s = build_scenario(c);
  int last_written = -1;
  auto snapshot = [&](const fem::StepRecord& rec, const fem::Vector& u, const fem::Assembler& a) {
    if (vtk_every <= 0 || rec.step % vtk_every != 0) return;
    char name[32];
    std::snprintf(name, sizeof name, "step_%04d.vtk", rec.step);
    auto os = open_output(out_dir / name);
    fem::write_vtk(os, s.problem, u, a, c.scenario + " step " + std::to_string(rec.step));
    last_written = rec.step;
  };
  // the final state is written from the observer too, so keep the last one
  fem::Vector u_last;
  const fem::Assembler* a_last = nullptr;
  int step_last = -1;
  auto observer = [&](const fem::StepRecord& rec, const fem::Vector& u, const fem::Assembler& a) {
    snapshot(rec, u, a);
    u_last = u;
    a_last = &a;
    step_last = rec.step;
  };
  RunResult r;
  r.elements = s.problem.mesh.num_elements();
  r.nodes = s.problem.mesh.num_nodes();
  r.dofs = s.problem.num_dofs();
  {
    fem::NewtonSolver solver(s.problem, s.newton);
    r.history = solver.run(
        s.steps, [&](const fem::StepRecord& rec) { observer(rec, solver.displacement(), solver.assembler()); },
        max_steps);
    if (a_last && step_last != last_written) {
      auto os = open_output(out_dir / "final.vtk");
      fem::write_vtk(os, s.problem, u_last, solver.assembler(), c.scenario + " final");
    }
  }
  r.curve = normalized_curve(s, r.history.steps);
  write_curve(out_dir / "curve.csv", s, r);
  write_summary(out_dir / "summary.json", c, s, r);
  return r;
}

}  // namespace cosserat::bench
