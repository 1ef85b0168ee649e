#pragma once

#include <string>

#include <json.hpp>

#include <wgstokes/experiments.hpp>
#include <wgstokes/spectral.hpp>

#ifndef WGSTOKES_VERSION
#define WGSTOKES_VERSION "unknown"
#endif

namespace wgstokes::report {

using nlohmann::json;

inline json to_json(const std::vector<double>& v) { return json(v); }

inline json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json metadata(const CaseOptions& o, int dim) {
  return {
      {"version", WGSTOKES_VERSION},
      {"seed", o.seed},
      {"tol", o.krylov.tol > 0.0 ? o.krylov.tol : default_tolerance(dim)},
      {"max_iter", o.krylov.max_iter},
      {"restart", o.krylov.restart},
      {"inner_tol", o.inner.rel_tol},
      {"inner_max_iter", o.inner.max_iter},
      {"ichol_drop", o.inner.drop_tol},
      {"inner_solver", o.direct_inner ? "cholesky" : "pcg-ichol"},
      {"boundary_rule", o.boundary.name()},
  };
}

inline json to_json(const SolveReport& r) {
  return {
      {"iterations", r.iterations},
      {"converged", r.converged},
      {"residual_history", r.residual_history},
      {"true_relative_residual", r.true_relative_residual},
      {"wall_time", r.wall_time},
      {"restarts", r.restarts},
      {"inner_iterations", r.inner_iterations},
  };
}

inline json to_json(const ErrorReport& e) {
  return {
      {"h", e.h},
      {"num_elements", e.num_elements},
      {"pressure_l2", e.pressure_l2},
      {"velocity_l2", e.velocity_l2},
      {"gradient_l2", e.gradient_l2},
      {"projected_l2", e.projected_l2},
  };
}

inline json to_json(const CaseResult& r) {
  return {
      {"solver", r.solver},
      {"precond", r.precond},
      {"w", r.w_kind},
      {"regime", r.regime},
      {"variant", r.variant},
      {"mu", r.mu},
      {"rho", r.rho},
      {"gamma", r.gamma},
      {"alpha_h", r.alpha_h},
      {"tol", r.tol},
      {"projection_residual", r.projection_residual},
      {"rhs_norm", r.rhs_norm},
      {"errors", to_json(r.errors)},
      {"solve", to_json(r.solve)},
  };
}

inline json to_json(const ConvergenceStudy& s) {
  json runs = json::array();
  for (const auto& r : s.runs) {
    runs.push_back(to_json(r));
  }
  return {
      {"runs", runs},
      {"orders",
       {{"pressure_l2", s.pressure_orders},
        {"velocity_l2", s.velocity_orders},
        {"gradient_l2", s.gradient_orders},
        {"projected_l2", s.projected_orders}}},
  };
}

inline json to_json(const IterationTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"w", r.w_kind}, {"mu", r.mu}, {"iterations", r.iterations}, {"converged", r.converged}});
  }
  return {
      {"dim", t.dim},
      {"solver", t.solver},
      {"precond", t.precond},
      {"tol", t.tol},
      {"subdivisions", t.subdivisions},
      {"num_elements", t.num_elements},
      {"rows", rows},
  };
}

inline json to_json(const AlphaStudy& s) {
  json j = {{"h", s.h}, {"alpha_h", s.alpha}};
  j["slope"] = s.slope ? json(*s.slope) : json("not-applicable");
  return j;
}

inline json to_json(const SpectralReport& r) {
  json ivs = json::array();
  for (const auto& iv : r.intervals) {
    ivs.push_back({iv.lo, iv.hi});
  }
  json j = {
      {"lemma", r.lemma},
      {"variant", r.variant},
      {"passed", r.passed},
      {"beta", r.beta},
      {"c1", r.c1},
      {"gamma", r.gamma},
      {"rho", r.rho},
      {"slack", r.slack},
      {"intervals", ivs},
      {"failures", r.failures},
      {"worst_margin", r.worst_margin},
      {"kernel_unit_eigenvalues", r.kernel_unit_eigenvalues},
      {"unit_with_pressure", r.unit_with_pressure},
      {"near_zero", r.near_zero},
      {"eigenvalues", to_json(r.eigenvalues)},
      {"eigenvalue_ok", r.eigenvalue_ok},
  };
  if (r.has_outlier) {
    j["outlier"] = {{"value", r.outlier},
                    {"predicted", r.outlier_predicted},
                    {"relative_error", r.outlier_rel_error},
                    {"tolerance", r.outlier_tol}};
  }
  return j;
}

} // namespace wgstokes::report
