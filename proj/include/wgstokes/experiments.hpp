#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "assembly.hpp"
#include "krylov.hpp"
#include "manufactured.hpp"
#include "mesh.hpp"
#include "quadrature.hpp"
#include "regularize.hpp"
#include "schur.hpp"
#include "wg_core.hpp"

namespace wgstokes {

enum class SolverKind { minres, gmres };

inline std::string to_string(SolverKind s) { return s == SolverKind::minres ? "minres" : "gmres"; }

inline SolverKind parse_solver_kind(const std::string& s) {
  if (s == "minres") return SolverKind::minres;
  if (s == "gmres") return SolverKind::gmres;
  throw std::invalid_argument("unknown solver '" + s + "'");
}

/// MINRES pairs with the block diagonal preconditioner, GMRES with the
/// block lower triangular one.
inline PrecondKind default_precond(SolverKind s) {
  return s == SolverKind::minres ? PrecondKind::diagonal : PrecondKind::lower_triangular;
}

/// 1e-9 for 2D and 1e-8 for 3D.
inline double default_tolerance(int dim) { return dim == 2 ? 1e-9 : 1e-8; }

struct CaseOptions {
  WeightKind w_kind = WeightKind::ones;
  std::optional<Regime> regime;        // defaults from w_kind
  std::optional<double> rho;           // defaults from regime
  std::optional<SchurVariant> variant; // defaults from regime
  SolverKind solver = SolverKind::minres;
  std::optional<PrecondKind> precond;  // defaults from solver
  KrylovOptions krylov;                // tol <= 0 picks the dimension default
  InnerSolverOptions inner;
  bool direct_inner = false;
  BoundaryRule boundary = BoundaryRule::midpoint();
  std::uint64_t seed = kDefaultSeed;
  bool compute_errors = true;

  CaseOptions() { krylov.tol = 0.0; }
};

/// Discretization errors of one solve.
struct ErrorReport {
  double h = 0.0;
  int num_elements = 0;
  double pressure_l2 = 0.0;  // ||p - p_h||, both taken modulo constants
  double velocity_l2 = 0.0;  // ||u - u_h°||
  double gradient_l2 = 0.0;  // ||grad u - grad_w u_h||
  double projected_l2 = 0.0; // ||Q_h° u - u_h°||
};

struct CaseResult {
  ErrorReport errors;
  SolveReport solve;
  double alpha_h = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
  double mu = 1.0;
  std::string w_kind;
  std::string regime;
  std::string variant;
  std::string precond;
  std::string solver;
  double tol = 0.0;
  /// (rho/mu) w^T p_h + alpha_h / (gamma sqrt(N)); zero for an exact solve.
  double projection_residual = 0.0;
  double rhs_norm = 0.0;
  Vector velocity; // unscaled u_h (interior then facet unknowns)
  Vector pressure;
};

/// Error norms of a WG solution against the analytic fields, using a
/// degree-4 element rule. Boundary facet values are taken from Q_h g.
template <int Dim>
ErrorReport compute_errors(const Mesh<Dim>& mesh, const SaddleSystem<Dim>& sys,
                           const ManufacturedCase<Dim>& mc, const Vector& velocity,
                           const Vector& pressure) {
  const auto rule = simplex_rule_of_degree<Dim>(4);
  const auto& dofs = sys.dofs;
  ErrorReport e;
  e.h = mesh.h();
  e.num_elements = mesh.num_elements();

  // Best constant shift between p and p_h.
  double mean_diff = 0.0;
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const auto verts = mesh.element_vertex_points(k);
    double integral = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      integral += rule.weights[q] * mc.p(map_bary<Dim>(verts, rule.bary[q]));
    }
    mean_diff += mesh.element_measure(k) * (integral - pressure[k]);
  }
  mean_diff /= mesh.domain_measure();

  double ep = 0.0, eu = 0.0, eg = 0.0, eq = 0.0;
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const double vol = mesh.element_measure(k);
    const auto verts = mesh.element_vertex_points(k);
    const auto cgrad = local_weak_gradient(mesh, k);
    const auto& xc = mesh.element_centroid(k);

    Point<Dim> uh;
    std::array<RT0Function<Dim>, Dim> grads;
    for (int c = 0; c < Dim; ++c) {
      uh[c] = velocity[dofs.interior_dof(k, c)];
      Eigen::Matrix<double, Dim + 2, 1> local;
      local[0] = uh[c];
      for (int i = 0; i <= Dim; ++i) {
        const int f = mesh.element_facet(k, i);
        const int dof = dofs.facet_dof(f, c);
        local[1 + i] = dof >= 0 ? velocity[dof] : sys.boundary_values(dofs.boundary_slot(f), c);
      }
      grads[c] = RT0Function<Dim>::from_coefficients(cgrad * local, xc);
    }

    Point<Dim> mean_u = Point<Dim>::Zero();
    for (int q = 0; q < rule.size(); ++q) {
      const auto x = map_bary<Dim>(verts, rule.bary[q]);
      const double wq = rule.weights[q] * vol;
      const auto ux = mc.u(x);
      const auto gx = mc.grad_u(x);
      const double dp = mc.p(x) - pressure[k] - mean_diff;
      ep += wq * dp * dp;
      eu += wq * (ux - uh).squaredNorm();
      for (int c = 0; c < Dim; ++c) {
        eg += wq * (gx.row(c).transpose() - grads[c](x)).squaredNorm();
      }
      mean_u += rule.weights[q] * ux;
    }
    eq += vol * (mean_u - uh).squaredNorm();
  }
  e.pressure_l2 = std::sqrt(ep);
  e.velocity_l2 = std::sqrt(eu);
  e.gradient_l2 = std::sqrt(eg);
  e.projected_l2 = std::sqrt(eq);
  return e;
}

/// Assemble, regularize, precondition, solve and measure one configuration.
template <int Dim>
CaseResult run_case(const ManufacturedCase<Dim>& mc, const Mesh<Dim>& mesh, const CaseOptions& opts) {
  const auto sys = assemble(mesh, mc.mu, mc.f, mc.u, opts.boundary);
  auto reg = make_w(opts.w_kind, sys.Mp, opts.seed);
  reg.regime = opts.regime.value_or(default_regime(opts.w_kind));
  reg.rho = opts.rho.value_or(default_rho(reg.regime, sys.Mp.minCoeff()));
  if (!(reg.rho > 0.0)) {
    throw std::invalid_argument("run_case: rho must be positive");
  }
  const SchurVariant variant = opts.variant.value_or(default_variant(reg.regime));
  const PrecondKind pk = opts.precond.value_or(default_precond(opts.solver));
  KrylovOptions ko = opts.krylov;
  if (!(ko.tol > 0.0)) {
    ko.tol = default_tolerance(Dim);
  }

  const RegularizedOperator op(sys, reg);
  const SchurApprox shat(sys.Mp, reg, variant);
  std::unique_ptr<InnerSolver> inner;
  if (opts.direct_inner) {
    inner = std::make_unique<DirectInnerSolver>(sys.A);
  } else {
    inner = std::make_unique<PcgInnerSolver>(sys.A, opts.inner);
  }
  const BlockPreconditioner prec(pk, shat, *inner, sys.B);
  const Vector rhs = rescaled_rhs(sys);

  CaseResult res;
  Vector x = opts.solver == SolverKind::minres ? minres(op, prec, rhs, ko, res.solve)
                                               : gmres(op, prec, rhs, ko, res.solve);
  res.solve.inner_iterations = inner->iterations();
  res.alpha_h = sys.alpha_h;
  res.gamma = reg.gamma;
  res.rho = reg.rho;
  res.mu = mc.mu;
  res.w_kind = to_string(opts.w_kind);
  res.regime = to_string(reg.regime);
  res.variant = to_string(variant);
  res.precond = to_string(pk);
  res.solver = to_string(opts.solver);
  res.tol = ko.tol;
  res.rhs_norm = rhs.norm();
  res.velocity = x.head(sys.num_velocity()) / mc.mu;
  res.pressure = x.tail(sys.num_pressure());
  const double n = sys.num_pressure();
  res.projection_residual =
      reg.rho / mc.mu * reg.w.dot(res.pressure) + sys.alpha_h / (reg.gamma * std::sqrt(n));
  if (opts.compute_errors) {
    res.errors = compute_errors(mesh, sys, mc, res.velocity, res.pressure);
  } else {
    res.errors.h = mesh.h();
    res.errors.num_elements = mesh.num_elements();
  }
  return res;
}

/// log(e_prev / e_next) / log(h_prev / h_next) for successive entries.
inline std::vector<double> observed_orders(const std::vector<double>& errors,
                                           const std::vector<double>& hs) {
  std::vector<double> orders;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    orders.push_back(std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]));
  }
  return orders;
}

struct ConvergenceStudy {
  std::vector<CaseResult> runs;
  std::vector<double> pressure_orders;
  std::vector<double> velocity_orders;
  std::vector<double> gradient_orders;
  std::vector<double> projected_orders;
};

template <int Dim>
ConvergenceStudy convergence_study(double mu, const std::vector<int>& subdivisions,
                                   const CaseOptions& opts) {
  ConvergenceStudy study;
  const auto mc = default_case<Dim>(mu);
  std::vector<double> hs, ep, eu, eg, eq;
  for (int n : subdivisions) {
    const auto mesh = generate_structured<Dim>(n);
    study.runs.push_back(run_case(mc, mesh, opts));
    const auto& e = study.runs.back().errors;
    hs.push_back(e.h);
    ep.push_back(e.pressure_l2);
    eu.push_back(e.velocity_l2);
    eg.push_back(e.gradient_l2);
    eq.push_back(e.projected_l2);
  }
  study.pressure_orders = observed_orders(ep, hs);
  study.velocity_orders = observed_orders(eu, hs);
  study.gradient_orders = observed_orders(eg, hs);
  study.projected_orders = observed_orders(eq, hs);
  return study;
}

/// Least-squares slope of log|alpha_h| against log h; empty when alpha_h
/// vanishes (below 1e-14) on every mesh, i.e. the rule is exact for g.
inline std::optional<double> fit_log_slope(const std::vector<double>& hs,
                                           const std::vector<double>& values) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (std::abs(values[i]) < 1e-14) {
      continue;
    }
    const double x = std::log(hs[i]), y = std::log(std::abs(values[i]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) {
    return std::nullopt;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct AlphaStudy {
  std::vector<double> h;
  std::vector<double> alpha;
  std::optional<double> slope;
};

template <int Dim>
AlphaStudy alpha_order_study(const VectorField<Dim>& g, const BoundaryRule& rule,
                             const std::vector<int>& subdivisions) {
  AlphaStudy s;
  for (int n : subdivisions) {
    const auto mesh = generate_structured<Dim>(n);
    s.h.push_back(mesh.h());
    s.alpha.push_back(compute_alpha(mesh, g, rule));
  }
  s.slope = fit_log_slope(s.h, s.alpha);
  return s;
}

/// One row of an iteration-count table: fixed (w, mu), one count per mesh.
struct TableRow {
  std::string w_kind;
  double mu = 1.0;
  std::vector<int> iterations;
  std::vector<int> converged;
};

struct IterationTable {
  int dim = 2;
  std::string solver;
  std::string precond;
  double tol = 0.0;
  std::vector<int> subdivisions;
  std::vector<int> num_elements;
  std::vector<TableRow> rows;
};

/// Runs fn(i) for i in [0, count) on up to `jobs` threads; the first
/// exception thrown by any job is rethrown.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (int t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& w : workers) {
    w.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

template <int Dim>
IterationTable iteration_table(const std::vector<int>& subdivisions,
                               const std::vector<WeightKind>& kinds,
                               const std::vector<double>& mus, CaseOptions opts, int jobs = 1) {
  opts.compute_errors = false;
  IterationTable t;
  t.dim = Dim;
  t.solver = to_string(opts.solver);
  t.precond = to_string(opts.precond.value_or(default_precond(opts.solver)));
  t.tol = opts.krylov.tol > 0.0 ? opts.krylov.tol : default_tolerance(Dim);
  t.subdivisions = subdivisions;
  std::vector<Mesh<Dim>> meshes;
  for (int n : subdivisions) {
    meshes.push_back(generate_structured<Dim>(n));
    t.num_elements.push_back(meshes.back().num_elements());
  }
  const int nm = static_cast<int>(meshes.size());
  for (auto kind : kinds) {
    for (double mu : mus) {
      TableRow row;
      row.w_kind = to_string(kind);
      row.mu = mu;
      row.iterations.assign(nm, 0);
      row.converged.assign(nm, 0);
      t.rows.push_back(std::move(row));
    }
  }
  const int nmu = static_cast<int>(mus.size());
  parallel_for(static_cast<int>(t.rows.size()) * nm, jobs, [&](int job) {
    const int r = job / nm, m = job % nm;
    CaseOptions o = opts;
    o.w_kind = kinds[r / nmu];
    const auto res = run_case(default_case<Dim>(mus[r % nmu]), meshes[m], o);
    t.rows[r].iterations[m] = res.solve.iterations;
    t.rows[r].converged[m] = res.solve.converged ? 1 : 0;
  });
  return t;
}

inline void write_table_csv(std::ostream& os, const IterationTable& t) {
  os << "w,mu";
  for (int n : t.num_elements) {
    os << ",N=" << n;
  }
  os << '\n';
  for (const auto& row : t.rows) {
    os << row.w_kind << ',' << row.mu;
    for (std::size_t i = 0; i < row.iterations.size(); ++i) {
      os << ',' << row.iterations[i] << (row.converged[i] ? "" : "*");
    }
    os << '\n';
  }
}

} // namespace wgstokes
