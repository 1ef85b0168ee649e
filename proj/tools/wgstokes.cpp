// Command line driver: mesh generation, assembly export, single solves,
// spectral checks and the benchmark studies.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <wgstokes/assembly.hpp>
#include <wgstokes/errors.hpp>
#include <wgstokes/experiments.hpp>
#include <wgstokes/mesh.hpp>
#include <wgstokes/spectral.hpp>

#include "report_json.hpp"

namespace fs = std::filesystem;
using namespace wgstokes;
using report::json;

namespace {

struct SolveFlags {
  int dim = 2;
  int n = 8;
  double mu = 1.0;
  std::string brule = "mid";
  std::string solver = "minres";
  double tol = 0.0;
  int restart = 30;
  int maxit = 1000;
  std::string w = "ones";
  std::string rho = "auto";
  std::uint64_t seed = kDefaultSeed;
  std::string precond;
  std::string variant;
  double inner_tol = 1e-10;
  double ichol_drop = 1e-3;
  bool direct_inner = false;
  std::string mesh_file;
};

/// Structured mesh unless a mesh file was given.
template <int D>
Mesh<D> load_mesh(const SolveFlags& f) {
  if (f.mesh_file.empty()) {
    return generate_structured<D>(f.n);
  }
  std::ifstream in(f.mesh_file);
  if (!in) {
    throw std::invalid_argument("cannot open mesh file " + f.mesh_file);
  }
  return read_mesh<D>(in);
}

/// A mesh file fixes the dimension.
int resolved_dim(const SolveFlags& f) {
  return f.mesh_file.empty() ? f.dim : peek_mesh_dim(f.mesh_file);
}

void add_solver_flags(CLI::App* app, SolveFlags& f) {
  app->add_option("--solver", f.solver, "minres or gmres")->check(CLI::IsMember({"minres", "gmres"}));
  app->add_option("--tol", f.tol, "relative residual tolerance (default 1e-9 in 2D, 1e-8 in 3D)");
  app->add_option("--restart", f.restart, "GMRES restart length");
  app->add_option("--maxit", f.maxit, "maximum outer iterations");
  app->add_option("--rho", f.rho, "regularization weight: auto or a positive value");
  app->add_option("--seed", f.seed, "seed for the random regularization vector");
  app->add_option("--precond", f.precond, "diag or tri (default follows the solver)")
      ->check(CLI::IsMember({"diag", "tri"}));
  app->add_option("--variant", f.variant, "Schur approximation: augmented or plain")
      ->check(CLI::IsMember({"augmented", "plain"}));
  app->add_option("--inner-tol", f.inner_tol, "relative tolerance of the inner PCG solve");
  app->add_option("--ichol-drop", f.ichol_drop, "incomplete Cholesky drop tolerance");
  app->add_flag("--direct-inner", f.direct_inner, "use a sparse Cholesky factorization for A");
  app->add_option("--brule", f.brule, "boundary rule: mid, gauss2, gauss3, ...");
}

void add_dim_flag(CLI::App* app, int& dim) {
  app->add_option("--dim", dim, "spatial dimension")->check(CLI::IsMember({2, 3}));
}

CaseOptions case_options(const SolveFlags& f, const std::string& w) {
  CaseOptions o;
  o.w_kind = parse_weight_kind(w);
  if (f.rho != "auto") {
    o.rho = std::stod(f.rho);
  }
  o.solver = parse_solver_kind(f.solver);
  if (!f.precond.empty()) {
    o.precond = parse_precond_kind(f.precond);
  }
  if (!f.variant.empty()) {
    o.variant = parse_schur_variant(f.variant);
  }
  o.krylov.tol = f.tol;
  o.krylov.max_iter = f.maxit;
  o.krylov.restart = f.restart;
  o.inner.rel_tol = f.inner_tol;
  o.inner.drop_tol = f.ichol_drop;
  o.direct_inner = f.direct_inner;
  o.boundary = BoundaryRule::parse(f.brule);
  o.seed = f.seed;
  return o;
}

std::vector<WeightKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<WeightKind> kinds;
  for (const auto& s : names) {
    kinds.push_back(parse_weight_kind(s));
  }
  return kinds;
}

template <typename F>
auto dispatch(int dim, F&& f) {
  return dim == 2 ? f(std::integral_constant<int, 2>{}) : f(std::integral_constant<int, 3>{});
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot write " + path);
  }
  os << j.dump(2) << '\n';
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

int cmd_mesh(int dim, int n, const std::string& out) {
  dispatch(dim, [&](auto d) {
    constexpr int D = decltype(d)::value;
    const auto mesh = generate_structured<D>(n);
    if (out.empty() || out == "-") {
      write_mesh(std::cout, mesh);
    } else {
      std::ofstream os(out);
      if (!os) {
        throw std::runtime_error("cannot write " + out);
      }
      write_mesh(os, mesh);
    }
    const auto st = mesh_stats(mesh);
    std::cerr << "elements " << st.num_elements << ", h " << st.h << ", uniformity "
              << st.uniformity_ratio << '\n';
    return 0;
  });
  return 0;
}

int cmd_assemble(int dim, int n, double mu, const std::string& brule, const std::string& dir) {
  dispatch(dim, [&](auto d) {
    constexpr int D = decltype(d)::value;
    const auto mesh = generate_structured<D>(n);
    const auto mc = default_case<D>(mu);
    const auto sys = assemble(mesh, mu, mc.f, mc.u, BoundaryRule::parse(brule));
    json j = {{"version", WGSTOKES_VERSION},
              {"dim", D},
              {"n", n},
              {"mu", mu},
              {"boundary_rule", brule},
              {"num_elements", mesh.num_elements()},
              {"num_velocity", sys.num_velocity()},
              {"num_pressure", sys.num_pressure()},
              {"nnz_A", sys.A.nonZeros()},
              {"nnz_B", sys.B.nonZeros()},
              {"alpha_h", sys.alpha_h}};
    if (!dir.empty()) {
      const auto p = prepare_dir(dir);
      export_matrix_market(sys, p);
      j["export_dir"] = p.string();
    }
    std::cout << j.dump(2) << '\n';
    return 0;
  });
  return 0;
}

int cmd_solve(const SolveFlags& f, const std::string& out) {
  return dispatch(resolved_dim(f), [&](auto d) {
    constexpr int D = decltype(d)::value;
    const auto opts = case_options(f, f.w);
    const auto mesh = load_mesh<D>(f);
    const auto r = run_case(default_case<D>(f.mu), mesh, opts);
    json j = report::to_json(r);
    j["metadata"] = report::metadata(opts, D);
    j["dim"] = D;
    if (f.mesh_file.empty()) {
      j["n"] = f.n;
    } else {
      j["mesh"] = f.mesh_file;
    }
    write_json(j, out);
    return r.solve.converged ? 0 : 3;
  });
}

int cmd_spectrum(const SolveFlags& f, const std::string& lemma, const std::string& out) {
  return dispatch(resolved_dim(f), [&](auto d) {
    constexpr int D = decltype(d)::value;
    const auto mesh = load_mesh<D>(f);
    const auto mc = default_case<D>(f.mu);
    const auto sys = assemble(mesh, f.mu, mc.f, mc.u, BoundaryRule::parse(f.brule));
    auto reg = make_w(parse_weight_kind(f.w), sys.Mp, f.seed);
    const Lemma which = parse_lemma(lemma);
    const bool small = which == Lemma::schur_small || which == Lemma::precond_small;
    reg.regime = small ? Regime::small : Regime::finite;
    reg.rho = f.rho == "auto" ? default_rho(reg.regime, sys.Mp.minCoeff()) : std::stod(f.rho);
    const auto variant = f.variant.empty() ? default_variant(reg.regime) : parse_schur_variant(f.variant);
    const auto data = dense_spectral_data(mesh, sys);
    const auto rep = verify_lemma(which, data, reg, variant);
    json j = report::to_json(rep);
    j["metadata"] = {{"version", WGSTOKES_VERSION}, {"seed", f.seed}, {"dim", D}, {"n", f.n},
                     {"w", f.w}, {"h", data.h}, {"lambda_min_A", data.lambda_min_A},
                     {"lambda_min_M", data.lambda_min_M}, {"lambda_max_M", data.lambda_max_M},
                     {"mass_over_stiffness", data.lambda_max_M / data.lambda_min_A}};
    write_json(j, out);
    std::cerr << rep.lemma << ": " << (rep.passed ? "pass" : "fail") << " (" << rep.failures
              << " eigenvalues outside, worst margin " << rep.worst_margin << ")\n";
    return rep.passed ? 0 : 4;
  });
}

int cmd_convergence(const SolveFlags& f, const std::vector<int>& ns, const std::string& dir) {
  return dispatch(f.dim, [&](auto d) {
    constexpr int D = decltype(d)::value;
    const auto opts = case_options(f, f.w);
    const auto study = convergence_study<D>(f.mu, ns, opts);
    std::ostringstream csv;
    csv << "n,N,h,pressure_l2,velocity_l2,gradient_l2,projected_l2,iterations\n";
    for (std::size_t i = 0; i < study.runs.size(); ++i) {
      const auto& r = study.runs[i];
      csv << ns[i] << ',' << r.errors.num_elements << ',' << r.errors.h << ',' << r.errors.pressure_l2
          << ',' << r.errors.velocity_l2 << ',' << r.errors.gradient_l2 << ','
          << r.errors.projected_l2 << ',' << r.solve.iterations << '\n';
    }
    json j = report::to_json(study);
    j["metadata"] = report::metadata(opts, D);
    j["metadata"]["mu"] = f.mu;
    if (dir.empty()) {
      std::cout << csv.str();
      std::cerr << j["orders"].dump() << '\n';
    } else {
      const auto p = prepare_dir(dir);
      std::ofstream(p / "table.csv") << "# version " << WGSTOKES_VERSION << ", seed " << f.seed
                                    << "\n" << csv.str();
      write_json(j, (p / "report.json").string());
    }
    return 0;
  });
}

int cmd_tables(const SolveFlags& f, const std::vector<int>& ns, const std::vector<std::string>& ws,
               const std::vector<double>& mus, int jobs, const std::string& dir) {
  return dispatch(f.dim, [&](auto d) {
    constexpr int D = decltype(d)::value;
    const auto opts = case_options(f, ws.front());
    const auto t = iteration_table<D>(ns, parse_kinds(ws), mus, opts, jobs);
    std::ostringstream csv;
    write_table_csv(csv, t);
    json j = report::to_json(t);
    j["metadata"] = report::metadata(opts, D);
    if (dir.empty()) {
      std::cout << csv.str();
    } else {
      const auto p = prepare_dir(dir);
      const auto meta = j["metadata"];
      std::ofstream(p / "table.csv") << "# version " << meta["version"].get<std::string>() << ", seed "
                                    << f.seed << ", tol " << t.tol << ", inner_tol " << f.inner_tol
                                    << ", ichol_drop " << f.ichol_drop << "\n" << csv.str();
      write_json(j, (p / "report.json").string());
    }
    return 0;
  });
}

int cmd_alpha(int dim, const std::string& brule, const std::vector<int>& ns, const std::string& dir) {
  return dispatch(dim, [&](auto d) {
    constexpr int D = decltype(d)::value;
    const auto mc = default_case<D>(1.0);
    const auto s = alpha_order_study<D>(mc.u, BoundaryRule::parse(brule), ns);
    std::ostringstream csv;
    csv << "n,h,alpha_h\n";
    for (std::size_t i = 0; i < s.h.size(); ++i) {
      csv << ns[i] << ',' << s.h[i] << ',' << s.alpha[i] << '\n';
    }
    json j = report::to_json(s);
    j["metadata"] = {{"version", WGSTOKES_VERSION}, {"dim", D}, {"boundary_rule", brule}};
    if (dir.empty()) {
      std::cout << csv.str();
      std::cerr << "slope " << j["slope"].dump() << '\n';
    } else {
      const auto p = prepare_dir(dir);
      std::ofstream(p / "table.csv") << "# version " << WGSTOKES_VERSION << "\n" << csv.str();
      write_json(j, (p / "report.json").string());
    }
    return 0;
  });
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized weak Galerkin Stokes solver and benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", WGSTOKES_VERSION);

  SolveFlags f;
  std::string out;
  std::string export_dir;
  std::string lemma = "L4_3";
  std::vector<int> ns{8, 16, 32, 64};
  std::vector<std::string> ws{"ones", "mass", "pin", "random"};
  std::vector<double> mus{1.0, 1e-4};
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  auto* mesh = app.add_subcommand("mesh", "write a structured simplicial mesh of the unit square/cube");
  add_dim_flag(mesh, f.dim);
  mesh->add_option("--n", f.n, "subdivisions per axis")->required();
  mesh->add_option("--out", out, "output file (default stdout)");

  auto* asmb = app.add_subcommand("assemble", "assemble the saddle point system");
  add_dim_flag(asmb, f.dim);
  asmb->add_option("--n", f.n, "subdivisions per axis");
  asmb->add_option("--mu", f.mu, "viscosity");
  asmb->add_option("--brule", f.brule, "boundary rule: mid, gauss2, gauss3, ...");
  asmb->add_option("--export-mm", export_dir, "directory for Matrix Market files");

  auto* solve = app.add_subcommand("solve", "solve one manufactured case and print a JSON report");
  add_dim_flag(solve, f.dim);
  solve->add_option("--n", f.n, "subdivisions per axis");
  solve->add_option("--mu", f.mu, "viscosity");
  solve->add_option("--w", f.w, "ones, mass, pin or random");
  add_solver_flags(solve, f);
  solve->add_option("--out", out, "JSON output file (default stdout)");
  solve->add_option("--mesh", f.mesh_file, "mesh file to use instead of a structured mesh");

  auto* spec = app.add_subcommand("spectrum", "dense eigenvalue check of a spectral bound");
  add_dim_flag(spec, f.dim);
  spec->add_option("--n", f.n, "subdivisions per axis");
  spec->add_option("--mu", f.mu, "viscosity");
  spec->add_option("--w", f.w, "ones, mass, pin or random");
  spec->add_option("--rho", f.rho, "auto or a positive value");
  spec->add_option("--seed", f.seed, "seed for the random regularization vector");
  spec->add_option("--variant", f.variant, "augmented or plain")->check(CLI::IsMember({"augmented", "plain"}));
  spec->add_option("--lemma", lemma, "L4_2, L4_3, L5_1 or L5_2");
  spec->add_option("--out", out, "JSON output file (default stdout)");
  spec->add_option("--mesh", f.mesh_file, "mesh file to use instead of a structured mesh");

  auto* conv = app.add_subcommand("convergence", "error norms and observed orders under refinement");
  add_dim_flag(conv, f.dim);
  conv->add_option("--n", ns, "list of subdivisions");
  conv->add_option("--mu", f.mu, "viscosity");
  conv->add_option("--w", f.w, "ones, mass, pin or random");
  add_solver_flags(conv, f);
  conv->add_option("--out", out, "output directory for table.csv and report.json");

  auto* tables = app.add_subcommand("tables", "iteration counts over meshes, weights and viscosities");
  add_dim_flag(tables, f.dim);
  tables->add_option("--n", ns, "list of subdivisions");
  tables->add_option("--w", ws, "list of weight kinds");
  tables->add_option("--mu", mus, "list of viscosities");
  tables->add_option("--jobs", jobs, "parallel configurations");
  add_solver_flags(tables, f);
  tables->add_option("--out", out, "output directory for table.csv and report.json");

  auto* alpha = app.add_subcommand("alpha-order", "order of the boundary flux defect");
  add_dim_flag(alpha, f.dim);
  alpha->add_option("--n", ns, "list of subdivisions");
  alpha->add_option("--brule", f.brule, "boundary rule: mid, gauss2, gauss3, ...");
  alpha->add_option("--out", out, "output directory for table.csv and report.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mesh) return cmd_mesh(f.dim, f.n, out);
    if (*asmb) return cmd_assemble(f.dim, f.n, f.mu, f.brule, export_dir);
    if (*solve) return cmd_solve(f, out);
    if (*spec) return cmd_spectrum(f, lemma, out);
    if (*conv) return cmd_convergence(f, ns, out);
    if (*tables) return cmd_tables(f, ns, ws, mus, jobs, out);
    if (*alpha) return cmd_alpha(f.dim, f.brule, ns, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
