// fvfrac command-line driver: solve, convergence, density, mesh-info.

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fvfrac/fvfrac.hpp"

namespace {

using namespace fvfrac;

constexpr int kExitNonConvergence = 2;
constexpr int kExitInput = 3;

struct CommonArgs {
  std::string preset;
  double tau = 1e-3;
  double t_final = 1.0;
  std::optional<double> alpha, beta;
  std::string solver = "bicgstab";
  std::size_t maxit = 100;
};

double parse_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error("invalid " + what + " '" + s + "'");
  return v;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::istringstream is(s);
  for (std::string item; std::getline(is, item, ',');) out.push_back(parse_number(item, what));
  if (out.empty()) throw Error("empty " + what);
  return out;
}

void check_preset(const std::string& name) {
  for (const auto& n : preset_names())
    if (n == name) return;
  throw Error("unknown preset '" + name + "'");
}

StepOptions step_options(const CommonArgs& a) {
  StepOptions opt;
  opt.bicgstab.maxit = a.maxit;
  if (a.solver == "dense")
    opt.solver = SolverKind::Dense;
  else if (a.solver != "bicgstab")
    throw Error("unknown solver '" + a.solver + "' (expected bicgstab or dense)");
  return opt;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  return os;
}

int run_solve(const CommonArgs& a, double h, const std::string& vtk, const std::string& csv) {
  check_preset(a.preset);
  const auto t0 = std::chrono::steady_clock::now();
  Preset p = build_preset(a.preset, {h, a.tau, a.t_final, a.alpha, a.beta});
  const Discretization disc(std::move(p.mesh));
  TimeIntegrator integ(disc, p.spec, step_options(a));
  integ.run();
  const auto norms = error_norms(disc, integ.state().u, p.exact, integ.state().t);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::cout << "preset     " << a.preset << '\n'
            << "h          " << format_sci(disc.h()) << '\n'
            << "unknowns   " << disc.num_unknowns() << '\n'
            << "steps      " << integ.steps_taken() << '\n'
            << "t          " << integ.state().t << '\n'
            << "l2_error   " << format_sci(norms.l2) << '\n'
            << "linf_error " << format_sci(norms.linf) << '\n'
            << "iters_avg  " << format_fixed(integ.average_iterations(), 2) << '\n'
            << "density    " << format_fixed(density(integ.stiffness()), 3) << "%\n";

  if (!vtk.empty()) {
    const Vector full = disc.to_vertices(integ.state().u);
    emit_vtk(disc.mesh(), full, vtk);
  }
  if (!csv.empty()) {
    ConvergenceRow row{disc.h(), disc.num_unknowns(), norms.l2, norms.linf, {}, {}, integ.average_iterations(), secs};
    auto os = open_out(csv);
    write_convergence_csv(os, {row});
  }
  return 0;
}

int run_convergence_cmd(const CommonArgs& a, const std::string& levels, const std::string& csv) {
  check_preset(a.preset);
  RunOptions opt{a.tau, a.t_final, a.alpha, a.beta, step_options(a)};
  const auto rows = run_convergence(a.preset, parse_list(levels, "h level"), opt);
  if (csv.empty()) {
    write_convergence_csv(std::cout, rows);
  } else {
    auto os = open_out(csv);
    write_convergence_csv(os, rows);
    write_convergence_csv(std::cout, rows);
  }
  return 0;
}

int run_density(const std::string& preset, const std::string& levels, const std::string& csv) {
  check_preset(preset);
  std::ostringstream out;
  out << "h,unknowns,nnz,density_percent\n";
  for (double h : parse_list(levels, "h level")) {
    Preset p = build_preset(preset, {.h = h});
    const Discretization disc(std::move(p.mesh));
    const CsrMatrix m = assemble_stiffness(disc, p.spec, 0.0);
    out << format_sci(disc.h()) << ',' << disc.num_unknowns() << ',' << m.nnz() << ','
        << format_fixed(density(m), 3) << '\n';
  }
  if (!csv.empty()) {
    auto os = open_out(csv);
    os << out.str();
  }
  std::cout << out.str();
  return 0;
}

/// rect:NX,NY (unit square), disk:H (unit disk), <preset>[:H], or a mesh file.
Mesh mesh_from_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "rect" && colon != std::string::npos) {
    const auto n = parse_list(tail, "grid size");
    if (n.size() != 2 || n[0] < 1 || n[1] < 1 || n[0] != std::floor(n[0]) || n[1] != std::floor(n[1]))
      throw Error("rect spec must be rect:NX,NY with positive integers");
    return generate_rect_mesh(static_cast<std::size_t>(n[0]), static_cast<std::size_t>(n[1]),
                              Rectangle{0.0, 1.0, 0.0, 1.0});
  }
  if (head == "disk" && colon != std::string::npos)
    return generate_disk_mesh(parse_number(tail, "mesh size"), Disk{0.0, 0.0, 1.0});
  for (const auto& n : preset_names())
    if (head == n) return build_preset(n, {.h = tail.empty() ? 0.3 : parse_number(tail, "mesh size")}).mesh;
  std::ifstream probe(spec);
  if (!probe) throw Error("'" + spec + "' is neither a mesh file nor a mesh spec");
  return load_mesh(spec);
}

int run_mesh_info(const std::string& spec) {
  const Mesh m = mesh_from_spec(spec);
  double amin = m.triangle_area(0);
  for (Index t = 1; t < m.num_triangles(); ++t) amin = std::min(amin, m.triangle_area(t));
  std::cout << "vertices   " << m.num_vertices() << '\n'
            << "triangles  " << m.num_triangles() << '\n'
            << "interior   " << m.num_interior() << '\n'
            << "boundary   " << m.num_vertices() - m.num_interior() << '\n'
            << "h          " << format_sci(mesh_h(m)) << '\n'
            << "area       " << format_sci(m.area()) << '\n'
            << "min_area   " << format_sci(amin) << '\n';
  return 0;
}

void add_common(CLI::App* cmd, CommonArgs& a, bool with_solver) {
  cmd->add_option("--preset", a.preset, "Preset name")->required();
  cmd->add_option("--tau", a.tau, "Time step")->check(CLI::PositiveNumber);
  cmd->add_option("--t-final", a.t_final, "Final time")->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", a.alpha, "Order in x, 0 < alpha < 1");
  cmd->add_option("--beta", a.beta, "Order in y, 0 < beta < 1");
  if (!with_solver) return;
  cmd->add_option("--solver", a.solver, "bicgstab or dense");
  cmd->add_option("--maxit", a.maxit, "Bi-CGSTAB iteration cap per step")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control-volume solver for two-sided space-fractional diffusion on triangular meshes"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  CommonArgs solve_args;
  double h = 0.3;
  std::string vtk, csv;
  auto* solve = app.add_subcommand("solve", "Solve one preset and report errors at t-final");
  solve->set_help_flag("--help", "Print this help message and exit");
  add_common(solve, solve_args, true);
  solve->add_option("--h", h, "Target mesh size")->check(CLI::PositiveNumber);
  solve->add_option("--vtk", vtk, "Write the solution as legacy VTK");
  solve->add_option("--csv", csv, "Write a one-row CSV summary");

  CommonArgs conv_args;
  std::string conv_levels, conv_csv;
  auto* conv = app.add_subcommand("convergence", "Error and order table over mesh levels");
  add_common(conv, conv_args, true);
  conv->add_option("--h-levels", conv_levels, "Comma-separated decreasing h values")->required();
  conv->add_option("--csv", conv_csv, "Output CSV path (stdout if omitted)");

  std::string dens_preset, dens_levels, dens_csv;
  auto* dens = app.add_subcommand("density", "Stiffness-matrix density over mesh levels");
  dens->add_option("--preset", dens_preset, "Preset name")->required();
  dens->add_option("--h-levels", dens_levels, "Comma-separated h values")->required();
  dens->add_option("--csv", dens_csv, "Output CSV path");

  std::string mesh_spec;
  auto* info = app.add_subcommand("mesh-info", "Mesh statistics for a file, rect:NX,NY, disk:H or <preset>[:H]");
  info->add_option("mesh", mesh_spec, "Mesh file or spec")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*solve) return run_solve(solve_args, h, vtk, csv);
    if (*conv) return run_convergence_cmd(conv_args, conv_levels, conv_csv);
    if (*dens) return run_density(dens_preset, dens_levels, dens_csv);
    if (*info) return run_mesh_info(mesh_spec);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
