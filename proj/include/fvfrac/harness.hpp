#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fvfrac/assembly.hpp"
#include "fvfrac/core.hpp"
#include "fvfrac/cvgeom.hpp"
#include "fvfrac/mesh.hpp"

namespace fvfrac {

// ---------------------------------------------------------------------------
// Closed-form fractional derivatives used by the manufactured forcings
// ---------------------------------------------------------------------------

/// Left RL derivative of order r (lower limit 0) of z^2 (1-z)^2:
///   G(3)/G(3-r) z^(2-r) - 2 G(4)/G(4-r) z^(3-r) + G(5)/G(5-r) z^(4-r).
inline double p_helper(double z, double r) {
  if (!(r > 0.0 && r < 2.0) || r == 1.0) throw Error("p_helper: order must lie in (0,1) or (1,2)");
  if (z < 0.0) throw Error("p_helper: z must be non-negative");
  if (z == 0.0) return 0.0;
  return std::tgamma(3.0) / std::tgamma(3.0 - r) * std::pow(z, 2.0 - r) -
         2.0 * std::tgamma(4.0) / std::tgamma(4.0 - r) * std::pow(z, 3.0 - r) +
         std::tgamma(5.0) / std::tgamma(5.0 - r) * std::pow(z, 4.0 - r);
}

/// RL derivative of order mu in (1,2) of x^n, n <= 4, with lower limit
/// `limit` (Left) or upper limit `limit` (Right). Expands x^n in powers of
/// (x - limit) and differentiates termwise.
inline double rl_monomial(int n, double limit, double mu, double x, Side side) {
  if (n < 0 || n > 4) throw Error("rl_monomial: degree must lie in [0, 4]");
  if (!(mu > 1.0 && mu < 2.0)) throw Error("rl_monomial: order must lie in (1, 2)");
  const double dist = side == Side::Left ? x - limit : limit - x;
  if (!(dist > 0.0)) throw Error("rl_monomial: evaluation point must lie strictly inside the limit");

  // x^n = sum_m C(n,m) limit^(n-m) (x - limit)^m, and (x - limit)^m = (+-1)^m dist^m.
  double sum = 0.0;
  double binom = 1.0;
  for (int m = 0; m <= n; ++m) {
    const double sign = (side == Side::Right && m % 2 == 1) ? -1.0 : 1.0;
    const double coeff = binom * std::pow(limit, n - m) * sign;
    sum += coeff * std::tgamma(m + 1.0) / std::tgamma(m + 1.0 - mu) * std::pow(dist, m - mu);
    binom = binom * (n - m) / (m + 1);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

using ExactFn = std::function<double(double x, double y, double t)>;

struct Preset {
  std::string name;
  Mesh mesh;
  ProblemSpec spec;
  ExactFn exact;
};

struct PresetOptions {
  double h = 0.3;
  double tau = 1e-3;
  double t_final = 1.0;
  std::optional<double> alpha;
  std::optional<double> beta;
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"example1-linear", "example1-quadratic", "example1-exponential",
                                              "example2-riesz-disk"};
  return names;
}

/// Cells per side so that the unit-square grid diagonal does not exceed h.
inline std::size_t rect_cells_for(double h, double side) {
  if (!(h > 0.0)) throw Error("mesh size must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(2.0) * side / h - 1e-9)));
}

namespace detail {

struct CoefficientCase {
  std::function<double(double)> k_minus, k_plus, dk_minus, dk_plus;
};

inline CoefficientCase coefficient_case(const std::string& name) {
  if (name == "example1-linear")
    return {[](double z) { return 2.0 - z; }, [](double z) { return 2.0 + z; }, [](double) { return -1.0; },
            [](double) { return 1.0; }};
  if (name == "example1-quadratic")
    return {[](double z) { return 2.0 - z * z; }, [](double z) { return 2.0 + z * z; },
            [](double z) { return -2.0 * z; }, [](double z) { return 2.0 * z; }};
  if (name == "example1-exponential")
    return {[](double z) { return 3.0 - std::exp(z); }, [](double z) { return 3.0 + std::exp(z); },
            [](double z) { return -std::exp(z); }, [](double z) { return std::exp(z); }};
  throw Error("unknown preset '" + name + "'");
}

inline Preset example1(const std::string& name, const PresetOptions& opt) {
  const CoefficientCase kc = coefficient_case(name);
  const double alpha = opt.alpha.value_or(name == "example1-linear" ? 0.3 : 0.7);
  const double beta = opt.beta.value_or(name == "example1-linear" ? 0.5 : 0.9);
  const Rectangle unit{0.0, 1.0, 0.0, 1.0};

  Preset p;
  p.name = name;
  const std::size_t n = rect_cells_for(opt.h, 1.0);
  p.mesh = generate_rect_mesh(n, n, unit);

  auto& s = p.spec;
  s.alpha = alpha;
  s.beta = beta;
  s.K1 = [k = kc.k_minus](double x, double, double) { return k(x); };
  s.K2 = [k = kc.k_plus](double x, double, double) { return k(x); };
  s.K3 = [k = kc.k_minus](double, double y, double) { return k(y); };
  s.K4 = [k = kc.k_plus](double, double y, double) { return k(y); };
  s.domain = unit;
  s.t_final = opt.t_final;
  s.tau = opt.tau;

  auto bump = [](double z) { return z * z * (1.0 - z) * (1.0 - z); };
  s.initial = [bump](double x, double y) { return bump(x) * bump(y); };
  p.exact = [bump](double x, double y, double t) { return (t * t + 1.0) * bump(x) * bump(y); };

  s.forcing = [kc, alpha, beta, bump](double x, double y, double t) {
    const double bx = kc.dk_minus(x) * p_helper(x, alpha) + kc.k_minus(x) * p_helper(x, 1.0 + alpha) -
                      kc.dk_plus(x) * p_helper(1.0 - x, alpha) + kc.k_plus(x) * p_helper(1.0 - x, 1.0 + alpha);
    const double by = kc.dk_minus(y) * p_helper(y, beta) + kc.k_minus(y) * p_helper(y, 1.0 + beta) -
                      kc.dk_plus(y) * p_helper(1.0 - y, beta) + kc.k_plus(y) * p_helper(1.0 - y, 1.0 + beta);
    return 2.0 * t * bump(x) * bump(y) - bx * bump(y) * (t * t + 1.0) - by * bump(x) * (t * t + 1.0);
  };
  return p;
}

inline Preset example2(const PresetOptions& opt) {
  const double alpha = opt.alpha.value_or(0.8);
  const double beta = opt.beta.value_or(0.8);
  const Disk unit{0.0, 0.0, 1.0};

  Preset p;
  p.name = "example2-riesz-disk";
  p.mesh = generate_disk_mesh(opt.h, unit);

  auto& s = p.spec;
  s.alpha = alpha;
  s.beta = beta;
  const auto k = riesz_to_two_sided(1.0, 1.0, alpha, beta);
  s.K1 = [c = k.k1](double, double, double) { return c; };
  s.K2 = [c = k.k2](double, double, double) { return c; };
  s.K3 = [c = k.k3](double, double, double) { return c; };
  s.K4 = [c = k.k4](double, double, double) { return c; };
  s.domain = unit;
  s.t_final = opt.t_final;
  s.tau = opt.tau;

  auto w = [](double x, double y) {
    const double r = x * x + y * y - 1.0;
    return r * r;
  };
  s.initial = w;
  p.exact = [w](double x, double y, double t) { return std::exp(-t) * w(x, y); };

  // D^{1+a}_left(x^n) from a(y) plus D^{1+a}_right(x^n) to b(y), combined
  // as the expansion (x^2 + y^2 - 1)^2 = x^4 + (2y^2 - 2) x^2 + (y^2 - 1)^2.
  auto along = [](double x, double other, double order) {
    const double half = std::sqrt(1.0 - other * other);
    auto fg = [&](int n) {
      return rl_monomial(n, -half, 1.0 + order, x, Side::Left) + rl_monomial(n, half, 1.0 + order, x, Side::Right);
    };
    return fg(4) + (2.0 * other * other - 2.0) * fg(2) + (other * other - 1.0) * (other * other - 1.0) * fg(0);
  };
  const double cx = 2.0 * std::cos((1.0 + alpha) / 2.0 * std::numbers::pi);
  const double cy = 2.0 * std::cos((1.0 + beta) / 2.0 * std::numbers::pi);
  s.forcing = [w, along, alpha, beta, cx, cy](double x, double y, double t) {
    const double e = std::exp(-t);
    return -e * w(x, y) + e / cx * along(x, y, alpha) + e / cy * along(y, x, beta);
  };
  return p;
}

}  // namespace detail

/// Mesh, problem and exact solution for a named study. Defaults follow the
/// reference parameter choices (alpha=0.3, beta=0.5 for the linear case,
/// 0.7/0.9 for quadratic and exponential, 0.8/0.8 on the disk).
inline Preset build_preset(const std::string& name, const PresetOptions& opt = {}) {
  if (name == "example2-riesz-disk") return detail::example2(opt);
  if (name.rfind("example1-", 0) == 0) return detail::example1(name, opt);
  throw Error("unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Errors and orders
// ---------------------------------------------------------------------------

struct ErrorNorms {
  double l2 = 0.0;
  double linf = 0.0;
};

/// linf: max nodal error over unknowns; l2: sqrt(sum dV_i e_i^2).
inline ErrorNorms error_norms(const Discretization& disc, std::span<const double> u, const ExactFn& exact, double t) {
  ErrorNorms e;
  double s = 0.0;
  for (Index k = 0; k < disc.num_unknowns(); ++k) {
    const Point2 p = disc.unknown_point(k);
    const double err = u[k] - exact(p.x, p.y, t);
    e.linf = std::max(e.linf, std::abs(err));
    s += disc.cv().cv_area[disc.interior_nodes()[k]] * err * err;
  }
  e.l2 = std::sqrt(s);
  return e;
}

/// log(e1/e2) / log(h1/h2).
inline double convergence_order(double e1, double h1, double e2, double h2) {
  if (!(e1 > 0.0 && e2 > 0.0 && h1 > 0.0 && h2 > 0.0)) throw Error("convergence_order: inputs must be positive");
  if (h1 == h2) throw Error("convergence_order: h1 and h2 must differ");
  return std::log(e1 / e2) / std::log(h1 / h2);
}

struct ConvergenceRow {
  double h = 0.0;
  std::size_t unknowns = 0;
  double l2_error = 0.0;
  double linf_error = 0.0;
  std::optional<double> order_l2;
  std::optional<double> order_linf;
  double iters_avg = 0.0;
  double wall_seconds = 0.0;
};

struct RunOptions {
  double tau = 1e-3;
  double t_final = 1.0;
  std::optional<double> alpha;
  std::optional<double> beta;
  StepOptions step;
};

/// Solves the preset on each mesh level and records errors at t_final.
inline std::vector<ConvergenceRow> run_convergence(const std::string& preset, const std::vector<double>& h_list,
                                                   const RunOptions& opt = {}) {
  if (h_list.size() < 2) throw Error("run_convergence: need at least two mesh levels");
  for (std::size_t i = 1; i < h_list.size(); ++i)
    if (!(h_list[i] < h_list[i - 1])) throw Error("run_convergence: h levels must strictly decrease");

  std::vector<ConvergenceRow> rows;
  for (double h : h_list) {
    const auto t0 = std::chrono::steady_clock::now();
    Preset p = build_preset(preset, {h, opt.tau, opt.t_final, opt.alpha, opt.beta});
    const Discretization disc(std::move(p.mesh));
    TimeIntegrator integ(disc, p.spec, opt.step);
    integ.run();
    const auto norms = error_norms(disc, integ.state().u, p.exact, integ.state().t);
    const auto t1 = std::chrono::steady_clock::now();

    ConvergenceRow row;
    row.h = disc.h();
    row.unknowns = disc.num_unknowns();
    row.l2_error = norms.l2;
    row.linf_error = norms.linf;
    row.iters_avg = integ.average_iterations();
    row.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    if (!rows.empty()) {
      const auto& prev = rows.back();
      row.order_l2 = convergence_order(prev.l2_error, prev.h, row.l2_error, row.h);
      row.order_linf = convergence_order(prev.linf_error, prev.h, row.linf_error, row.h);
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4E", v);
  return buf;
}

inline std::string format_fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Columns: h,l2_error,order_l2,linf_error,order_linf,iters_avg,wall_seconds.
/// Order fields are empty on the first row.
inline void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "h,l2_error,order_l2,linf_error,order_linf,iters_avg,wall_seconds\n";
  for (const auto& r : rows) {
    os << format_sci(r.h) << ',' << format_sci(r.l2_error) << ','
       << (r.order_l2 ? format_fixed(*r.order_l2, 2) : "") << ',' << format_sci(r.linf_error) << ','
       << (r.order_linf ? format_fixed(*r.order_linf, 2) : "") << ',' << format_fixed(r.iters_avg, 2) << ','
       << format_fixed(r.wall_seconds, 3) << '\n';
  }
}

/// Legacy ASCII VTK unstructured grid with one point scalar field.
/// `values` has one entry per mesh vertex.
inline void emit_vtk(const Mesh& mesh, std::span<const double> values, std::ostream& os,
                     const std::string& field = "u") {
  if (values.size() != mesh.num_vertices()) throw Error("emit_vtk: need one value per vertex");
  os << "# vtk DataFile Version 3.0\n"
     << "fvfrac solution\n"
     << "ASCII\n"
     << "DATASET UNSTRUCTURED_GRID\n";
  os << std::setprecision(17);
  os << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& p : mesh.vertices()) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (std::size_t i = 0; i < mesh.num_triangles(); ++i) os << "5\n";  // VTK_TRIANGLE
  os << "POINT_DATA " << mesh.num_vertices() << '\n'
     << "SCALARS " << field << " double 1\n"
     << "LOOKUP_TABLE default\n";
  for (double v : values) os << v << '\n';
}

inline void emit_vtk(const Mesh& mesh, std::span<const double> values, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  emit_vtk(mesh, values, os);
  if (!os) throw Error("failed writing '" + path + "'");
}

}  // namespace fvfrac
