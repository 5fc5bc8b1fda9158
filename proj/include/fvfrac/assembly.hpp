#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fvfrac/core.hpp"
#include "fvfrac/cvgeom.hpp"
#include "fvfrac/fracbasis.hpp"
#include "fvfrac/mesh.hpp"
#include "fvfrac/solver.hpp"

namespace fvfrac {

using SpaceTimeFn = std::function<double(double x, double y, double t)>;
using SpaceFn = std::function<double(double x, double y)>;

/// Two-sided variable-coefficient fractional diffusion problem
///   u_t = d/dx[K1 D^a_x u - K2 D^a_{-x} u] + d/dy[K3 D^b_y u - K4 D^b_{-y} u] + f
/// with homogeneous Dirichlet boundary values.
struct ProblemSpec {
  double alpha = 0.5;
  double beta = 0.5;
  SpaceTimeFn K1, K2, K3, K4;
  SpaceTimeFn forcing;
  SpaceFn initial;
  DomainDescriptor domain = MeshFileOnly{};
  double t_final = 1.0;
  double tau = 1e-3;
  bool coefficients_time_dependent = false;
};

inline void validate(const ProblemSpec& p) {
  if (!(p.alpha > 0.0 && p.alpha < 1.0) || !(p.beta > 0.0 && p.beta < 1.0))
    throw Error("fractional orders must satisfy 0 < alpha, beta < 1");
  if (!p.K1 || !p.K2 || !p.K3 || !p.K4 || !p.forcing || !p.initial)
    throw Error("problem is missing a coefficient, forcing or initial function");
  if (!(p.t_final > 0.0) || !(p.tau > 0.0)) throw Error("t_final and tau must be positive");
  validate_domain(p.domain);
}

/// Nodal unknowns over interior nodes at time t; boundary values are zero.
struct DiscreteState {
  Vector u;
  double t = 0.0;
};

// ---------------------------------------------------------------------------
// Line-stabbing index over support bounding boxes
// ---------------------------------------------------------------------------

/// Interval index answering "which supports does this horizontal (vertical)
/// line cross?". Intervals are sorted by lower end; a query binary-searches
/// the lower end and scans back no further than the longest interval.
class IntervalIndex {
 public:
  IntervalIndex() = default;

  void build(std::vector<std::pair<double, double>> ranges) {
    order_.resize(ranges.size());
    std::iota(order_.begin(), order_.end(), Index{0});
    std::sort(order_.begin(), order_.end(), [&](Index a, Index b) {
      return ranges[a].first < ranges[b].first || (ranges[a].first == ranges[b].first && a < b);
    });
    lo_.clear();
    hi_.clear();
    max_len_ = 0.0;
    for (Index k : order_) {
      lo_.push_back(ranges[k].first);
      hi_.push_back(ranges[k].second);
      max_len_ = std::max(max_len_, ranges[k].second - ranges[k].first);
    }
  }

  /// Appends every id whose closed range contains `value`.
  void stab(double value, std::vector<Index>& out) const {
    auto end = static_cast<std::size_t>(std::upper_bound(lo_.begin(), lo_.end(), value) - lo_.begin());
    for (std::size_t i = end; i-- > 0;) {
      if (lo_[i] < value - max_len_) break;
      if (hi_[i] >= value) out.push_back(order_[i]);
    }
  }

 private:
  std::vector<Index> order_;
  std::vector<double> lo_, hi_;
  double max_len_ = 0.0;
};

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

/// Everything derived from the mesh alone: dual geometry, basis supports, the
/// interior-node numbering, and the stabbing indices used to find couplings.
///
/// Unknowns are interior nodes sorted by (y, x).
class Discretization {
 public:
  explicit Discretization(Mesh mesh)
      : mesh_(std::move(mesh)), cv_(build_control_volumes(mesh_)), supports_(build_supports(mesh_)) {
    const std::size_t nv = mesh_.num_vertices();
    for (Index v = 0; v < nv; ++v)
      if (!mesh_.is_boundary(v)) interior_.push_back(v);
    std::sort(interior_.begin(), interior_.end(), [&](Index a, Index b) {
      const Point2 &p = mesh_.vertex(a), &q = mesh_.vertex(b);
      return p.y < q.y || (p.y == q.y && (p.x < q.x || (p.x == q.x && a < b)));
    });
    unknown_of_.assign(nv, kNoIndex);
    for (Index u = 0; u < interior_.size(); ++u) unknown_of_[interior_[u]] = u;

    std::vector<std::pair<double, double>> xr, yr;
    for (Index v : interior_) {
      const auto& bb = supports_[v].bbox;
      xr.emplace_back(bb.xmin, bb.xmax);
      yr.emplace_back(bb.ymin, bb.ymax);
    }
    by_x_.build(std::move(xr));
    by_y_.build(std::move(yr));
    h_ = mesh_h(mesh_);
  }

  const Mesh& mesh() const noexcept { return mesh_; }
  const CvGeometry& cv() const noexcept { return cv_; }
  const std::vector<SupportDomain>& supports() const noexcept { return supports_; }
  const SupportDomain& support_of_unknown(Index u) const { return supports_[interior_[u]]; }

  std::size_t num_unknowns() const noexcept { return interior_.size(); }
  const std::vector<Index>& interior_nodes() const noexcept { return interior_; }
  Index unknown_of(Index vertex) const { return unknown_of_[vertex]; }
  Point2 unknown_point(Index u) const { return mesh_.vertex(interior_[u]); }
  double h() const noexcept { return h_; }

  /// Unknowns whose support bbox crosses the line y = level, ascending.
  std::vector<Index> stab_horizontal(double level) const {
    std::vector<Index> out;
    by_y_.stab(level, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Unknowns whose support bbox crosses the line x = level, ascending.
  std::vector<Index> stab_vertical(double level) const {
    std::vector<Index> out;
    by_x_.stab(level, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Scatters interior values into a full vertex vector (boundary = 0).
  Vector to_vertices(std::span<const double> u) const {
    Vector full(mesh_.num_vertices(), 0.0);
    for (Index k = 0; k < interior_.size(); ++k) full[interior_[k]] = u[k];
    return full;
  }

 private:
  Mesh mesh_;
  CvGeometry cv_;
  std::vector<SupportDomain> supports_;
  std::vector<Index> interior_;
  std::vector<Index> unknown_of_;
  IntervalIndex by_x_, by_y_;
  double h_ = 0.0;
};

/// Unknowns that can couple to a control face with midpoint `mid`: the union
/// of both stabbing sets, ascending.
inline std::vector<Index> candidate_columns(const Discretization& disc, Point2 mid) {
  auto h = disc.stab_horizontal(mid.y);
  const auto v = disc.stab_vertical(mid.x);
  std::vector<Index> out;
  out.reserve(h.size() + v.size());
  std::set_union(h.begin(), h.end(), v.begin(), v.end(), std::back_inserter(out));
  return out;
}

// ---------------------------------------------------------------------------
// Mass, forcing
// ---------------------------------------------------------------------------

/// Diagonal of the lumped mass matrix: control-volume areas of the unknowns.
inline Vector assemble_mass(const Discretization& disc) {
  Vector a(disc.num_unknowns());
  for (Index u = 0; u < a.size(); ++u) {
    a[u] = disc.cv().cv_area[disc.interior_nodes()[u]];
    if (!(a[u] > 0.0)) throw InvariantError("control volume of unknown " + std::to_string(u) + " has non-positive area");
  }
  return a;
}

/// Nodal forcing values f(x_i, y_i, t) at the unknowns.
inline Vector assemble_rhs(const Discretization& disc, const ProblemSpec& problem, double t) {
  Vector f(disc.num_unknowns());
  for (Index u = 0; u < f.size(); ++u) {
    const Point2 p = disc.unknown_point(u);
    f[u] = problem.forcing(p.x, p.y, t);
    if (!std::isfinite(f[u])) {
      std::ostringstream msg;
      msg << "forcing is not finite at (" << p.x << ", " << p.y << ", t=" << t << ")";
      throw Error(msg.str());
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Stiffness
// ---------------------------------------------------------------------------

/// Coefficient bracket values at one face midpoint.
struct FaceCoefficients {
  double k1, k2, k3, k4;
};

namespace detail {

// Shared driver: `coeffs(face)` yields the four coefficients at the face
// midpoint, and `combine(c, left, right, axis)` forms the bracket.
template <typename CoeffFn, typename CombineFn>
CsrMatrix assemble_stiffness_impl(const Discretization& disc, double alpha, double beta, CoeffFn&& coeffs,
                                  CombineFn&& combine) {
  const std::size_t n = disc.num_unknowns();
  const auto& mesh = disc.mesh();

  std::vector<std::vector<std::pair<Index, double>>> rows(n);
  Vector row(n, 0.0);
  std::vector<char> touched(n, 0);
  std::vector<Index> cols;
  double max_abs = 0.0;

  for (Index r = 0; r < n; ++r) {
    cols.clear();
    for (const ControlFace& face : disc.cv().faces_of(disc.interior_nodes()[r])) {
      const Point2 mid = face.midpoint;
      const FaceCoefficients c = coeffs(mid);

      for (Index k : disc.stab_horizontal(mid.y)) {
        const LineProfile prof = line_restriction(mesh, disc.support_of_unknown(k), Axis::Horizontal, mid.y);
        if (prof.empty()) continue;
        const double left = frac_deriv_at(prof, alpha, mid.x, Side::Left);
        const double right = frac_deriv_at(prof, alpha, mid.x, Side::Right);
        row[k] += combine(c, left, right, Axis::Horizontal) * face.dy;
        if (!touched[k]) {
          touched[k] = 1;
          cols.push_back(k);
        }
      }
      for (Index k : disc.stab_vertical(mid.x)) {
        const LineProfile prof = line_restriction(mesh, disc.support_of_unknown(k), Axis::Vertical, mid.x);
        if (prof.empty()) continue;
        const double left = frac_deriv_at(prof, beta, mid.y, Side::Left);
        const double right = frac_deriv_at(prof, beta, mid.y, Side::Right);
        row[k] -= combine(c, left, right, Axis::Vertical) * face.dx;
        if (!touched[k]) {
          touched[k] = 1;
          cols.push_back(k);
        }
      }
    }
    std::sort(cols.begin(), cols.end());
    auto& out = rows[r];
    out.reserve(cols.size());
    for (Index k : cols) {
      out.emplace_back(k, row[k]);
      max_abs = std::max(max_abs, std::abs(row[k]));
      row[k] = 0.0;
      touched[k] = 0;
    }
  }

  const double drop = 1e-15 * max_abs;
  std::vector<Index> off{0}, col;
  Vector val;
  for (const auto& r : rows) {
    for (const auto& [k, v] : r) {
      if (std::abs(v) < drop || v == 0.0) continue;
      col.push_back(k);
      val.push_back(v);
    }
    off.push_back(col.size());
  }
  return {n, n, std::move(off), std::move(col), std::move(val)};
}

}  // namespace detail

/// Stiffness matrix M over the unknowns at time t:
///   M[i][k] = sum over faces of i of
///     [K1 D^a_x l_k - K2 D^a_{-x} l_k] dy - [K3 D^b_y l_k - K4 D^b_{-y} l_k] dx
/// with every quantity evaluated at the face midpoint. Columns of boundary
/// nodes never appear; entries below 1e-15 of the largest are dropped.
inline CsrMatrix assemble_stiffness(const Discretization& disc, const ProblemSpec& problem, double t) {
  return detail::assemble_stiffness_impl(
      disc, problem.alpha, problem.beta,
      [&](Point2 m) {
        return FaceCoefficients{problem.K1(m.x, m.y, t), problem.K2(m.x, m.y, t), problem.K3(m.x, m.y, t),
                                problem.K4(m.x, m.y, t)};
      },
      [](const FaceCoefficients& c, double left, double right, Axis axis) {
        return axis == Axis::Horizontal ? c.k1 * left - c.k2 * right : c.k3 * left - c.k4 * right;
      });
}

struct TwoSidedCoefficients {
  double k1, k2, k3, k4;
};

/// Constant two-sided coefficients reproducing Kx, Ky times the Riesz
/// derivatives of orders 1+alpha and 1+beta.
inline TwoSidedCoefficients riesz_to_two_sided(double kx, double ky, double alpha, double beta) {
  if (!(kx > 0.0) || !(ky > 0.0)) throw Error("riesz_to_two_sided: Kx and Ky must be positive");
  detail::check_order(alpha);
  detail::check_order(beta);
  const double cx = -kx / (2.0 * std::cos(std::numbers::pi * (1.0 + alpha) / 2.0));
  const double cy = -ky / (2.0 * std::cos(std::numbers::pi * (1.0 + beta) / 2.0));
  return {cx, cx, cy, cy};
}

/// Riesz stiffness with the symmetric constant factored out of the bracket:
///   cx [D^a_x - D^a_{-x}] l_k dy - cy [D^b_y - D^b_{-y}] l_k dx.
inline CsrMatrix assemble_riesz_stiffness(const Discretization& disc, double kx, double ky, double alpha,
                                          double beta) {
  const auto k = riesz_to_two_sided(kx, ky, alpha, beta);
  return detail::assemble_stiffness_impl(
      disc, alpha, beta, [&](Point2) { return FaceCoefficients{k.k1, k.k2, k.k3, k.k4}; },
      [](const FaceCoefficients& c, double left, double right, Axis axis) {
        return (axis == Axis::Horizontal ? c.k1 : c.k3) * (left - right);
      });
}

// ---------------------------------------------------------------------------
// Time stepping
// ---------------------------------------------------------------------------

enum class SolverKind { Bicgstab, Dense };

struct StepOptions {
  SolverKind solver = SolverKind::Bicgstab;
  BicgstabOptions bicgstab;
};

struct StepResult {
  DiscreteState state;
  SolveReport report;
};

inline DiscreteState initial_state(const Discretization& disc, const ProblemSpec& problem) {
  DiscreteState s;
  s.u.resize(disc.num_unknowns());
  for (Index u = 0; u < s.u.size(); ++u) {
    const Point2 p = disc.unknown_point(u);
    s.u[u] = problem.initial(p.x, p.y);
  }
  return s;
}

namespace detail {

inline Vector step_rhs(std::span<const double> mass, std::span<const double> u_prev, std::span<const double> f,
                       double tau) {
  Vector b(mass.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = mass[i] * u_prev[i] + tau * mass[i] * f[i];
  return b;
}

inline StepResult finish_step(const DiscreteState& state, double tau, SolveResult solved) {
  if (!solved.report.converged)
    throw ConvergenceError("bicgstab did not converge in " + std::to_string(solved.report.iterations) +
                               " iterations (relative residual " + std::to_string(solved.report.final_residual) + ")",
                           solved.report.iterations, solved.report.final_residual);
  return {{std::move(solved.x), state.t + tau}, solved.report};
}

}  // namespace detail

/// One backward-Euler step: solves (A - tau M) U^n = A U^{n-1} + tau A F^n
/// with F evaluated at t + tau. Non-convergence throws ConvergenceError.
inline StepResult step(const Discretization& disc, const DiscreteState& state, std::span<const double> mass,
                       const CsrMatrix& stiffness, const ProblemSpec& problem, const StepOptions& opt = {}) {
  const double t_next = state.t + problem.tau;
  const Vector f = assemble_rhs(disc, problem, t_next);
  const Vector b = detail::step_rhs(mass, state.u, f, problem.tau);
  const CsrMatrix a0 = add_scaled_to_diagonal(mass, stiffness, -problem.tau);
  if (opt.solver == SolverKind::Dense) {
    Vector x = dense_solve(a0.to_dense(), b);
    return {{std::move(x), t_next}, {1, 0.0, true}};
  }
  return detail::finish_step(state, problem.tau, bicgstab(a0, b, state.u, opt.bicgstab));
}

/// Runs the backward-Euler march, reusing A - tau M (and its dense LU when
/// requested) unless the coefficients depend on time.
class TimeIntegrator {
 public:
  TimeIntegrator(const Discretization& disc, const ProblemSpec& problem, StepOptions opt = {})
      : disc_(disc), problem_(problem), opt_(opt), mass_(assemble_mass(disc)) {
    validate(problem_);
    state_ = initial_state(disc_, problem_);
    rebuild(0.0);
  }

  const DiscreteState& state() const noexcept { return state_; }
  const Vector& mass() const noexcept { return mass_; }
  const CsrMatrix& stiffness() const noexcept { return stiffness_; }
  const CsrMatrix& system() const noexcept { return system_; }
  std::size_t steps_taken() const noexcept { return steps_; }
  std::size_t total_iterations() const noexcept { return iterations_; }
  double average_iterations() const noexcept {
    return steps_ == 0 ? 0.0 : static_cast<double>(iterations_) / static_cast<double>(steps_);
  }

  void advance() {
    const double t_next = problem_.tau * static_cast<double>(steps_ + 1);
    if (problem_.coefficients_time_dependent) rebuild(t_next);
    const Vector f = assemble_rhs(disc_, problem_, t_next);
    const Vector b = detail::step_rhs(mass_, state_.u, f, problem_.tau);
    StepResult r;
    if (lu_) {
      r = {{lu_->solve(b), t_next}, {1, 0.0, true}};
    } else {
      r = detail::finish_step(state_, problem_.tau, bicgstab(system_, b, state_.u, opt_.bicgstab));
    }
    state_ = std::move(r.state);
    state_.t = t_next;
    iterations_ += r.report.iterations;
    ++steps_;
  }

  /// Advances until t_final (rounded to a whole number of steps).
  void run() {
    const auto n = static_cast<std::size_t>(std::llround(problem_.t_final / problem_.tau));
    while (steps_ < n) advance();
  }

 private:
  void rebuild(double t) {
    stiffness_ = assemble_stiffness(disc_, problem_, t);
    system_ = add_scaled_to_diagonal(mass_, stiffness_, -problem_.tau);
    if (opt_.solver == SolverKind::Dense) lu_.emplace(system_.to_dense());
  }

  const Discretization& disc_;
  ProblemSpec problem_;
  StepOptions opt_;
  Vector mass_;
  CsrMatrix stiffness_, system_;
  std::optional<DenseLU> lu_;
  DiscreteState state_;
  std::size_t steps_ = 0;
  std::size_t iterations_ = 0;
};

}  // namespace fvfrac
