#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fvfrac/core.hpp"
#include "fvfrac/mesh.hpp"

// Riemann-Liouville derivatives of the global piecewise-linear basis.
//
// The basis function l_k restricted to a horizontal (or vertical) line is
// piecewise linear with compact support, so every left/right derivative of
// order alpha in (0,1) reduces to closed-form integrals over its linear pieces.

namespace fvfrac {

enum class Axis { Horizontal, Vertical };
enum class Side { Left, Right };

struct BoundingBox {
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
};

/// Triangles incident to a node; the support of its basis function.
struct SupportDomain {
  Index node = 0;
  std::vector<Index> elements;
  BoundingBox bbox;
};

struct LinearPiece {
  double slope = 0.0;
  double intercept = 0.0;
  double operator()(double s) const { return slope * s + intercept; }
};

/// Piecewise-linear restriction of l_k to the line {y = level} (Horizontal)
/// or {x = level} (Vertical). Coordinates along the line are x or y
/// respectively. Piece j spans [breakpoints[j], breakpoints[j+1]]; `values`
/// holds the profile at each breakpoint. Zero outside the breakpoint range.
struct LineProfile {
  Axis axis = Axis::Horizontal;
  double level = 0.0;
  std::vector<double> breakpoints;
  std::vector<double> values;
  std::vector<LinearPiece> pieces;

  bool empty() const noexcept { return pieces.empty(); }

  double operator()(double s) const {
    if (empty() || s < breakpoints.front() || s > breakpoints.back()) return 0.0;
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), s);
    const auto j = std::min<std::size_t>(static_cast<std::size_t>(it - breakpoints.begin()) - 1, pieces.size() - 1);
    return pieces[j](s);
  }
};

// ---------------------------------------------------------------------------
// Supports and the local linear basis
// ---------------------------------------------------------------------------

/// Coefficients of phi = (a x + b y + c) / (2 area) for local vertex j.
struct LocalBasis {
  double a = 0.0, b = 0.0, c = 0.0, twice_area = 1.0;

  double operator()(Point2 p) const { return (a * p.x + b * p.y + c) / twice_area; }
};

inline LocalBasis local_basis(const Mesh& mesh, Index element, Index node) {
  const auto& tri = mesh.triangle(element);
  int j = 0;
  while (j < 3 && tri[j] != node) ++j;
  if (j == 3) throw Error("node " + std::to_string(node) + " is not a vertex of triangle " + std::to_string(element));
  const Point2& p1 = mesh.vertex(tri[(j + 1) % 3]);
  const Point2& p2 = mesh.vertex(tri[(j + 2) % 3]);
  return {p1.y - p2.y, p2.x - p1.x, p1.x * p2.y - p2.x * p1.y,
          cross(mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2]))};
}

inline SupportDomain support_domain(const Mesh& mesh, Index node) {
  if (node >= mesh.num_vertices()) throw Error("support_domain: node out of range");
  SupportDomain s;
  s.node = node;
  const Point2& p = mesh.vertex(node);
  s.bbox = {p.x, p.x, p.y, p.y};
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    if (tri[0] != node && tri[1] != node && tri[2] != node) continue;
    s.elements.push_back(t);
    for (Index v : tri) {
      const Point2& q = mesh.vertex(v);
      s.bbox.xmin = std::min(s.bbox.xmin, q.x);
      s.bbox.xmax = std::max(s.bbox.xmax, q.x);
      s.bbox.ymin = std::min(s.bbox.ymin, q.y);
      s.bbox.ymax = std::max(s.bbox.ymax, q.y);
    }
  }
  return s;
}

/// Supports of every vertex in one pass over the triangles.
inline std::vector<SupportDomain> build_supports(const Mesh& mesh) {
  std::vector<SupportDomain> out(mesh.num_vertices());
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const Point2& p = mesh.vertex(v);
    out[v].node = v;
    out[v].bbox = {p.x, p.x, p.y, p.y};
  }
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    for (Index v : tri) {
      auto& s = out[v];
      s.elements.push_back(t);
      for (Index w : tri) {
        const Point2& q = mesh.vertex(w);
        s.bbox.xmin = std::min(s.bbox.xmin, q.x);
        s.bbox.xmax = std::max(s.bbox.xmax, q.x);
        s.bbox.ymin = std::min(s.bbox.ymin, q.y);
        s.bbox.ymax = std::max(s.bbox.ymax, q.y);
      }
    }
  }
  return out;
}

/// l_k at an arbitrary point: phi_k of the first incident triangle containing
/// the point, otherwise 0.
inline double evaluate_basis(const Mesh& mesh, const SupportDomain& support, Point2 p) {
  for (Index t : support.elements) {
    const auto& tri = mesh.triangle(t);
    const Point2 &a = mesh.vertex(tri[0]), &b = mesh.vertex(tri[1]), &c = mesh.vertex(tri[2]);
    const double twice = cross(a, b, c);
    const double eps = -1e-14 * twice;
    if (cross(a, b, p) >= eps && cross(b, c, p) >= eps && cross(c, a, p) >= eps)
      return local_basis(mesh, t, support.node)(p);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Line restriction
// ---------------------------------------------------------------------------

/// Clips the line against every triangle of the support and merges the
/// per-triangle linear pieces into one sorted, continuous profile. Gaps
/// between disjoint clipped segments become zero pieces. Clipped segments
/// shorter than 1e-12 of the support extent are discarded.
inline LineProfile line_restriction(const Mesh& mesh, const SupportDomain& support, Axis axis, double level) {
  LineProfile profile;
  profile.axis = axis;
  profile.level = level;

  const auto& bb = support.bbox;
  const bool horizontal = axis == Axis::Horizontal;
  const double lo = horizontal ? bb.ymin : bb.xmin;
  const double hi = horizontal ? bb.ymax : bb.xmax;
  if (!(level >= lo && level <= hi)) return profile;
  const double tol = 1e-12 * std::max(bb.xmax - bb.xmin, bb.ymax - bb.ymin);

  struct Segment {
    double s0, s1;
    LinearPiece piece;
  };
  std::vector<Segment> segments;

  for (Index t : support.elements) {
    const auto& tri = mesh.triangle(t);
    double smin = 0.0, smax = 0.0;
    int hits = 0;
    auto add = [&](double s) {
      if (hits++ == 0) {
        smin = smax = s;
      } else {
        smin = std::min(smin, s);
        smax = std::max(smax, s);
      }
    };
    for (int e = 0; e < 3; ++e) {
      // Canonical endpoint order so a shared edge yields bit-identical crossings.
      Index i = tri[e], j = tri[(e + 1) % 3];
      if (i > j) std::swap(i, j);
      const Point2& pi = mesh.vertex(i);
      const Point2& pj = mesh.vertex(j);
      const double si = horizontal ? pi.x : pi.y, sj = horizontal ? pj.x : pj.y;
      const double di = (horizontal ? pi.y : pi.x) - level;
      const double dj = (horizontal ? pj.y : pj.x) - level;
      if (di == 0.0) add(si);
      if (dj == 0.0) add(sj);
      if ((di < 0.0 && dj > 0.0) || (di > 0.0 && dj < 0.0)) add(si + (sj - si) * (di / (di - dj)));
    }
    if (hits < 2 || smax - smin <= tol) continue;

    const LocalBasis phi = local_basis(mesh, t, support.node);
    LinearPiece piece;
    if (horizontal) {
      piece = {phi.a / phi.twice_area, (phi.b * level + phi.c) / phi.twice_area};
    } else {
      piece = {phi.b / phi.twice_area, (phi.a * level + phi.c) / phi.twice_area};
    }
    segments.push_back({smin, smax, piece});
  }
  if (segments.empty()) return profile;

  std::sort(segments.begin(), segments.end(),
            [](const Segment& l, const Segment& r) { return l.s0 < r.s0 || (l.s0 == r.s0 && l.s1 < r.s1); });

  auto& bp = profile.breakpoints;
  auto& pieces = profile.pieces;
  bp.push_back(segments.front().s0);
  for (const auto& seg : segments) {
    const double end = bp.back();
    if (!pieces.empty()) {
      // Segments along a shared edge appear twice; l_k is continuous so either copy is exact.
      if (seg.s1 <= end + tol) continue;
      if (seg.s0 > end + tol) {
        pieces.push_back({0.0, 0.0});
        bp.push_back(seg.s0);
      }
    }
    pieces.push_back(seg.piece);
    bp.push_back(seg.s1);
  }

  auto& w = profile.values;
  w.resize(bp.size());
  w.front() = pieces.front()(bp.front());
  w.back() = pieces.back()(bp.back());
  for (std::size_t j = 1; j + 1 < bp.size(); ++j) w[j] = 0.5 * (pieces[j - 1](bp[j]) + pieces[j](bp[j]));
  return profile;
}

// ---------------------------------------------------------------------------
// Closed-form kernels
// ---------------------------------------------------------------------------

namespace detail {

inline void check_order(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("fractional order must lie in (0, 1)");
}

}  // namespace detail

/// (1/Gamma(1-alpha)) d/dx of the integral of (x-s)^(-alpha) (p s + q) over
/// [s0, s1], for s0 < s1 <= x. When s1 == x the upper limit moves with x.
///
/// With u = x - s and v(s) = p s + q the derivative is
///   p (u0^(1-a) - u1^(1-a)) / (1-a) + v(s0) u0^(-a) - v(s1) u1^(-a),
/// where the last term is absent for the moving upper limit.
inline double rl_segment_kernel_left(double p, double q, double s0, double s1, double x, double alpha) {
  detail::check_order(alpha);
  if (!(s0 < s1)) throw Error("rl_segment_kernel_left: requires s0 < s1");
  if (s1 > x) throw Error("rl_segment_kernel_left: segment extends right of the evaluation point");
  const double u0 = x - s0, u1 = x - s1;
  double val = p * (std::pow(u0, 1.0 - alpha) - std::pow(u1, 1.0 - alpha)) / (1.0 - alpha) +
               (p * s0 + q) * std::pow(u0, -alpha);
  if (u1 > 0.0) val -= (p * s1 + q) * std::pow(u1, -alpha);
  return val / std::tgamma(1.0 - alpha);
}

/// (-1/Gamma(1-alpha)) d/dx of the integral of (s-x)^(-alpha) (p s + q) over
/// [s0, s1], for x <= s0 < s1. Obtained from the left kernel under s -> -s.
inline double rl_segment_kernel_right(double p, double q, double s0, double s1, double x, double alpha) {
  detail::check_order(alpha);
  if (!(s0 < s1)) throw Error("rl_segment_kernel_right: requires s0 < s1");
  if (s0 < x) throw Error("rl_segment_kernel_right: segment extends left of the evaluation point");
  return rl_segment_kernel_left(-p, q, -s1, -s0, -x, alpha);
}

/// Left or right RL derivative of order alpha of a line profile at `point`.
///
/// Equivalent to summing the segment kernels over the pieces on the relevant
/// side of `point` (with a partial piece if `point` falls inside one). For a
/// continuous profile the singular v(s) u^(-alpha) terms of neighbouring
/// pieces cancel at shared breakpoints, so only the slope terms and the two
/// outermost endpoint terms are evaluated.
inline double frac_deriv_at(const LineProfile& profile, double alpha, double point, Side side) {
  detail::check_order(alpha);
  if (profile.empty()) return 0.0;
  const auto& b = profile.breakpoints;
  const auto& w = profile.values;
  const std::size_t n = profile.pieces.size();
  const double x = point;
  const double e1 = 1.0 - alpha;
  double sum = 0.0;

  if (side == Side::Left) {
    if (x <= b[0]) return 0.0;
    for (std::size_t j = 0; j < n && b[j] < x; ++j) {
      const double end = std::min(b[j + 1], x);
      sum += profile.pieces[j].slope * (std::pow(x - b[j], e1) - std::pow(x - end, e1));
    }
    sum /= e1;
    sum += w[0] * std::pow(x - b[0], -alpha);
    if (b[n] < x) sum -= w[n] * std::pow(x - b[n], -alpha);
  } else {
    if (x >= b[n]) return 0.0;
    for (std::size_t j = n; j-- > 0 && b[j + 1] > x;) {
      const double start = std::max(b[j], x);
      sum -= profile.pieces[j].slope * (std::pow(b[j + 1] - x, e1) - std::pow(start - x, e1));
    }
    sum /= e1;
    sum += w[n] * std::pow(b[n] - x, -alpha);
    if (b[0] > x) sum -= w[0] * std::pow(b[0] - x, -alpha);
  }
  return sum / std::tgamma(1.0 - alpha);
}

}  // namespace fvfrac
