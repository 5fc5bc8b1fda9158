#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fvfrac/core.hpp"
#include "fvfrac/mesh.hpp"

namespace fvfrac {

/// One straight piece of a control-volume boundary. The segment runs from
/// `start` to `start + (dx, dy)`, traversed anticlockwise around `owner_node`.
struct ControlFace {
  Index owner_node = 0;
  Index element = 0;
  Point2 start;
  Point2 midpoint;
  double dx = 0.0;
  double dy = 0.0;
};

/// Sub-control volume: the quadrilateral (P, S_a, Q, S_b) of a triangle
/// around one of its vertices.
struct SubControlVolume {
  Index element = 0;
  double area = 0.0;
};

/// Barycentric dual of a triangulation.
///
/// Every triangle contributes one sub-control volume and two faces to each
/// of its three vertices. Faces for node i are stored contiguously in
/// `faces[face_offsets[i] .. face_offsets[i+1])`; sub-volumes likewise with
/// `sub_offsets`.
struct CvGeometry {
  Vector cv_area;
  std::vector<Index> sub_offsets;
  std::vector<SubControlVolume> sub_cv;
  std::vector<Index> face_offsets;
  std::vector<ControlFace> faces;

  std::size_t m(Index node) const { return sub_offsets[node + 1] - sub_offsets[node]; }

  std::span<const ControlFace> faces_of(Index node) const {
    return {faces.data() + face_offsets[node], face_offsets[node + 1] - face_offsets[node]};
  }
  std::span<const SubControlVolume> sub_cv_of(Index node) const {
    return {sub_cv.data() + sub_offsets[node], sub_offsets[node + 1] - sub_offsets[node]};
  }
};

inline double polygon_area(std::span<const Point2> poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

inline CvGeometry build_control_volumes(const Mesh& mesh) {
  const std::size_t nv = mesh.num_vertices();
  const double scale = mesh.extent();

  struct LocalPiece {
    Index node;
    SubControlVolume sub;
    ControlFace in, out;
  };
  std::vector<LocalPiece> pieces;
  pieces.reserve(3 * mesh.num_triangles());
  std::vector<std::size_t> count(nv, 0);

  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const std::array<Point2, 3> p{mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2])};
    if (std::abs(cross(p[0], p[1], p[2])) <= 2e-14 * scale * scale)
      throw InvariantError("control volume construction: triangle " + std::to_string(t) + " is degenerate");

    const Point2 q = (1.0 / 3.0) * (p[0] + p[1] + p[2]);
    for (int j = 0; j < 3; ++j) {
      const Point2& self = p[j];
      const Point2 s_next = 0.5 * (self + p[(j + 1) % 3]);
      const Point2 s_prev = 0.5 * (self + p[(j + 2) % 3]);
      const Index node = tri[j];

      LocalPiece piece;
      piece.node = node;
      const std::array<Point2, 4> quad{self, s_next, q, s_prev};
      piece.sub = {t, polygon_area(quad)};
      // Anticlockwise around `self`: S_next -> Q -> S_prev.
      piece.in = {node, t, s_next, 0.5 * (s_next + q), q.x - s_next.x, q.y - s_next.y};
      piece.out = {node, t, q, 0.5 * (q + s_prev), s_prev.x - q.x, s_prev.y - q.y};
      pieces.push_back(piece);
      ++count[node];
    }
  }

  CvGeometry cv;
  cv.cv_area.assign(nv, 0.0);
  cv.sub_offsets.assign(nv + 1, 0);
  cv.face_offsets.assign(nv + 1, 0);
  for (Index v = 0; v < nv; ++v) {
    cv.sub_offsets[v + 1] = cv.sub_offsets[v] + count[v];
    cv.face_offsets[v + 1] = cv.face_offsets[v] + 2 * count[v];
  }
  cv.sub_cv.resize(cv.sub_offsets[nv]);
  cv.faces.resize(cv.face_offsets[nv]);

  std::vector<std::size_t> fill(nv, 0);
  for (const auto& piece : pieces) {
    const Index v = piece.node;
    const std::size_t k = fill[v]++;
    cv.sub_cv[cv.sub_offsets[v] + k] = piece.sub;
    cv.faces[cv.face_offsets[v] + 2 * k] = piece.in;
    cv.faces[cv.face_offsets[v] + 2 * k + 1] = piece.out;
    cv.cv_area[v] += piece.sub.area;
  }
  return cv;
}

}  // namespace fvfrac
