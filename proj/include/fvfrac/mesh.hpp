#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fvfrac/core.hpp"

namespace fvfrac {

// ---------------------------------------------------------------------------
// Domain descriptors
// ---------------------------------------------------------------------------

struct Rectangle {
  double a = 0.0, b = 1.0;  // x-range
  double c = 0.0, d = 1.0;  // y-range
};

struct Disk {
  double cx = 0.0, cy = 0.0;
  double radius = 1.0;
};

/// Marker for a domain known only through a loaded mesh file.
struct MeshFileOnly {};

using DomainDescriptor = std::variant<Rectangle, Disk, MeshFileOnly>;

inline void validate_domain(const DomainDescriptor& domain) {
  if (const auto* r = std::get_if<Rectangle>(&domain)) {
    if (!(r->a < r->b) || !(r->c < r->d)) throw Error("rectangle requires a < b and c < d");
  } else if (const auto* k = std::get_if<Disk>(&domain)) {
    if (!(k->radius > 0.0)) throw Error("disk radius must be positive");
  }
}

// ---------------------------------------------------------------------------
// Mesh
// ---------------------------------------------------------------------------

enum class NodeClass { Interior, Boundary };

using Triangle = std::array<Index, 3>;

/// Conforming triangulation with counter-clockwise triangles.
///
/// Boundary nodes are derived from edge adjacency: an edge used by exactly one
/// triangle lies on the domain boundary, and so do its endpoints. Instances are
/// immutable once constructed.
class Mesh {
 public:
  Mesh() = default;

  /// Validates the raw connectivity, repairs clockwise triangles by swapping
  /// their last two indices, and classifies nodes. Throws InvariantError.
  Mesh(std::vector<Point2> vertices, std::vector<Triangle> triangles)
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    validate_and_classify();
  }

  const std::vector<Point2>& vertices() const noexcept { return vertices_; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  const std::vector<NodeClass>& node_class() const noexcept { return node_class_; }

  std::size_t num_vertices() const noexcept { return vertices_.size(); }
  std::size_t num_triangles() const noexcept { return triangles_.size(); }
  std::size_t num_interior() const noexcept { return num_interior_; }

  const Point2& vertex(Index v) const { return vertices_[v]; }
  const Triangle& triangle(Index t) const { return triangles_[t]; }
  bool is_boundary(Index v) const { return node_class_[v] == NodeClass::Boundary; }

  double triangle_area(Index t) const {
    const auto& tri = triangles_[t];
    return 0.5 * cross(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
  }

  double area() const {
    double s = 0.0;
    for (Index t = 0; t < triangles_.size(); ++t) s += triangle_area(t);
    return s;
  }

  /// Length of the longest side of the vertex bounding box.
  double extent() const {
    if (vertices_.empty()) return 0.0;
    double xmin = vertices_[0].x, xmax = xmin, ymin = vertices_[0].y, ymax = ymin;
    for (const auto& p : vertices_) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    return std::max(xmax - xmin, ymax - ymin);
  }

 private:
  void validate_and_classify();

  std::vector<Point2> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<NodeClass> node_class_;
  std::size_t num_interior_ = 0;
};

inline void Mesh::validate_and_classify() {
  const std::size_t nv = vertices_.size();
  for (Index v = 0; v < nv; ++v) {
    if (!std::isfinite(vertices_[v].x) || !std::isfinite(vertices_[v].y))
      throw InvariantError("vertex " + std::to_string(v) + " has non-finite coordinates");
  }

  const double scale = extent();
  std::vector<bool> referenced(nv, false);
  for (Index t = 0; t < triangles_.size(); ++t) {
    auto& tri = triangles_[t];
    for (Index v : tri) {
      if (v >= nv)
        throw InvariantError("triangle " + std::to_string(t) + " references vertex " +
                             std::to_string(v) + " out of range [0, " + std::to_string(nv) + ")");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw InvariantError("triangle " + std::to_string(t) + " repeats a vertex index");
    const double twice_area = cross(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
    if (std::abs(twice_area) <= 2e-14 * scale * scale)
      throw InvariantError("triangle " + std::to_string(t) + " is degenerate");
    if (twice_area < 0.0) std::swap(tri[1], tri[2]);
    for (Index v : tri) referenced[v] = true;
  }
  for (Index v = 0; v < nv; ++v) {
    if (!referenced[v])
      throw InvariantError("vertex " + std::to_string(v) + " is not used by any triangle");
  }

  // Directed edge counts. In a conforming CCW mesh an interior edge appears
  // once in each direction; a boundary edge appears once in total.
  std::map<std::pair<Index, Index>, std::array<int, 2>> edges;
  for (Index t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (int e = 0; e < 3; ++e) {
      const Index a = tri[e], b = tri[(e + 1) % 3];
      auto& slot = edges[{std::min(a, b), std::max(a, b)}];
      ++slot[a < b ? 0 : 1];
    }
  }

  node_class_.assign(nv, NodeClass::Interior);
  for (const auto& [key, count] : edges) {
    const auto edge_name = "edge (" + std::to_string(key.first) + ", " + std::to_string(key.second) + ")";
    if (count[0] > 1 || count[1] > 1)
      throw InvariantError(edge_name + " is traversed twice in the same direction (overlapping triangles)");
    if (count[0] + count[1] == 1) {
      node_class_[key.first] = NodeClass::Boundary;
      node_class_[key.second] = NodeClass::Boundary;
    }
  }
  num_interior_ = static_cast<std::size_t>(
      std::count(node_class_.begin(), node_class_.end(), NodeClass::Interior));
}

/// Maximum triangle edge length.
inline double mesh_h(const Mesh& mesh) {
  double h = 0.0;
  for (const auto& tri : mesh.triangles()) {
    for (int e = 0; e < 3; ++e) {
      const Point2 d = mesh.vertex(tri[(e + 1) % 3]) - mesh.vertex(tri[e]);
      h = std::max(h, std::hypot(d.x, d.y));
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Structured (nx+1) x (ny+1) grid, each cell cut along its lower-left to
/// upper-right diagonal.
inline Mesh generate_rect_mesh(std::size_t nx, std::size_t ny, const DomainDescriptor& domain) {
  const auto* rect = std::get_if<Rectangle>(&domain);
  if (rect == nullptr) throw Error("generate_rect_mesh requires a Rectangle domain");
  validate_domain(domain);
  if (nx < 1 || ny < 1) throw Error("generate_rect_mesh requires nx, ny >= 1");

  std::vector<Point2> vertices;
  vertices.reserve((nx + 1) * (ny + 1));
  for (std::size_t j = 0; j <= ny; ++j) {
    // Endpoints are pinned so boundary coordinates are exact.
    const double y = j == ny ? rect->d : rect->c + (rect->d - rect->c) * static_cast<double>(j) / ny;
    for (std::size_t i = 0; i <= nx; ++i) {
      const double x = i == nx ? rect->b : rect->a + (rect->b - rect->a) * static_cast<double>(i) / nx;
      vertices.push_back({x, y});
    }
  }

  auto id = [nx](std::size_t i, std::size_t j) { return j * (nx + 1) + i; };
  std::vector<Triangle> triangles;
  triangles.reserve(2 * nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const Index v00 = id(i, j), v10 = id(i + 1, j), v11 = id(i + 1, j + 1), v01 = id(i, j + 1);
      triangles.push_back({v00, v10, v11});
      triangles.push_back({v00, v11, v01});
    }
  }
  return Mesh(std::move(vertices), std::move(triangles));
}

namespace detail {

// Concentric rings at radii k*R/K; ring k >= 1 carries 6k equally spaced nodes
// starting at angle 0. Neighbouring rings are stitched by an angular merge.
inline Mesh disk_rings(std::size_t rings, const Disk& disk) {
  std::vector<Point2> vertices{{disk.cx, disk.cy}};
  std::vector<Index> ring_start{0};
  for (std::size_t k = 1; k <= rings; ++k) {
    ring_start.push_back(vertices.size());
    const std::size_t n = 6 * k;
    const double r = k == rings ? disk.radius : disk.radius * static_cast<double>(k) / rings;
    for (std::size_t j = 0; j < n; ++j) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(j) / n;
      vertices.push_back({disk.cx + r * std::cos(theta), disk.cy + r * std::sin(theta)});
    }
  }

  std::vector<Triangle> triangles;
  for (std::size_t j = 0; j < 6; ++j) triangles.push_back({0, ring_start[1] + j, ring_start[1] + (j + 1) % 6});

  for (std::size_t k = 1; k < rings; ++k) {
    const std::size_t na = 6 * k, nb = 6 * (k + 1);
    const Index a0 = ring_start[k], b0 = ring_start[k + 1];
    std::size_t i = 0, j = 0;
    while (i < na || j < nb) {
      // Compare angles (i+1)/na and (j+1)/nb exactly in integers.
      const bool advance_inner = j == nb || (i < na && (i + 1) * nb < (j + 1) * na);
      if (advance_inner) {
        triangles.push_back({a0 + i % na, b0 + j % nb, a0 + (i + 1) % na});
        ++i;
      } else {
        triangles.push_back({a0 + i % na, b0 + j % nb, b0 + (j + 1) % nb});
        ++j;
      }
    }
  }
  return Mesh(std::move(vertices), std::move(triangles));
}

}  // namespace detail

/// Deterministic disk triangulation with mesh_h <= 1.25 * target_h.
/// Boundary vertices lie on the circle.
inline Mesh generate_disk_mesh(double target_h, const DomainDescriptor& domain) {
  const auto* disk = std::get_if<Disk>(&domain);
  if (disk == nullptr) throw Error("generate_disk_mesh requires a Disk domain");
  validate_domain(domain);
  if (!(target_h > 0.0) || !(target_h < disk->radius))
    throw Error("generate_disk_mesh requires 0 < target_h < radius");

  auto rings = static_cast<std::size_t>(std::ceil(disk->radius / target_h));
  if (rings < 1) throw Error("target_h produces no rings");
  for (;;) {
    Mesh mesh = detail::disk_rings(rings, *disk);
    if (mesh_h(mesh) <= 1.25 * target_h) return mesh;
    ++rings;
  }
}

// ---------------------------------------------------------------------------
// Text I/O
// ---------------------------------------------------------------------------

inline void save_mesh(const Mesh& mesh, std::ostream& os) {
  os << "nodes " << mesh.num_vertices() << '\n' << std::setprecision(17);
  for (const auto& p : mesh.vertices()) os << p.x << ' ' << p.y << '\n';
  os << "triangles " << mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles()) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  save_mesh(mesh, os);
  if (!os) throw Error("failed writing '" + path + "'");
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  /// Next non-empty line with comments stripped; false at end of input.
  bool next(std::string& out) {
    std::string raw;
    while (std::getline(is_, raw)) {
      ++line_;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      if (raw.find_first_not_of(" \t\r") != std::string::npos) {
        out = std::move(raw);
        return true;
      }
    }
    return false;
  }

  std::string require(const char* what) {
    std::string s;
    if (!next(s)) throw ParseError(line_ + 1, std::string("unexpected end of file, expected ") + what);
    return s;
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& is_;
  std::size_t line_ = 0;
};

template <typename... Ts>
void parse_fields(const std::string& text, std::size_t line, const char* what, Ts&... fields) {
  std::istringstream ss(text);
  ((ss >> fields), ...);
  if (ss.fail()) throw ParseError(line, std::string("malformed ") + what + ": '" + text + "'");
  std::string extra;
  if (ss >> extra) throw ParseError(line, std::string("trailing text in ") + what + ": '" + extra + "'");
}

inline std::size_t parse_header(LineReader& in, const char* keyword) {
  const std::string text = in.require(keyword);
  std::string key;
  long long count = -1;
  parse_fields(text, in.line(), "section header", key, count);
  if (key != keyword || count < 0)
    throw ParseError(in.line(), std::string("expected '") + keyword + " <count>', got '" + text + "'");
  return static_cast<std::size_t>(count);
}

}  // namespace detail

/// Parses the `nodes` / `triangles` text format. Node classes are recomputed
/// from connectivity.
inline Mesh load_mesh(std::istream& is) {
  detail::LineReader in(is);

  const std::size_t nv = detail::parse_header(in, "nodes");
  std::vector<Point2> vertices(nv);
  for (auto& p : vertices) {
    const std::string text = in.require("vertex");
    detail::parse_fields(text, in.line(), "vertex", p.x, p.y);
  }

  const std::size_t nt = detail::parse_header(in, "triangles");
  std::vector<Triangle> triangles(nt);
  for (auto& t : triangles) {
    long long i0 = 0, i1 = 0, i2 = 0;
    const std::string text = in.require("triangle");
    detail::parse_fields(text, in.line(), "triangle", i0, i1, i2);
    if (i0 < 0 || i1 < 0 || i2 < 0) throw ParseError(in.line(), "negative vertex index");
    t = {static_cast<Index>(i0), static_cast<Index>(i1), static_cast<Index>(i2)};
  }

  std::string extra;
  if (in.next(extra)) throw ParseError(in.line(), "unexpected content after triangle list");
  return Mesh(std::move(vertices), std::move(triangles));
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open mesh file '" + path + "'");
  return load_mesh(is);
}

}  // namespace fvfrac
