#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fvfrac/fvfrac.hpp"

namespace fvfrac::fixtures {

inline Rectangle unit_square() { return {0.0, 1.0, 0.0, 1.0}; }
inline Disk unit_disk() { return {0.0, 0.0, 1.0}; }

/// A spread of generator outputs, small enough for exhaustive checks.
inline std::vector<std::pair<std::string, Mesh>> generated_meshes() {
  std::vector<std::pair<std::string, Mesh>> out;
  for (std::size_t n : {1, 2, 3, 5, 10, 19})
    out.emplace_back("rect" + std::to_string(n), generate_rect_mesh(n, n, unit_square()));
  out.emplace_back("rect-skew", generate_rect_mesh(7, 3, Rectangle{-1.0, 2.0, 0.5, 1.25}));
  for (double h : {0.6, 0.3, 0.15, 0.1})
    out.emplace_back("disk" + std::to_string(h), generate_disk_mesh(h, unit_disk()));
  out.emplace_back("disk-offset", generate_disk_mesh(0.5, Disk{2.0, -1.0, 1.5}));
  return out;
}

}  // namespace fvfrac::fixtures
