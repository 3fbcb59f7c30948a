#pragma once

#include <cmath>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "cellshape/fem.hpp"
#include "cellshape/mesh.hpp"

namespace cellshape::testing {

inline Mesh unit_triangle() {
  return Mesh::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {0},
                     {{0, 1, BoundaryTag::Bottom}, {1, 2, BoundaryTag::Side},
                      {2, 0, BoundaryTag::Side}});
}

inline Mesh equilateral_triangle() {
  return Mesh::build({{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2}}, {{0, 1, 2}}, {0},
                     {{0, 1, BoundaryTag::Bottom}, {1, 2, BoundaryTag::Side},
                      {2, 0, BoundaryTag::Side}});
}

inline std::vector<BoundaryEdge> unit_square_boundary() {
  return {{0, 1, BoundaryTag::Bottom},
          {1, 2, BoundaryTag::Side},
          {2, 3, BoundaryTag::Top},
          {3, 0, BoundaryTag::Side}};
}

inline Mesh two_triangle_square() {
  return Mesh::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}}, {0, 0},
                     unit_square_boundary());
}

/// Unit square with a centred square inclusion of side 0.5 (subdomain 1).
inline Mesh square_with_square_inclusion() {
  std::vector<Point> v{{0, 0},       {1, 0},       {1, 1},       {0, 1},
                       {0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}};
  std::vector<Triangle> t{{0, 1, 5}, {0, 5, 4}, {1, 2, 6}, {1, 6, 5}, {2, 3, 7},
                          {2, 7, 6}, {3, 0, 4}, {3, 4, 7}, {4, 5, 6}, {4, 6, 7}};
  std::vector<int> s{0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
  return Mesh::build(std::move(v), std::move(t), std::move(s), unit_square_boundary());
}

inline int count_edges(const Mesh& mesh) {
  std::set<std::pair<int, int>> edges;
  for (const auto& tri : mesh.triangles())
    for (int i = 0; i < 3; ++i) {
      int a = tri[i], b = tri[(i + 1) % 3];
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  return static_cast<int>(edges.size());
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed, double lo = -1.0,
                                     double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = dist(rng);
  return out;
}

/// Field that is zero on every outer-boundary vertex.
inline NodalField interior_only(const Mesh& mesh, NodalField v) {
  for (int i = 0; i < mesh.num_vertices(); ++i)
    if (mesh.boundary_flags(i) != 0) v.set(i, Point::Zero());
  return v;
}

inline bool in_cell(const Mesh& mesh, int vertex) {
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.subdomain()[t] == 0) continue;
    for (int k : mesh.triangle(t))
      if (k == vertex) return true;
  }
  return false;
}

}  // namespace cellshape::testing
