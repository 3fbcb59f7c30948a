#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cellshape {

using Point = Eigen::Vector2d;
using Triangle = std::array<int, 3>;

enum class BoundaryTag : std::uint8_t { Top, Bottom, Side };

const char* to_string(BoundaryTag tag);
BoundaryTag boundary_tag_from_string(const std::string& name);

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  BoundaryTag tag = BoundaryTag::Side;
};

/// Edge between a cell triangle and an outer-material triangle. The vertex
/// order (a, b) follows the counterclockwise traversal of the cell triangle,
/// so the unit normal (b - a) rotated clockwise points out of the cell.
struct InterfaceEdge {
  int a = 0;
  int b = 0;
  int cell_triangle = 0;
  int outer_triangle = 0;
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public MeshError {
 public:
  using MeshError::MeshError;
};

class ElementInversion : public MeshError {
 public:
  ElementInversion(int element, double signed_area);
  int element() const noexcept { return element_; }
  double signed_area() const noexcept { return signed_area_; }

 private:
  int element_;
  double signed_area_;
};

/// Per-vertex 2-vector field stored interleaved: (x0, y0, x1, y1, ...).
struct NodalField {
  Eigen::VectorXd values;

  NodalField() = default;
  explicit NodalField(int num_vertices) : values(Eigen::VectorXd::Zero(2 * num_vertices)) {}
  explicit NodalField(Eigen::VectorXd v) : values(std::move(v)) {}

  int num_vertices() const { return static_cast<int>(values.size() / 2); }
  Point at(int vertex) const { return {values[2 * vertex], values[2 * vertex + 1]}; }
  void set(int vertex, const Point& p) {
    values[2 * vertex] = p.x();
    values[2 * vertex + 1] = p.y();
  }
};

/// Triangulated multi-material domain. Subdomain 0 is the outer material,
/// k > 0 are the cell inclusions. Values are immutable once built; every
/// modifying operation returns a new mesh.
class Mesh {
 public:
  /// Builds the mesh, derives interface edges from connectivity and checks
  /// all invariants. Throws MeshError / ElementInversion on violations.
  static Mesh build(std::vector<Point> vertices, std::vector<Triangle> triangles,
                    std::vector<int> subdomain, std::vector<BoundaryEdge> boundary);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<int>& subdomain() const { return subdomain_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }
  const std::vector<InterfaceEdge>& interface_edges() const { return interface_; }

  const Point& vertex(int i) const { return vertices_[i]; }
  const Triangle& triangle(int t) const { return triangles_[t]; }

  double signed_area(int t) const;
  Point interface_normal(int e) const;
  double interface_length(int e) const;
  int max_subdomain() const;

  /// Area below which an element counts as inverted; fixed when the mesh is
  /// first built and carried through deformations.
  double inversion_threshold() const { return inversion_threshold_; }

  /// Per-vertex flags: bit 0 TOP, bit 1 BOTTOM, bit 2 SIDE.
  std::uint8_t boundary_flags(int vertex) const { return boundary_flags_[vertex]; }
  bool on_boundary(int vertex, BoundaryTag tag) const;

  /// Returns a copy with replaced coordinates and no validity checks. Used
  /// for coarse levels of a deformed hierarchy, which only feed the
  /// preconditioner.
  Mesh with_vertices_unchecked(std::vector<Point> vertices) const;

  /// Throws ElementInversion for the first element at or below the threshold.
  void check_orientation() const;

 private:
  Mesh() = default;
  void derive_topology();
  void check_invariants() const;

  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<int> subdomain_;
  std::vector<BoundaryEdge> boundary_;
  std::vector<InterfaceEdge> interface_;
  std::vector<std::uint8_t> boundary_flags_;
  double inversion_threshold_ = 0.0;
};

/// Fine vertex origin: inherited coarse vertex (a == b) or midpoint of the
/// coarse edge (a, b), interpolated with weights 1/2, 1/2.
struct ParentEntry {
  int a = 0;
  int b = 0;
  bool inherited() const { return a == b; }
};
using ParentMap = std::vector<ParentEntry>;

struct RefinedMesh {
  Mesh mesh;
  ParentMap parents;
};

/// Uniform red refinement. Fine vertices [0, V) are the coarse vertices,
/// followed by one midpoint per coarse edge.
RefinedMesh refine_uniform(const Mesh& mesh);

struct MeshHierarchy {
  std::vector<Mesh> levels;       ///< levels[0] is the coarsest
  std::vector<ParentMap> parents;  ///< parents[l] maps levels[l+1] onto levels[l]

  const Mesh& finest() const { return levels.back(); }
  int num_levels() const { return static_cast<int>(levels.size()); }

  /// Replaces the finest mesh and pushes its coordinates down to every
  /// coarser level (coarse vertex i keeps the position of fine vertex i).
  void replace_finest(Mesh fine);
};

MeshHierarchy build_hierarchy(Mesh coarse, int refinements);

/// Unit square with rows x cols regular octagonal inclusions on a lattice.
/// Cells in lattice row r (counted from the top) get subdomain id r + 1.
Mesh generate_composite_mesh(int rows, int cols, double cell_radius_fraction);
MeshHierarchy generate_composite_domain(int rows, int cols, double cell_radius_fraction,
                                        int refinements);

/// x -> x + t v(x). Throws ElementInversion if any element ends up with
/// area at or below the inversion threshold.
Mesh deform(const Mesh& mesh, const NodalField& v, double t);

struct QualityReport {
  std::vector<double> per_element;  ///< circumradius / inradius
  double max = 0.0;
  double median = 0.0;
};

double circum_in_ratio(const Point& a, const Point& b, const Point& c);
QualityReport mesh_quality(const Mesh& mesh);

/// Smallest element height, i.e. min over triangles of 2A / longest edge.
double min_element_height(const Mesh& mesh);

/// Area of all triangles carrying the given subdomain id.
double subdomain_area(const Mesh& mesh, int subdomain);

}  // namespace cellshape
