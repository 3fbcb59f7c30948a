#include "cellshape/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace cellshape {

namespace {

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

double signed_area_of(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::uint8_t tag_bit(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Top: return 1;
    case BoundaryTag::Bottom: return 2;
    case BoundaryTag::Side: return 4;
  }
  return 0;
}

struct EdgeUse {
  int first = -1;
  int second = -1;
  int count = 0;
};

}  // namespace

const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Top: return "TOP";
    case BoundaryTag::Bottom: return "BOTTOM";
    case BoundaryTag::Side: return "SIDE";
  }
  return "?";
}

BoundaryTag boundary_tag_from_string(const std::string& name) {
  if (name == "TOP") return BoundaryTag::Top;
  if (name == "BOTTOM") return BoundaryTag::Bottom;
  if (name == "SIDE") return BoundaryTag::Side;
  throw MeshError("unknown boundary tag '" + name + "'");
}

ElementInversion::ElementInversion(int element, double signed_area)
    : MeshError([&] {
        std::ostringstream os;
        os << "element " << element << " inverted (signed area " << signed_area << ")";
        return os.str();
      }()),
      element_(element),
      signed_area_(signed_area) {}

Mesh Mesh::build(std::vector<Point> vertices, std::vector<Triangle> triangles,
                 std::vector<int> subdomain, std::vector<BoundaryEdge> boundary) {
  if (triangles.size() != subdomain.size())
    throw MeshError("subdomain list length does not match triangle count");
  if (triangles.empty()) throw MeshError("mesh has no triangles");

  Mesh mesh;
  mesh.vertices_ = std::move(vertices);
  mesh.triangles_ = std::move(triangles);
  mesh.subdomain_ = std::move(subdomain);
  mesh.boundary_ = std::move(boundary);

  const int nv = mesh.num_vertices();
  for (const auto& tri : mesh.triangles_)
    for (int v : tri)
      if (v < 0 || v >= nv) throw MeshError("triangle references a missing vertex");
  for (int s : mesh.subdomain_)
    if (s < 0) throw MeshError("negative subdomain id");

  std::vector<double> areas(mesh.triangles_.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) areas[t] = std::abs(mesh.signed_area(t));
  mesh.inversion_threshold_ = 1e-14 * median_of(std::move(areas));

  mesh.derive_topology();
  mesh.check_invariants();
  return mesh;
}

void Mesh::derive_topology() {
  std::unordered_map<std::uint64_t, EdgeUse> edges;
  edges.reserve(triangles_.size() * 2);
  for (int t = 0; t < num_triangles(); ++t) {
    for (int i = 0; i < 3; ++i) {
      auto& use = edges[edge_key(triangles_[t][i], triangles_[t][(i + 1) % 3])];
      if (use.count == 0)
        use.first = t;
      else
        use.second = t;
      ++use.count;
    }
  }

  interface_.clear();
  for (int t = 0; t < num_triangles(); ++t) {
    if (subdomain_[t] == 0) continue;
    for (int i = 0; i < 3; ++i) {
      const int a = triangles_[t][i];
      const int b = triangles_[t][(i + 1) % 3];
      const auto& use = edges.at(edge_key(a, b));
      if (use.count != 2) continue;
      const int other = use.first == t ? use.second : use.first;
      if (subdomain_[other] == 0) interface_.push_back({a, b, t, other});
    }
  }

  boundary_flags_.assign(vertices_.size(), 0);
  for (const auto& e : boundary_) {
    if (e.a < 0 || e.b < 0 || e.a >= num_vertices() || e.b >= num_vertices())
      throw MeshError("boundary edge references a missing vertex");
    boundary_flags_[e.a] |= tag_bit(e.tag);
    boundary_flags_[e.b] |= tag_bit(e.tag);
  }

  // Boundary records must be exactly the edges with a single incident triangle.
  std::size_t topological_boundary = 0;
  for (const auto& [key, use] : edges) {
    if (use.count > 2) throw MeshError("non-manifold edge");
    if (use.count == 1) ++topological_boundary;
    if (use.count == 2) {
      const int s1 = subdomain_[use.first];
      const int s2 = subdomain_[use.second];
      if (s1 != 0 && s2 != 0 && s1 != s2)
        throw GeometryError("two different cell subdomains share an edge");
    }
  }
  if (topological_boundary != boundary_.size())
    throw MeshError("boundary edge records do not match the topological boundary");
  for (const auto& e : boundary_) {
    auto it = edges.find(edge_key(e.a, e.b));
    if (it == edges.end() || it->second.count != 1)
      throw MeshError("boundary record is not a boundary edge");
  }
}

void Mesh::check_invariants() const { check_orientation(); }

void Mesh::check_orientation() const {
  for (int t = 0; t < num_triangles(); ++t) {
    const double a = signed_area(t);
    if (!(a > inversion_threshold_)) throw ElementInversion(t, a);
  }
}

double Mesh::signed_area(int t) const {
  const auto& tri = triangles_[t];
  return signed_area_of(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
}

Point Mesh::interface_normal(int e) const {
  const auto& edge = interface_[e];
  const Point d = vertices_[edge.b] - vertices_[edge.a];
  return Point(d.y(), -d.x()).normalized();
}

double Mesh::interface_length(int e) const {
  const auto& edge = interface_[e];
  return (vertices_[edge.b] - vertices_[edge.a]).norm();
}

int Mesh::max_subdomain() const { return *std::max_element(subdomain_.begin(), subdomain_.end()); }

bool Mesh::on_boundary(int vertex, BoundaryTag tag) const {
  return (boundary_flags_[vertex] & tag_bit(tag)) != 0;
}

Mesh Mesh::with_vertices_unchecked(std::vector<Point> vertices) const {
  if (vertices.size() != vertices_.size()) throw MeshError("vertex count mismatch");
  Mesh copy = *this;
  copy.vertices_ = std::move(vertices);
  return copy;
}

RefinedMesh refine_uniform(const Mesh& mesh) {
  const int nv = mesh.num_vertices();
  std::unordered_map<std::uint64_t, int> midpoint;
  midpoint.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 2);

  std::vector<Point> vertices = mesh.vertices();
  ParentMap parents(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) parents[i] = {i, i};

  auto mid = [&](int a, int b) {
    auto [it, inserted] = midpoint.try_emplace(edge_key(a, b), static_cast<int>(vertices.size()));
    if (inserted) {
      vertices.push_back(0.5 * (mesh.vertex(a) + mesh.vertex(b)));
      parents.push_back({std::min(a, b), std::max(a, b)});
    }
    return it->second;
  };

  std::vector<Triangle> triangles;
  std::vector<int> subdomain;
  triangles.reserve(4 * static_cast<std::size_t>(mesh.num_triangles()));
  subdomain.reserve(triangles.capacity());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto [v0, v1, v2] = mesh.triangle(t);
    const int m01 = mid(v0, v1);
    const int m12 = mid(v1, v2);
    const int m20 = mid(v2, v0);
    for (const Triangle& child : {Triangle{v0, m01, m20}, Triangle{m01, v1, m12},
                                  Triangle{m20, m12, v2}, Triangle{m01, m12, m20}}) {
      triangles.push_back(child);
      subdomain.push_back(mesh.subdomain()[t]);
    }
  }

  std::vector<BoundaryEdge> boundary;
  boundary.reserve(2 * mesh.boundary_edges().size());
  for (const auto& e : mesh.boundary_edges()) {
    const int m = midpoint.at(edge_key(e.a, e.b));
    boundary.push_back({e.a, m, e.tag});
    boundary.push_back({m, e.b, e.tag});
  }

  return {Mesh::build(std::move(vertices), std::move(triangles), std::move(subdomain),
                      std::move(boundary)),
          std::move(parents)};
}

void MeshHierarchy::replace_finest(Mesh fine) {
  levels.back() = std::move(fine);
  for (int l = num_levels() - 2; l >= 0; --l) {
    const auto& finer = levels[l + 1].vertices();
    std::vector<Point> coarse(finer.begin(), finer.begin() + levels[l].num_vertices());
    levels[l] = levels[l].with_vertices_unchecked(std::move(coarse));
  }
}

MeshHierarchy build_hierarchy(Mesh coarse, int refinements) {
  if (refinements < 0) throw MeshError("refinements must be >= 0");
  MeshHierarchy h;
  h.levels.push_back(std::move(coarse));
  for (int l = 0; l < refinements; ++l) {
    auto refined = refine_uniform(h.levels.back());
    h.levels.push_back(std::move(refined.mesh));
    h.parents.push_back(std::move(refined.parents));
  }
  return h;
}

Mesh generate_composite_mesh(int rows, int cols, double cell_radius_fraction) {
  if (rows < 1 || cols < 1) throw GeometryError("rows and cols must be >= 1");
  if (!(cell_radius_fraction > 0.0 && cell_radius_fraction < 0.5))
    throw GeometryError("cell_radius_fraction must lie in (0, 0.5); inclusions would touch");

  const double hx = 1.0 / cols;
  const double hy = 1.0 / rows;
  const double radius = cell_radius_fraction * std::min(hx, hy);

  std::vector<Point> vertices;
  // Lattice corners and cell-edge midpoints live on a half-pitch grid; cell
  // centres (odd, odd) are never part of it.
  const int gx = 2 * cols + 1;
  const int gy = 2 * rows + 1;
  std::vector<int> grid(static_cast<std::size_t>(gx * gy), -1);
  auto grid_vertex = [&](int i, int j) {
    int& id = grid[static_cast<std::size_t>(j * gx + i)];
    if (id < 0) {
      id = static_cast<int>(vertices.size());
      vertices.emplace_back(0.5 * i * hx, 0.5 * j * hy);
    }
    return id;
  };

  static constexpr std::array<std::array<int, 2>, 8> kRing = {
      {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

  std::vector<Triangle> triangles;
  std::vector<int> subdomain;
  for (int r = 0; r < rows; ++r) {
    const int cj = 2 * (rows - 1 - r) + 1;  // row 0 is the top row
    for (int c = 0; c < cols; ++c) {
      const int ci = 2 * c + 1;
      const Point centre(0.5 * ci * hx, 0.5 * cj * hy);
      const int centre_id = static_cast<int>(vertices.size());
      vertices.push_back(centre);
      std::array<int, 8> octagon{};
      for (int k = 0; k < 8; ++k) {
        const double angle = k * std::numbers::pi / 4.0;
        octagon[k] = static_cast<int>(vertices.size());
        vertices.push_back(centre + radius * Point(std::cos(angle), std::sin(angle)));
      }
      std::array<int, 8> ring{};
      for (int k = 0; k < 8; ++k) ring[k] = grid_vertex(ci + kRing[k][0], cj + kRing[k][1]);

      for (int k = 0; k < 8; ++k) {
        triangles.push_back({centre_id, octagon[k], octagon[(k + 1) % 8]});
        subdomain.push_back(r + 1);
      }
      for (int k = 0; k < 8; ++k) {
        const int o0 = octagon[k], o1 = octagon[(k + 1) % 8];
        const int r0 = ring[k], r1 = ring[(k + 1) % 8];
        const Triangle a1{o0, r0, r1}, a2{o0, r1, o1};
        const Triangle b1{o0, r0, o1}, b2{r0, r1, o1};
        auto worst = [&](const Triangle& x, const Triangle& y) {
          return std::max(circum_in_ratio(vertices[x[0]], vertices[x[1]], vertices[x[2]]),
                          circum_in_ratio(vertices[y[0]], vertices[y[1]], vertices[y[2]]));
        };
        const bool use_a = worst(a1, a2) <= worst(b1, b2);
        triangles.push_back(use_a ? a1 : b1);
        triangles.push_back(use_a ? a2 : b2);
        subdomain.push_back(0);
        subdomain.push_back(0);
      }
    }
  }

  std::vector<BoundaryEdge> boundary;
  for (int i = 0; i + 1 < gx; ++i) {
    boundary.push_back({grid_vertex(i, 0), grid_vertex(i + 1, 0), BoundaryTag::Bottom});
    boundary.push_back({grid_vertex(i + 1, gy - 1), grid_vertex(i, gy - 1), BoundaryTag::Top});
  }
  for (int j = 0; j + 1 < gy; ++j) {
    boundary.push_back({grid_vertex(0, j + 1), grid_vertex(0, j), BoundaryTag::Side});
    boundary.push_back({grid_vertex(gx - 1, j), grid_vertex(gx - 1, j + 1), BoundaryTag::Side});
  }

  return Mesh::build(std::move(vertices), std::move(triangles), std::move(subdomain),
                     std::move(boundary));
}

MeshHierarchy generate_composite_domain(int rows, int cols, double cell_radius_fraction,
                                        int refinements) {
  if (refinements < 0) throw GeometryError("refinements must be >= 0");
  return build_hierarchy(generate_composite_mesh(rows, cols, cell_radius_fraction), refinements);
}

Mesh deform(const Mesh& mesh, const NodalField& v, double t) {
  if (v.num_vertices() != mesh.num_vertices())
    throw MeshError("deformation field does not match the mesh");
  if (!(t >= 0.0)) throw MeshError("step length must be non-negative");
  std::vector<Point> moved = mesh.vertices();
  for (int i = 0; i < mesh.num_vertices(); ++i) moved[i] += t * v.at(i);
  Mesh out = mesh.with_vertices_unchecked(std::move(moved));
  out.check_orientation();
  return out;
}

double circum_in_ratio(const Point& a, const Point& b, const Point& c) {
  const double la = (b - c).norm();
  const double lb = (c - a).norm();
  const double lc = (a - b).norm();
  const double area = std::abs(signed_area_of(a, b, c));
  if (!(area > 0.0)) throw MeshError("degenerate triangle in quality evaluation");
  const double s = 0.5 * (la + lb + lc);
  // R = abc / 4A, r = A / s
  return la * lb * lc * s / (4.0 * area * area);
}

QualityReport mesh_quality(const Mesh& mesh) {
  QualityReport report;
  report.per_element.reserve(static_cast<std::size_t>(mesh.num_triangles()));
  for (const auto& tri : mesh.triangles())
    report.per_element.push_back(
        circum_in_ratio(mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2])));
  report.max = *std::max_element(report.per_element.begin(), report.per_element.end());
  report.median = median_of(report.per_element);
  return report;
}

double min_element_height(const Mesh& mesh) {
  double h = std::numeric_limits<double>::infinity();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    double longest = 0.0;
    for (int i = 0; i < 3; ++i)
      longest = std::max(longest, (mesh.vertex(tri[i]) - mesh.vertex(tri[(i + 1) % 3])).norm());
    h = std::min(h, 2.0 * std::abs(mesh.signed_area(t)) / longest);
  }
  return h;
}

double subdomain_area(const Mesh& mesh, int subdomain) {
  double area = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (mesh.subdomain()[t] == subdomain) area += mesh.signed_area(t);
  return area;
}

}  // namespace cellshape
