#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cellshape/io.hpp"
#include "cellshape/mesh.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cellshape;
using namespace cellshape::testing;

TEST_CASE("boundary tags round-trip through their names") {
  for (auto tag : {BoundaryTag::Top, BoundaryTag::Bottom, BoundaryTag::Side})
    CHECK(boundary_tag_from_string(to_string(tag)) == tag);
  CHECK_THROWS_AS(boundary_tag_from_string("LEFT"), MeshError);
}

TEST_CASE("build rejects broken input") {
  CHECK_THROWS_AS(Mesh::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 2, 1}}, {0},
                              {{0, 1, BoundaryTag::Bottom}, {1, 2, BoundaryTag::Side},
                               {2, 0, BoundaryTag::Side}}),
                  ElementInversion);
  CHECK_THROWS_AS(Mesh::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 3}}, {0}, {}), MeshError);
  CHECK_THROWS_AS(Mesh::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {0},
                              {{0, 1, BoundaryTag::Bottom}}),
                  MeshError);
}

TEST_CASE("single composite cell") {
  const auto h = generate_composite_domain(1, 1, 0.25, 0);
  REQUIRE(h.num_levels() == 1);
  const Mesh& m = h.finest();
  std::set<int> ids(m.subdomain().begin(), m.subdomain().end());
  CHECK(ids == std::set<int>{0, 1});
  CHECK(m.interface_edges().size() == 8);
}

TEST_CASE("generator refinement and row numbering") {
  const auto h = generate_composite_domain(4, 4, 0.3, 2);
  REQUIRE(h.num_levels() == 3);
  CHECK(h.finest().num_triangles() == 16 * h.levels[0].num_triangles());
  CHECK(h.finest().max_subdomain() == 4);

  const Mesh m = generate_composite_mesh(8, 4, 0.3);
  CHECK(m.max_subdomain() == 8);
  // Row ids count from the top: id 1 sits highest, id 8 lowest.
  std::vector<double> mean_y(9, 0.0);
  std::vector<int> count(9, 0);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const int s = m.subdomain()[t];
    if (s == 0) continue;
    for (int k : m.triangle(t)) mean_y[s] += m.vertex(k).y();
    count[s] += 3;
  }
  for (int s = 1; s < 8; ++s) CHECK(mean_y[s] / count[s] > mean_y[s + 1] / count[s + 1]);
}

TEST_CASE("generator rejects touching inclusions") {
  CHECK_THROWS_AS(generate_composite_mesh(2, 2, 0.5), GeometryError);
  CHECK_THROWS_AS(generate_composite_mesh(2, 2, 0.0), GeometryError);
  CHECK_THROWS_AS(generate_composite_mesh(0, 2, 0.3), GeometryError);
}

TEST_CASE("red refinement of one triangle") {
  const auto r = refine_uniform(equilateral_triangle());
  CHECK(r.mesh.num_triangles() == 4);
  CHECK(r.mesh.num_vertices() == 6);
  CHECK(r.parents.size() == 6);
  for (int i = 0; i < 3; ++i) CHECK(r.parents[i].inherited());
}

TEST_CASE("red refinement bookkeeping V + E and 4T") {
  const Mesh coarse = generate_composite_mesh(2, 3, 0.3);
  const auto r = refine_uniform(coarse);
  CHECK(r.mesh.num_vertices() == coarse.num_vertices() + count_edges(coarse));
  CHECK(r.mesh.num_triangles() == 4 * coarse.num_triangles());
  CHECK(r.mesh.boundary_edges().size() == 2 * coarse.boundary_edges().size());
}

TEST_CASE("interface edges split into two children with the same orientation") {
  const Mesh coarse = generate_composite_mesh(2, 2, 0.3);
  const auto r = refine_uniform(coarse);
  REQUIRE(r.mesh.interface_edges().size() == 2 * coarse.interface_edges().size());

  auto midpoint_of = [&](int a, int b) {
    for (std::size_t i = 0; i < r.parents.size(); ++i) {
      const auto& p = r.parents[i];
      if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return static_cast<int>(i);
    }
    return -1;
  };
  auto find_edge = [&](int a, int b) {
    const auto& edges = r.mesh.interface_edges();
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (edges[e].a == a && edges[e].b == b) return static_cast<int>(e);
    return -1;
  };
  for (int e = 0; e < static_cast<int>(coarse.interface_edges().size()); ++e) {
    const auto& edge = coarse.interface_edges()[e];
    const int m = midpoint_of(edge.a, edge.b);
    REQUIRE(m >= 0);
    const int first = find_edge(edge.a, m);
    const int second = find_edge(m, edge.b);
    REQUIRE(first >= 0);
    REQUIRE(second >= 0);
    CHECK((r.mesh.interface_normal(first) - coarse.interface_normal(e)).norm() < 1e-14);
    CHECK((r.mesh.interface_normal(second) - coarse.interface_normal(e)).norm() < 1e-14);
  }
}

TEST_CASE("refinement preserves the area of every subdomain") {
  const auto h = generate_composite_domain(3, 3, 0.3, 2);
  for (int s = 0; s <= 3; ++s) {
    const double a0 = subdomain_area(h.levels[0], s);
    for (const auto& level : h.levels) CHECK(std::abs(subdomain_area(level, s) - a0) <= 1e-12);
  }
}

TEST_CASE("deform: identity, reversal and inversion") {
  const Mesh m = generate_composite_mesh(2, 2, 0.3);
  const Mesh same = deform(m, NodalField(m.num_vertices()), 1.0);
  CHECK(same.vertices() == m.vertices());

  const NodalField v(random_vector(2 * m.num_vertices(), 7, -0.01, 0.01));
  const Mesh there = deform(m, v, 0.5);
  const Mesh back = deform(there, NodalField(Eigen::VectorXd(-v.values)), 0.5);
  double err = 0.0;
  for (int i = 0; i < m.num_vertices(); ++i)
    err = std::max(err, (back.vertex(i) - m.vertex(i)).norm());
  CHECK(err <= 1e-15);

  const Mesh tri = unit_triangle();
  NodalField push(3);
  push.set(0, {0.6, 0.6});
  try {
    (void)deform(tri, push, 1.0);
    FAIL("expected ElementInversion");
  } catch (const ElementInversion& e) {
    CHECK(e.element() == 0);
    CHECK(e.signed_area() < 0.0);
  }
  CHECK_THROWS_AS(deform(tri, NodalField(2), 1.0), MeshError);
}

TEST_CASE("small deformations never invert and keep the interface") {
  const Mesh m = refine_uniform(generate_composite_mesh(2, 2, 0.3)).mesh;
  const double h = min_element_height(m);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    NodalField v(random_vector(2 * m.num_vertices(), seed));
    for (int i = 0; i < m.num_vertices(); ++i) {
      const Point p = v.at(i);
      const double n = p.norm();
      if (n > 0) v.set(i, p / n * 0.45 * h * (0.5 + 0.5 * std::abs(std::sin(double(i)))));
    }
    const Mesh moved = deform(m, v, 1.0);
    REQUIRE(moved.interface_edges().size() == m.interface_edges().size());
    for (std::size_t e = 0; e < m.interface_edges().size(); ++e) {
      CHECK(moved.interface_edges()[e].a == m.interface_edges()[e].a);
      CHECK(moved.interface_edges()[e].b == m.interface_edges()[e].b);
    }
  }
}

TEST_CASE("inversion threshold is fixed at the first build") {
  const Mesh m = generate_composite_mesh(2, 2, 0.3);
  NodalField v(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) v.set(i, m.vertex(i));
  const Mesh grown = deform(m, v, 1.0);  // uniform scaling by 2
  CHECK(grown.inversion_threshold() == m.inversion_threshold());
  CHECK(m.inversion_threshold() > 0.0);
}

TEST_CASE("quality metric closed forms") {
  CHECK(circum_in_ratio({0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2}) == doctest::Approx(2.0).epsilon(1e-14));
  const double r = std::sqrt(2.0) / 2;
  CHECK(circum_in_ratio({0, 0}, {1, 0}, {0, 1}) == doctest::Approx(r / (1 - r)).epsilon(1e-14));
  const auto q = mesh_quality(unit_triangle());
  CHECK(q.max == q.median);
  CHECK_THROWS_AS(circum_in_ratio({0, 0}, {1, 0}, {2, 0}), MeshError);
}

TEST_CASE("quality is at least 2 and repeats under red refinement") {
  const Mesh m = generate_composite_mesh(2, 2, 0.3);
  const auto q = mesh_quality(m);
  for (double x : q.per_element) CHECK(x >= 2.0 - 1e-12);
  CHECK(q.max >= q.median);

  auto coarse = q.per_element;
  auto fine = mesh_quality(refine_uniform(m).mesh).per_element;
  std::vector<double> expected;
  for (double x : coarse) expected.insert(expected.end(), 4, x);
  std::sort(expected.begin(), expected.end());
  std::sort(fine.begin(), fine.end());
  REQUIRE(fine.size() == expected.size());
  for (std::size_t i = 0; i < fine.size(); ++i) CHECK(std::abs(fine[i] - expected[i]) <= 1e-10 * expected[i]);
}

TEST_CASE("quality is invariant under rigid motion and scaling") {
  const Mesh m = generate_composite_mesh(2, 2, 0.3);
  const double c = std::cos(0.7), s = std::sin(0.7);
  NodalField v(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) {
    const Point p = m.vertex(i);
    const Point q = 3.5 * Point(c * p.x() - s * p.y(), s * p.x() + c * p.y()) + Point(2.0, -1.0);
    v.set(i, q - p);
  }
  const auto a = mesh_quality(m).per_element;
  const auto b = mesh_quality(deform(m, v, 1.0)).per_element;
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * a[i]);
}

TEST_CASE("mesh text round-trip is exact") {
  const Mesh m = deform(generate_composite_mesh(2, 2, 0.3),
                        NodalField(random_vector(2 * generate_composite_mesh(2, 2, 0.3).num_vertices(),
                                                 3, -1e-3, 1e-3)),
                        1.0 / 3.0);
  std::stringstream ss;
  write_mesh_text(ss, m);
  const Mesh back = read_mesh_text(ss);
  CHECK(back.vertices() == m.vertices());
  CHECK(back.triangles() == m.triangles());
  CHECK(back.subdomain() == m.subdomain());
  CHECK(back.interface_edges().size() == m.interface_edges().size());
}

TEST_CASE("mesh text errors carry line numbers") {
  std::istringstream no_header("vertex 0 0\n");
  CHECK_THROWS_AS(read_mesh_text(no_header), MeshError);
  std::istringstream bad("cellmesh 1\n# comment\nvertex 0\n");
  try {
    (void)read_mesh_text(bad);
    FAIL("expected MeshError");
  } catch (const MeshError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("vtk export lists cells, subdomains and point vectors") {
  const Mesh m = two_triangle_square();
  NodalField u(m.num_vertices());
  u.set(2, {1.0, 2.0});
  std::ostringstream os;
  write_vtk(os, m, {{"u", &u}});
  const std::string out = os.str();
  CHECK(out.find("POINTS 4 double") != std::string::npos);
  CHECK(out.find("CELLS 2 8") != std::string::npos);
  CHECK(out.find("CELL_TYPES 2") != std::string::npos);
  CHECK(out.find("SCALARS subdomain_id int 1") != std::string::npos);
  CHECK(out.find("VECTORS u double") != std::string::npos);
  NodalField wrong(3);
  std::ostringstream sink;
  CHECK_THROWS_AS(write_vtk(sink, m, {{"w", &wrong}}), MeshError);
}

TEST_CASE("replace_finest pushes coordinates to coarse levels") {
  auto h = generate_composite_domain(2, 2, 0.3, 2);
  const Mesh& fine = h.finest();
  const NodalField v(random_vector(2 * fine.num_vertices(), 11, -1e-4, 1e-4));
  h.replace_finest(deform(fine, v, 1.0));
  for (int l = 0; l + 1 < h.num_levels(); ++l)
    for (int i = 0; i < h.levels[l].num_vertices(); ++i)
      CHECK(h.levels[l].vertex(i) == h.finest().vertex(i));
}
