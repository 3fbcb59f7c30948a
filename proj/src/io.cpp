#include "cellshape/io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace cellshape {

void write_mesh_text(std::ostream& os, const Mesh& mesh) {
  os << "cellmesh 1\n";
  os << "# " << mesh.num_vertices() << " vertices, " << mesh.num_triangles() << " triangles\n";
  os << std::setprecision(17);
  for (const auto& p : mesh.vertices()) os << "vertex " << p.x() << ' ' << p.y() << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    os << "triangle " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << mesh.subdomain()[t]
       << '\n';
  }
  for (const auto& e : mesh.boundary_edges())
    os << "bedge " << e.a << ' ' << e.b << ' ' << to_string(e.tag) << '\n';
}

Mesh read_mesh_text(std::istream& is) {
  std::vector<Point> vertices;
  std::vector<Triangle> triangles;
  std::vector<int> subdomain;
  std::vector<BoundaryEdge> boundary;
  bool header = false;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw MeshError("mesh text line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string keyword;
    if (!(ls >> keyword)) continue;
    if (!header) {
      int version = 0;
      if (keyword != "cellmesh" || !(ls >> version) || version != 1)
        fail("expected header 'cellmesh 1'");
      header = true;
      continue;
    }
    if (keyword == "vertex") {
      double x = 0, y = 0;
      if (!(ls >> x >> y)) fail("malformed vertex record");
      vertices.emplace_back(x, y);
    } else if (keyword == "triangle") {
      Triangle tri{};
      int sub = 0;
      if (!(ls >> tri[0] >> tri[1] >> tri[2] >> sub)) fail("malformed triangle record");
      triangles.push_back(tri);
      subdomain.push_back(sub);
    } else if (keyword == "bedge") {
      BoundaryEdge e;
      std::string tag;
      if (!(ls >> e.a >> e.b >> tag)) fail("malformed bedge record");
      e.tag = boundary_tag_from_string(tag);
      boundary.push_back(e);
    } else {
      fail("unknown record '" + keyword + "'");
    }
    std::string extra;
    if (ls >> extra) fail("trailing data '" + extra + "'");
  }
  if (!header) throw MeshError("mesh text is empty or lacks the 'cellmesh 1' header");
  return Mesh::build(std::move(vertices), std::move(triangles), std::move(subdomain),
                     std::move(boundary));
}

void save_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_mesh_text(os, mesh);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_mesh_text(is);
}

void write_vtk(std::ostream& os, const Mesh& mesh, const std::vector<NamedField>& point_fields,
               const std::string& title) {
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << std::setprecision(17);
  os << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& p : mesh.vertices()) os << p.x() << ' ' << p.y() << " 0\n";
  os << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (const auto& tri : mesh.triangles())
    os << "3 " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
  os << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) os << "5\n";
  os << "CELL_DATA " << mesh.num_triangles() << "\nSCALARS subdomain_id int 1\nLOOKUP_TABLE default\n";
  for (int s : mesh.subdomain()) os << s << '\n';
  if (point_fields.empty()) return;
  os << "POINT_DATA " << mesh.num_vertices() << '\n';
  for (const auto& [name, field] : point_fields) {
    if (field->num_vertices() != mesh.num_vertices())
      throw MeshError("point field '" + name + "' does not match the mesh");
    os << "VECTORS " << name << " double\n";
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      const Point p = field->at(v);
      os << p.x() << ' ' << p.y() << " 0\n";
    }
  }
}

void save_vtk(const std::filesystem::path& path, const Mesh& mesh,
              const std::vector<NamedField>& point_fields, const std::string& title) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_vtk(os, mesh, point_fields, title);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace cellshape
