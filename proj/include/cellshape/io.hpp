#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cellshape/mesh.hpp"

namespace cellshape {

/// Line-oriented mesh format:
///
///   cellmesh 1
///   vertex <x> <y>
///   triangle <i> <j> <k> <subdomain>
///   bedge <i> <j> <TOP|BOTTOM|SIDE>
///
/// Whitespace separated, `#` starts a comment. Coordinates are written with
/// 17 significant digits so a write/read cycle is exact.
void write_mesh_text(std::ostream& os, const Mesh& mesh);
Mesh read_mesh_text(std::istream& is);

void save_mesh(const std::filesystem::path& path, const Mesh& mesh);
Mesh load_mesh(const std::filesystem::path& path);

using NamedField = std::pair<std::string, const NodalField*>;

/// VTK legacy ASCII unstructured grid with subdomain ids as cell data and
/// optional vector point data.
void write_vtk(std::ostream& os, const Mesh& mesh, const std::vector<NamedField>& point_fields,
               const std::string& title = "cellshape");
void save_vtk(const std::filesystem::path& path, const Mesh& mesh,
              const std::vector<NamedField>& point_fields, const std::string& title = "cellshape");

}  // namespace cellshape
