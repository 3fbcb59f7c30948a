#include "cellshape/shapegrad.hpp"

namespace cellshape {

ShapeGradient assemble_elastic_shape_derivative(const Mesh& mesh, const MaterialTable& mat,
                                                const NodalField& u) {
  ShapeGradient out{NodalField(mesh.num_vertices()), {}};
  auto& g = out.dual.values;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geom = element_geometry(mesh, t);
    const Eigen::Matrix2d grad_u = element_gradient(mesh, geom, t, u);
    const Eigen::Matrix2d sigma = stress(grad_u, mat.at(mesh.subdomain()[t]));
    // Energy-momentum tensor; the compliance derivative is its negative.
    const Eigen::Matrix2d tensor = 0.5 * sigma.cwiseProduct(grad_u).sum() *
                                       Eigen::Matrix2d::Identity() -
                                   grad_u.transpose() * sigma;
    const Vector6 local = -geom.area * gradient_contractions(geom, tensor);
    const auto& tri = mesh.triangle(t);
    for (int a = 0; a < 6; ++a) g[2 * tri[a / 2] + a % 2] += local[a];
  }
  return out;
}

ShapeGradient assemble_volume_shape_derivative(const Mesh& mesh) {
  ShapeGradient out{NodalField(mesh.num_vertices()), {}};
  auto& g = out.dual.values;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.subdomain()[t] != 0) continue;
    const auto geom = element_geometry(mesh, t);
    const auto& tri = mesh.triangle(t);
    // div(phi_i e_c) = d(lambda_i)/dx_c
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 2; ++c) g[2 * tri[i] + c] += geom.area * geom.grad[i][c];
  }
  return out;
}

double volume_derivative_surface_form(const Mesh& mesh, const NodalField& v) {
  double flux = 0.0;
  for (int e = 0; e < static_cast<int>(mesh.interface_edges().size()); ++e) {
    const auto& edge = mesh.interface_edges()[e];
    const Point mean = 0.5 * (v.at(edge.a) + v.at(edge.b));
    flux += mesh.interface_length(e) * mean.dot(mesh.interface_normal(e));
  }
  return -flux;
}

ShapeGradient assemble_perimeter_shape_derivative(const Mesh& mesh) {
  ShapeGradient out{NodalField(mesh.num_vertices()), {}};
  auto& g = out.dual.values;
  for (const auto& edge : mesh.interface_edges()) {
    const Point d = mesh.vertex(edge.b) - mesh.vertex(edge.a);
    const Point tau = d.normalized();
    // Exact for P1 traces: d/dt |b - a| = tau . (v_b - v_a)
    g[2 * edge.b] += tau.x();
    g[2 * edge.b + 1] += tau.y();
    g[2 * edge.a] -= tau.x();
    g[2 * edge.a + 1] -= tau.y();
  }
  return out;
}

std::vector<char> interface_support_mask(const Mesh& mesh) {
  std::vector<char> touches(static_cast<std::size_t>(mesh.num_triangles()), 0);
  for (const auto& edge : mesh.interface_edges()) {
    touches[edge.cell_triangle] = 1;
    touches[edge.outer_triangle] = 1;
  }
  std::vector<char> active(static_cast<std::size_t>(mesh.num_vertices()), 0);
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (touches[t])
      for (int v : mesh.triangle(t)) active[v] = 1;
  return active;
}

ShapeGradient reset_to_interface_support(const Mesh& mesh, ShapeGradient g) {
  g.active = interface_support_mask(mesh);
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (!g.active[v]) g.dual.set(v, Point::Zero());
  return g;
}

ShapeGradient combine_and_reset(const Mesh& mesh, const ShapeGradientParts& parts,
                                const ObjectiveWeights& weights) {
  ShapeGradient sum{NodalField(Eigen::VectorXd(weights.elast * parts.elast.dual.values +
                                               weights.vol * parts.vol.dual.values +
                                               weights.peri * parts.peri.dual.values)),
                    {}};
  return reset_to_interface_support(mesh, std::move(sum));
}

ShapeGradientParts assemble_shape_derivative_parts(const Mesh& mesh, const MaterialTable& mat,
                                                   const NodalField& u) {
  return {assemble_elastic_shape_derivative(mesh, mat, u), assemble_volume_shape_derivative(mesh),
          assemble_perimeter_shape_derivative(mesh)};
}

}  // namespace cellshape
