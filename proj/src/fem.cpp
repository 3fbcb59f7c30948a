#include "cellshape/fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseLU>

namespace cellshape {

MaterialTable::MaterialTable(std::vector<Lame> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_)
    if (!(e.mu > 0.0) || !(e.lambda + e.mu > 0.0))
      throw ConfigError("material needs mu > 0 and lambda + mu > 0");
}

const Lame& MaterialTable::at(int subdomain) const {
  if (subdomain < 0 || subdomain >= size())
    throw ConfigError("no material for subdomain " + std::to_string(subdomain));
  return entries_[subdomain];
}

MaterialTable make_layered_materials(int rows, const MaterialParams& params) {
  if (rows < 1) throw ConfigError("need at least one cell row");
  std::vector<Lame> entries{params.outer};
  for (int k = 0; k < rows; ++k) {
    const double s = rows == 1 ? 0.0 : static_cast<double>(k) / (rows - 1);
    entries.push_back({(1.0 - s) * params.top.lambda + s * params.bottom.lambda,
                       (1.0 - s) * params.top.mu + s * params.bottom.mu});
  }
  return MaterialTable(std::move(entries));
}

ElementGeometry element_geometry(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangle(t);
  const Point& p0 = mesh.vertex(tri[0]);
  const Point& p1 = mesh.vertex(tri[1]);
  const Point& p2 = mesh.vertex(tri[2]);
  const double det = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
  ElementGeometry g;
  g.area = 0.5 * std::abs(det);
  // grad(lambda_i) = rot(p_{i+2} - p_{i+1}) / det, valid for either orientation.
  g.grad[0] = Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / det;
  g.grad[1] = Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / det;
  g.grad[2] = Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / det;
  return g;
}

Eigen::Matrix2d element_gradient(const Mesh& mesh, const ElementGeometry& geom, int t,
                                 const NodalField& u) {
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
  const auto& tri = mesh.triangle(t);
  for (int i = 0; i < 3; ++i) g += u.at(tri[i]) * geom.grad[i].transpose();
  return g;
}

Eigen::Matrix2d stress(const Eigen::Matrix2d& grad, const Lame& lame) {
  return lame.lambda * grad.trace() * Eigen::Matrix2d::Identity() +
         lame.mu * (grad + grad.transpose());
}

Matrix6 elasticity_element_matrix(const ElementGeometry& geom, const Lame& lame) {
  Matrix6 k;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < 3; ++j)
        for (int d = 0; d < 2; ++d) {
          const auto& gi = geom.grad[i];
          const auto& gj = geom.grad[j];
          k(2 * i + c, 2 * j + d) =
              geom.area * (lame.lambda * gi[c] * gj[d] +
                           lame.mu * ((c == d ? gi.dot(gj) : 0.0) + gi[d] * gj[c]));
        }
  return k;
}

Matrix6 gradient_element_matrix(const ElementGeometry& geom) {
  Matrix6 k = Matrix6::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double s = geom.area * geom.grad[i].dot(geom.grad[j]);
      k(2 * i, 2 * j) = s;
      k(2 * i + 1, 2 * j + 1) = s;
    }
  return k;
}

Vector6 gradient_contractions(const ElementGeometry& geom, const Eigen::Matrix2d& g) {
  Vector6 q;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 2; ++c) q[2 * i + c] = g.row(c).dot(geom.grad[i]);
  return q;
}

SparseMatrix assemble_matrix(const Mesh& mesh, const std::function<Matrix6(int)>& element) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(36 * static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Matrix6 ke = element(t);
    const auto& tri = mesh.triangle(t);
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b)
        triplets.emplace_back(2 * tri[a / 2] + a % 2, 2 * tri[b / 2] + b % 2, ke(a, b));
  }
  const int n = 2 * mesh.num_vertices();
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const MaterialTable& mat) {
  for (int s : mesh.subdomain()) (void)mat.at(s);
  return assemble_matrix(mesh, [&](int t) {
    return elasticity_element_matrix(element_geometry(mesh, t), mat.at(mesh.subdomain()[t]));
  });
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const Lame& lame) {
  return assemble_matrix(
      mesh, [&](int t) { return elasticity_element_matrix(element_geometry(mesh, t), lame); });
}

std::vector<char> Constraints::mask(int ndofs) const {
  std::vector<char> m(static_cast<std::size_t>(ndofs), 0);
  for (int d : dofs) m[d] = 1;
  return m;
}

Constraints Constraints::from_mask(const std::vector<char>& mask) {
  Constraints c;
  for (int d = 0; d < static_cast<int>(mask.size()); ++d)
    if (mask[d]) {
      c.dofs.push_back(d);
      c.values.push_back(0.0);
    }
  return c;
}

Constraints bottom_dirichlet(const Mesh& mesh) {
  std::vector<char> mask(2 * static_cast<std::size_t>(mesh.num_vertices()), 0);
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.on_boundary(v, BoundaryTag::Bottom)) mask[2 * v] = mask[2 * v + 1] = 1;
  return Constraints::from_mask(mask);
}

void apply_constraints(SparseMatrix& matrix, Eigen::VectorXd& rhs, const Constraints& c) {
  const int n = static_cast<int>(matrix.rows());
  std::vector<char> mask = c.mask(n);
  Eigen::VectorXd prescribed = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < c.dofs.size(); ++k) prescribed[c.dofs[k]] = c.values[k];

  for (int row = 0; row < n; ++row) {
    for (SparseMatrix::InnerIterator it(matrix, row); it; ++it) {
      const auto col = it.col();
      if (mask[row] || mask[col]) {
        if (!mask[row]) rhs[row] -= it.value() * prescribed[col];
        it.valueRef() = row == col ? 1.0 : 0.0;
      }
    }
  }
  for (std::size_t k = 0; k < c.dofs.size(); ++k) rhs[c.dofs[k]] = c.values[k];
  matrix.prune(0.0);
}

void apply_constraints(SparseMatrix& matrix, const std::vector<char>& mask) {
  const int n = static_cast<int>(matrix.rows());
  for (int row = 0; row < n; ++row)
    for (SparseMatrix::InnerIterator it(matrix, row); it; ++it)
      if (mask[row] || mask[it.col()]) it.valueRef() = row == it.col() ? 1.0 : 0.0;
  matrix.prune(0.0);
}

Eigen::VectorXd assemble_traction(const Mesh& mesh, double traction) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * mesh.num_vertices());
  for (const auto& e : mesh.boundary_edges()) {
    if (e.tag != BoundaryTag::Top) continue;
    const double half = 0.5 * (mesh.vertex(e.b) - mesh.vertex(e.a)).norm() * traction;
    rhs[2 * e.a + 1] += half;
    rhs[2 * e.b + 1] += half;
  }
  return rhs;
}

LinearSystem assemble_elasticity(const Mesh& mesh, const MaterialTable& mat, double traction) {
  LinearSystem sys;
  sys.matrix = assemble_stiffness(mesh, mat);
  sys.rhs = assemble_traction(mesh, traction);
  sys.constraints = bottom_dirichlet(mesh);
  apply_constraints(sys.matrix, sys.rhs, sys.constraints);
  return sys;
}

double compute_compliance(const Mesh& mesh, const MaterialTable& mat, const NodalField& u) {
  double energy = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geom = element_geometry(mesh, t);
    const Eigen::Matrix2d g = element_gradient(mesh, geom, t, u);
    energy += geom.area * (stress(g, mat.at(mesh.subdomain()[t])).cwiseProduct(g)).sum();
  }
  return 0.5 * energy;
}

double compute_volume_objective(const Mesh& mesh) { return subdomain_area(mesh, 0); }

double compute_perimeter_objective(const Mesh& mesh) {
  double length = 0.0;
  for (int e = 0; e < static_cast<int>(mesh.interface_edges().size()); ++e)
    length += mesh.interface_length(e);
  return length;
}

ObjectiveBreakdown evaluate_objective(const Mesh& mesh, const MaterialTable& mat,
                                      const NodalField& u, const ObjectiveWeights& weights) {
  ObjectiveBreakdown out;
  out.elast = compute_compliance(mesh, mat, u);
  out.vol = compute_volume_objective(mesh);
  out.peri = compute_perimeter_objective(mesh);
  out.total = weights.elast * out.elast + weights.vol * out.vol + weights.peri * out.peri;
  return out;
}

Eigen::VectorXd solve_direct(const LinearSystem& system) {
  Eigen::SparseMatrix<double> a = system.matrix;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw std::runtime_error("direct factorization failed");
  return lu.solve(system.rhs);
}

}  // namespace cellshape
