#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cellshape/mesh.hpp"

namespace cellshape {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Vector6 = Eigen::Matrix<double, 6, 1>;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Lame {
  double lambda = 0.0;
  double mu = 0.0;
};

/// Lamé pairs indexed by subdomain id.
class MaterialTable {
 public:
  MaterialTable() = default;
  explicit MaterialTable(std::vector<Lame> entries);

  const Lame& at(int subdomain) const;
  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<Lame>& entries() const { return entries_; }

 private:
  std::vector<Lame> entries_;
};

/// Outer material plus a linear stiffness ramp over the cell rows, top to
/// bottom. Defaults are the composite test case values.
struct MaterialParams {
  Lame outer{1.0, 0.1};
  Lame top{1.2, 0.12};
  Lame bottom{2.0, 0.2};
};

MaterialTable make_layered_materials(int rows, const MaterialParams& params = {});

/// Gradients of the three barycentric coordinates (constant on a P1
/// triangle) and the unsigned area.
struct ElementGeometry {
  std::array<Eigen::Vector2d, 3> grad;
  double area = 0.0;
};

ElementGeometry element_geometry(const Mesh& mesh, int t);

/// Displacement gradient (du_i / dx_j) on triangle t.
Eigen::Matrix2d element_gradient(const Mesh& mesh, const ElementGeometry& geom, int t,
                                 const NodalField& u);

/// sigma = lambda tr(G) I + mu (G + G^T)
Eigen::Matrix2d stress(const Eigen::Matrix2d& grad, const Lame& lame);

/// Local dof order (v0x, v0y, v1x, v1y, v2x, v2y).
Matrix6 elasticity_element_matrix(const ElementGeometry& geom, const Lame& lame);

/// grad(phi_a) : grad(phi_b), scaled by the area.
Matrix6 gradient_element_matrix(const ElementGeometry& geom);

/// Entries G : grad(phi_a) for the six local basis fields.
Vector6 gradient_contractions(const ElementGeometry& geom, const Eigen::Matrix2d& g);

/// Assembles sum_t element(t) into a 2V x 2V matrix. Element order is fixed,
/// so the result is bit-reproducible.
SparseMatrix assemble_matrix(const Mesh& mesh, const std::function<Matrix6(int)>& element);

/// Elasticity stiffness with per-triangle Lamé pairs, no constraints.
SparseMatrix assemble_stiffness(const Mesh& mesh, const MaterialTable& mat);
/// Elasticity stiffness with one Lamé pair on every triangle.
SparseMatrix assemble_stiffness(const Mesh& mesh, const Lame& lame);

struct Constraints {
  std::vector<int> dofs;       ///< sorted, unique
  std::vector<double> values;  ///< prescribed value per constrained dof

  bool empty() const { return dofs.empty(); }
  std::vector<char> mask(int ndofs) const;
  static Constraints from_mask(const std::vector<char>& mask);
};

/// Both components fixed on BOTTOM vertices.
Constraints bottom_dirichlet(const Mesh& mesh);

/// Symmetric elimination: prescribed values move to the rhs, constrained
/// rows and columns become identity.
void apply_constraints(SparseMatrix& matrix, Eigen::VectorXd& rhs, const Constraints& c);
void apply_constraints(SparseMatrix& matrix, const std::vector<char>& mask);

struct LinearSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  Constraints constraints;
};

/// Consistent load for the vertical traction f = (0, traction) on TOP edges.
Eigen::VectorXd assemble_traction(const Mesh& mesh, double traction);

LinearSystem assemble_elasticity(const Mesh& mesh, const MaterialTable& mat, double traction);

double compute_compliance(const Mesh& mesh, const MaterialTable& mat, const NodalField& u);
double compute_volume_objective(const Mesh& mesh);
double compute_perimeter_objective(const Mesh& mesh);

struct ObjectiveWeights {
  double elast = 100.0;
  double vol = 1.0;
  double peri = 0.01;
};

struct ObjectiveBreakdown {
  double elast = 0.0;
  double vol = 0.0;
  double peri = 0.0;
  double total = 0.0;
};

ObjectiveBreakdown evaluate_objective(const Mesh& mesh, const MaterialTable& mat,
                                      const NodalField& u, const ObjectiveWeights& weights);

/// Direct sparse solve of an assembled (constrained) system; used for
/// reference solutions and finite-difference checks.
Eigen::VectorXd solve_direct(const LinearSystem& system);

}  // namespace cellshape
