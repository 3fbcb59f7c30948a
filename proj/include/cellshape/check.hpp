#pragma once

#include <cstdint>
#include <vector>

#include "cellshape/fem.hpp"
#include "cellshape/mesh.hpp"
#include "cellshape/shapegrad.hpp"

namespace cellshape {

/// Finite-difference check of the assembled shape derivative against the
/// reduced objective J(x) = J(x, u(x)), with u from a direct solve.
struct GradientCheckOptions {
  int rows = 2;
  int cols = 1;
  double cell_radius_fraction = 0.3;
  int refinements = 3;
  int fields = 10;
  std::uint64_t seed = 20240611;
  std::vector<double> steps{1e-4, 1e-5};
  /// Fields are -alpha * dJ / max|dJ| * field_scale with alpha ~ U[0.5, 1.5].
  double field_scale = 1.0;
  ObjectiveWeights weights{};
  MaterialParams materials{};
  double traction = 0.1;
};

struct FieldCheck {
  double analytic = 0.0;
  std::vector<double> finite_difference;  ///< one per step size
  std::vector<double> relative_error;
};

struct GradientCheckReport {
  int dofs = 0;
  std::vector<double> steps;
  std::vector<FieldCheck> fields;
  double worst_relative_error(std::size_t step_index) const;
};

/// J_total of the mesh after a direct elasticity solve.
double reduced_objective(const Mesh& mesh, const MaterialTable& mat, double traction,
                         const ObjectiveWeights& weights);

GradientCheckReport run_gradient_check(const GradientCheckOptions& options = {});

}  // namespace cellshape
