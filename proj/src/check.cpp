#include "cellshape/check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cellshape/descent.hpp"

namespace cellshape {

double GradientCheckReport::worst_relative_error(std::size_t step_index) const {
  double worst = 0.0;
  for (const auto& f : fields) worst = std::max(worst, f.relative_error.at(step_index));
  return worst;
}

double reduced_objective(const Mesh& mesh, const MaterialTable& mat, double traction,
                         const ObjectiveWeights& weights) {
  const LinearSystem system = assemble_elasticity(mesh, mat, traction);
  const NodalField u(solve_direct(system));
  return evaluate_objective(mesh, mat, u, weights).total;
}

GradientCheckReport run_gradient_check(const GradientCheckOptions& options) {
  if (options.fields < 1 || options.steps.empty())
    throw ConfigError("gradient check needs at least one field and one step size");
  const MeshHierarchy hierarchy =
      build_hierarchy(generate_composite_mesh(options.rows, options.cols,
                                              options.cell_radius_fraction),
                      options.refinements);
  const Mesh& mesh = hierarchy.finest();
  const MaterialTable mat = make_layered_materials(options.rows, options.materials);

  const LinearSystem system = assemble_elasticity(mesh, mat, options.traction);
  const NodalField u(solve_direct(system));
  const ShapeGradient dJ = combine_and_reset(
      mesh, assemble_shape_derivative_parts(mesh, mat, u), options.weights);

  // Perturbations live on the reset support and respect the slip conditions,
  // so boundary edges (and with them the traction load) stay fixed.
  const std::vector<char> slip = apply_slip_bc(mesh).mask(2 * mesh.num_vertices());
  Eigen::VectorXd base = dJ.dual.values;
  for (std::size_t d = 0; d < slip.size(); ++d)
    if (slip[d]) base[static_cast<Eigen::Index>(d)] = 0.0;
  const double peak = base.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw SolverError("shape derivative vanishes; nothing to check");
  base *= options.field_scale / peak;

  GradientCheckReport report;
  report.dofs = 2 * mesh.num_vertices();
  report.steps = options.steps;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> weight(0.5, 1.5);

  for (int f = 0; f < options.fields; ++f) {
    NodalField v(mesh.num_vertices());
    for (Eigen::Index d = 0; d < v.values.size(); ++d) v.values[d] = -weight(rng) * base[d];
    FieldCheck check;
    check.analytic = dJ.pair(v);
    const NodalField reversed(Eigen::VectorXd(-v.values));
    for (double t : options.steps) {
      const double plus = reduced_objective(deform(mesh, v, t), mat, options.traction, options.weights);
      const double minus = reduced_objective(deform(mesh, reversed, t), mat, options.traction, options.weights);
      const double fd = (plus - minus) / (2.0 * t);
      check.finite_difference.push_back(fd);
      check.relative_error.push_back(std::abs(fd - check.analytic) /
                                     std::max(std::abs(check.analytic), 1e-300));
    }
    report.fields.push_back(std::move(check));
  }
  return report;
}

}  // namespace cellshape
