#include "cellshape/descent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cellshape {

void PenaltyConfig::validate() const {
  if (!(nu_penalty > 0.0)) throw ConfigError("nu_penalty must be > 0");
  if (!(bound > 0.0)) throw ConfigError("b must be > 0");
  if (!(metric.mu > 0.0) || !(metric.lambda + metric.mu > 0.0))
    throw ConfigError("metric Lamé pair is not elliptic");
}

void NewtonConfig::validate() const {
  if (max_steps < 1) throw ConfigError("Newton max_steps must be >= 1");
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("Newton tolerances must be > 0");
  inner.validate();
  mg.validate();
}

double NewtonReport::mean_linear_iterations() const {
  if (linear_iterations.empty()) return 0.0;
  return std::accumulate(linear_iterations.begin(), linear_iterations.end(), 0.0) /
         static_cast<double>(linear_iterations.size());
}

NewtonNonConvergence::NewtonNonConvergence(NewtonReport report)
    : NonConvergence(
          [&] {
            std::ostringstream os;
            os << "Newton iteration did not converge in " << report.iterations
               << " iterations (residual " << report.final_residual << ")";
            return os.str();
          }(),
          report.iterations, report.final_residual),
      report_(std::move(report)) {}

Constraints apply_slip_bc(const Mesh& mesh) {
  std::vector<char> mask(2 * static_cast<std::size_t>(mesh.num_vertices()), 0);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.on_boundary(v, BoundaryTag::Side)) mask[2 * v] = 1;
    if (mesh.on_boundary(v, BoundaryTag::Top) || mesh.on_boundary(v, BoundaryTag::Bottom))
      mask[2 * v + 1] = 1;
  }
  return Constraints::from_mask(mask);
}

namespace {

double excess(const Eigen::Matrix2d& g, double bound) { return g.squaredNorm() - bound * bound; }

Vector6 local_values(const Mesh& mesh, int t, const NodalField& v) {
  Vector6 out;
  const auto& tri = mesh.triangle(t);
  for (int i = 0; i < 3; ++i) out.segment<2>(2 * i) = v.at(tri[i]);
  return out;
}

}  // namespace

std::vector<char> active_indicator(const Mesh& mesh, const NodalField& v, double bound) {
  std::vector<char> gamma(static_cast<std::size_t>(mesh.num_triangles()), 0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geom = element_geometry(mesh, t);
    gamma[t] = excess(element_gradient(mesh, geom, t, v), bound) > 0.0 ? 1 : 0;
  }
  return gamma;
}

Eigen::VectorXd metric_residual(const Mesh& mesh, const NodalField& v, const PenaltyConfig& cfg,
                                const NodalField& dual, const Constraints& constraints) {
  Eigen::VectorXd res = -dual.values;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geom = element_geometry(mesh, t);
    const Vector6 vl = local_values(mesh, t, v);
    Vector6 local = elasticity_element_matrix(geom, cfg.metric) * vl;
    const Eigen::Matrix2d g = element_gradient(mesh, geom, t, v);
    const double e = excess(g, cfg.bound);
    if (e > 0.0) local += cfg.nu_penalty * geom.area * e * gradient_contractions(geom, g);
    const auto& tri = mesh.triangle(t);
    for (int a = 0; a < 6; ++a) res[2 * tri[a / 2] + a % 2] += local[a];
  }
  for (int d : constraints.dofs) res[d] = 0.0;
  return res;
}

SparseMatrix metric_matrix(const Mesh& mesh, const PenaltyConfig& cfg) {
  return assemble_stiffness(mesh, cfg.metric);
}

SparseMatrix penalty_jacobian(const Mesh& mesh, const NodalField& v, const PenaltyConfig& cfg) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geom = element_geometry(mesh, t);
    const Eigen::Matrix2d g = element_gradient(mesh, geom, t, v);
    const double e = excess(g, cfg.bound);
    if (!(e > 0.0)) continue;
    const Vector6 q = gradient_contractions(geom, g);
    const Matrix6 ke = cfg.nu_penalty * (2.0 * geom.area * q * q.transpose() +
                                         e * gradient_element_matrix(geom));
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

SparseMatrix metric_jacobian(const Mesh& mesh, const NodalField& v, const PenaltyConfig& cfg) {
  return SparseMatrix(metric_matrix(mesh, cfg) + penalty_jacobian(mesh, v, cfg));
}

double penalized_objective(const Mesh& mesh, const NodalField& v, const PenaltyConfig& cfg,
                           const NodalField& dual) {
  double value = -dual.values.dot(v.values);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geom = element_geometry(mesh, t);
    const Eigen::Matrix2d g = element_gradient(mesh, geom, t, v);
    value += 0.5 * geom.area * stress(g, cfg.metric).cwiseProduct(g).sum();
    const double e = std::max(0.0, excess(g, cfg.bound));
    value += 0.25 * cfg.nu_penalty * geom.area * e * e;
  }
  return value;
}

double max_gradient_norm(const Mesh& mesh, const NodalField& v) {
  double best = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto geom = element_geometry(mesh, t);
    best = std::max(best, element_gradient(mesh, geom, t, v).norm());
  }
  return best;
}

DescentResult solve_descent(const MeshHierarchy& hierarchy, const TransferOperators& transfer,
                            const ShapeGradient& dJ, const PenaltyConfig& cfg,
                            const NewtonConfig& newton) {
  cfg.validate();
  newton.validate();
  const Mesh& fine = hierarchy.finest();
  if (dJ.dual.num_vertices() != fine.num_vertices())
    throw SolverError("shape gradient does not match the finest mesh");

  const Constraints constraints = apply_slip_bc(fine);
  std::vector<std::vector<char>> masks;
  for (const auto& level : hierarchy.levels)
    masks.push_back(apply_slip_bc(level).mask(2 * level.num_vertices()));
  const auto metric_levels =
      build_hierarchy_matrices(hierarchy, [&](const Mesh& m) { return metric_matrix(m, cfg); });

  DescentResult result{NodalField(fine.num_vertices()), {}};
  NewtonReport& report = result.report;
  NodalField& v = result.direction;
  double tol = 0.0;

  for (int pass = 1;; ++pass) {
    const Eigen::VectorXd res = metric_residual(fine, v, cfg, dJ.dual, constraints);
    const double norm = res.norm();
    report.iterations = pass;
    report.residual_norms.push_back(norm);
    report.final_residual = norm;
    if (pass == 1) {
      report.initial_residual = norm;
      tol = std::max(newton.rel_tol * norm, newton.abs_tol);
    }
    if (norm <= tol) {
      report.converged = true;
      break;
    }
    if (!std::isfinite(norm) || pass >= newton.max_steps) throw NewtonNonConvergence(report);

    auto penalty_levels = galerkin_hierarchy(penalty_jacobian(fine, v, cfg), transfer);
    std::vector<SparseMatrix> matrices;
    matrices.reserve(penalty_levels.size());
    for (std::size_t l = 0; l < penalty_levels.size(); ++l) {
      SparseMatrix a = metric_levels[l] + penalty_levels[l];
      apply_constraints(a, masks[l]);
      matrices.push_back(std::move(a));
    }
    Multigrid mg(std::move(matrices), masks, transfer, newton.mg);
    const KrylovResult step = solve_with_multigrid(mg, -res, newton.inner);
    report.linear_iterations.push_back(step.iterations);
    v.values += step.solution;
  }
  return result;
}

}  // namespace cellshape
