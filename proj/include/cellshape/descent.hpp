#pragma once

#include <vector>

#include "cellshape/fem.hpp"
#include "cellshape/mesh.hpp"
#include "cellshape/mgsolve.hpp"
#include "cellshape/shapegrad.hpp"

namespace cellshape {

/// Gradient penalty nu/4 int ((grad v : grad v - b^2)^+)^2 on top of the
/// elasticity inner product with a fixed metric Lamé pair.
struct PenaltyConfig {
  double nu_penalty = 5e4;
  double bound = 0.001;  ///< b, bound on the Frobenius norm of grad v
  Lame metric{0.1, 1.0};

  void validate() const;
};

struct NewtonConfig {
  int max_steps = 200;
  double rel_tol = 1e-9;
  double abs_tol = 1e-9;
  KrylovConfig inner{KrylovMethod::BiCGStab, 1e-3, 1e-30, 2000};
  MGConfig mg{};

  void validate() const;
};

struct NewtonReport {
  int iterations = 0;  ///< residual evaluations, including the final one
  std::vector<int> linear_iterations;
  std::vector<double> residual_norms;
  bool converged = false;
  double initial_residual = 0.0;
  double final_residual = 0.0;

  double mean_linear_iterations() const;
};

class NewtonNonConvergence : public NonConvergence {
 public:
  explicit NewtonNonConvergence(NewtonReport report);
  const NewtonReport& report() const noexcept { return report_; }

 private:
  NewtonReport report_;
};

/// Slip conditions: x fixed on SIDE, y fixed on TOP and BOTTOM.
Constraints apply_slip_bc(const Mesh& mesh);

/// Per-triangle gamma: 1 iff |grad v|_F^2 - b^2 > 0.
std::vector<char> active_indicator(const Mesh& mesh, const NodalField& v, double bound);

/// a(v, w) + dj2(v)[w] - dJ[w] for all basis fields w; constrained entries zeroed.
Eigen::VectorXd metric_residual(const Mesh& mesh, const NodalField& v, const PenaltyConfig& cfg,
                                const NodalField& dual, const Constraints& constraints);

/// a(., .) with the metric Lamé pair, unconstrained.
SparseMatrix metric_matrix(const Mesh& mesh, const PenaltyConfig& cfg);

/// Penalty part of j''(v), unconstrained; zero rows outside the active set.
SparseMatrix penalty_jacobian(const Mesh& mesh, const NodalField& v, const PenaltyConfig& cfg);

/// Full generalized Jacobian a + penalty, unconstrained.
SparseMatrix metric_jacobian(const Mesh& mesh, const NodalField& v, const PenaltyConfig& cfg);

/// j(v) = 1/2 a(v, v) - dJ[v] + nu/4 int ((|grad v|^2 - b^2)^+)^2
double penalized_objective(const Mesh& mesh, const NodalField& v, const PenaltyConfig& cfg,
                           const NodalField& dual);

double max_gradient_norm(const Mesh& mesh, const NodalField& v);

struct DescentResult {
  NodalField direction;
  NewtonReport report;
};

/// Semi-smooth Newton for g(v, w) = dJ[w] on the finest hierarchy level,
/// starting from v = 0 without line search. Each linearization is solved by
/// Krylov + multigrid; the metric is re-discretized on all levels and the
/// penalty part Galerkin-coarsened.
DescentResult solve_descent(const MeshHierarchy& hierarchy, const TransferOperators& transfer,
                            const ShapeGradient& dJ, const PenaltyConfig& cfg,
                            const NewtonConfig& newton);

}  // namespace cellshape
