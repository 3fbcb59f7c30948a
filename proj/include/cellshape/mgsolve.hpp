#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cellshape/fem.hpp"
#include "cellshape/mesh.hpp"

namespace cellshape {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Breakdown : public SolverError {
 public:
  using SolverError::SolverError;
};

class NonConvergence : public SolverError {
 public:
  NonConvergence(const std::string& what, int iterations, double residual)
      : SolverError(what), iterations_(iterations), residual_(residual) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

struct MGConfig {
  int pre_smooth = 3;
  int post_smooth = 3;
  double damping = 0.66;  ///< block-Jacobi relaxation weight

  void validate() const;
};

enum class KrylovMethod { BiCGStab, CG };

struct KrylovConfig {
  KrylovMethod method = KrylovMethod::BiCGStab;
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  int max_iter = 2000;

  void validate() const;
};

/// Interpolation from level l (coarse) to level l + 1, 2V_f x 2V_c.
SparseMatrix prolongation_matrix(const ParentMap& parents, int coarse_vertices);

struct TransferOperators {
  std::vector<SparseMatrix> prolongation;  ///< prolongation[l]: level l -> l + 1

  static TransferOperators from_hierarchy(const MeshHierarchy& hierarchy);
  int num_levels() const { return static_cast<int>(prolongation.size()) + 1; }
};

/// R A P with R = P^T.
SparseMatrix galerkin_coarsen(const SparseMatrix& fine, const SparseMatrix& prolongation);

using MeshAssembler = std::function<SparseMatrix(const Mesh&)>;

/// Re-discretizes the operator on every level, coarsest first.
std::vector<SparseMatrix> build_hierarchy_matrices(const MeshHierarchy& hierarchy,
                                                   const MeshAssembler& assembler);

/// Galerkin chain of a fine-level matrix down to every level, coarsest first.
std::vector<SparseMatrix> galerkin_hierarchy(const SparseMatrix& fine,
                                             const TransferOperators& transfer);

/// Geometric multigrid V-cycle over constrained level matrices. Constrained
/// dofs are identity rows; the cycle returns r on them and never lets the
/// coarse correction touch them. The cycle is a fixed linear operator.
class Multigrid {
 public:
  /// `matrices` and `constrained` are ordered coarsest first; matrices must
  /// already carry identity rows for constrained dofs.
  Multigrid(std::vector<SparseMatrix> matrices, std::vector<std::vector<char>> constrained,
            const TransferOperators& transfer, MGConfig config = {});
  ~Multigrid();
  Multigrid(Multigrid&&) noexcept;
  Multigrid& operator=(Multigrid&&) noexcept;

  Eigen::VectorXd vcycle(const Eigen::VectorXd& rhs) const;
  const SparseMatrix& fine_matrix() const { return levels_.back().matrix; }
  int num_levels() const { return static_cast<int>(levels_.size()); }

 private:
  struct Level {
    SparseMatrix matrix;
    std::vector<char> constrained;
    std::vector<Eigen::Matrix2d> block_inverse;
  };
  struct CoarseSolver;

  void cycle(int level, const Eigen::VectorXd& rhs, Eigen::VectorXd& x) const;
  void smooth(const Level& lvl, const Eigen::VectorXd& rhs, Eigen::VectorXd& x, int sweeps) const;

  std::vector<Level> levels_;
  std::vector<SparseMatrix> prolongation_;
  std::vector<SparseMatrix> restriction_;
  std::unique_ptr<CoarseSolver> coarse_;
  MGConfig config_;
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct KrylovResult {
  Eigen::VectorXd solution;
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  std::vector<double> residual_history;
};

/// Right-preconditioned BiCGStab. Stops at ||r|| <= max(rel_tol ||r0||, abs_tol).
KrylovResult bicgstab(const LinearOperator& apply_a, const LinearOperator& apply_m,
                      const Eigen::VectorXd& rhs, const KrylovConfig& config);

/// Preconditioned CG, for cross-checks on SPD systems.
KrylovResult conjugate_gradient(const LinearOperator& apply_a, const LinearOperator& apply_m,
                                const Eigen::VectorXd& rhs, const KrylovConfig& config);

KrylovResult krylov_solve(const LinearOperator& apply_a, const LinearOperator& apply_m,
                          const Eigen::VectorXd& rhs, const KrylovConfig& config);

/// Solves a constrained level system with Krylov + multigrid.
KrylovResult solve_with_multigrid(const Multigrid& mg, const Eigen::VectorXd& rhs,
                                  const KrylovConfig& config);

struct ElasticityHierarchy {
  LinearSystem fine;
  Multigrid mg;
};

/// Elasticity state system on the finest level together with its multigrid
/// preconditioner (re-discretized on every level, BOTTOM Dirichlet).
ElasticityHierarchy build_elasticity_multigrid(const MeshHierarchy& hierarchy,
                                               const MaterialTable& mat, double traction,
                                               const TransferOperators& transfer,
                                               const MGConfig& config = {});

}  // namespace cellshape
