#include "cellshape/mgsolve.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SparseLU>

namespace cellshape {

void MGConfig::validate() const {
  if (pre_smooth < 1 || post_smooth < 1) throw ConfigError("smoothing counts must be >= 1");
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
}

void KrylovConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("solver tolerances must be > 0");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
}

SparseMatrix prolongation_matrix(const ParentMap& parents, int coarse_vertices) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * parents.size());
  for (int p = 0; p < static_cast<int>(parents.size()); ++p) {
    const auto& e = parents[p];
    for (int c = 0; c < 2; ++c) {
      if (e.inherited()) {
        triplets.emplace_back(2 * p + c, 2 * e.a + c, 1.0);
      } else {
        triplets.emplace_back(2 * p + c, 2 * e.a + c, 0.5);
        triplets.emplace_back(2 * p + c, 2 * e.b + c, 0.5);
      }
    }
  }
  SparseMatrix prolong(2 * static_cast<Eigen::Index>(parents.size()), 2 * coarse_vertices);
  prolong.setFromTriplets(triplets.begin(), triplets.end());
  return prolong;
}

TransferOperators TransferOperators::from_hierarchy(const MeshHierarchy& hierarchy) {
  TransferOperators t;
  for (int l = 0; l + 1 < hierarchy.num_levels(); ++l)
    t.prolongation.push_back(
        prolongation_matrix(hierarchy.parents[l], hierarchy.levels[l].num_vertices()));
  return t;
}

SparseMatrix galerkin_coarsen(const SparseMatrix& fine, const SparseMatrix& prolongation) {
  const SparseMatrix restriction = prolongation.transpose();
  const SparseMatrix ap = fine * prolongation;
  return SparseMatrix(restriction * ap);
}

std::vector<SparseMatrix> build_hierarchy_matrices(const MeshHierarchy& hierarchy,
                                                   const MeshAssembler& assembler) {
  std::vector<SparseMatrix> out;
  out.reserve(hierarchy.levels.size());
  for (const auto& level : hierarchy.levels) out.push_back(assembler(level));
  return out;
}

std::vector<SparseMatrix> galerkin_hierarchy(const SparseMatrix& fine,
                                             const TransferOperators& transfer) {
  const int levels = transfer.num_levels();
  std::vector<SparseMatrix> out(static_cast<std::size_t>(levels));
  out.back() = fine;
  for (int l = levels - 2; l >= 0; --l) out[l] = galerkin_coarsen(out[l + 1], transfer.prolongation[l]);
  return out;
}

struct Multigrid::CoarseSolver {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
};

Multigrid::~Multigrid() = default;
Multigrid::Multigrid(Multigrid&&) noexcept = default;
Multigrid& Multigrid::operator=(Multigrid&&) noexcept = default;

Multigrid::Multigrid(std::vector<SparseMatrix> matrices, std::vector<std::vector<char>> constrained,
                     const TransferOperators& transfer, MGConfig config)
    : config_(config) {
  config_.validate();
  if (matrices.empty() || matrices.size() != constrained.size() ||
      static_cast<int>(matrices.size()) != transfer.num_levels())
    throw SolverError("multigrid level data is inconsistent");

  for (std::size_t l = 0; l < matrices.size(); ++l) {
    Level lvl;
    lvl.matrix = std::move(matrices[l]);
    lvl.constrained = std::move(constrained[l]);
    const int nv = static_cast<int>(lvl.matrix.rows() / 2);
    if (static_cast<int>(lvl.constrained.size()) != 2 * nv)
      throw SolverError("constraint mask does not match level size");
    lvl.block_inverse.resize(static_cast<std::size_t>(nv));
    for (int v = 0; v < nv; ++v) {
      Eigen::Matrix2d block;
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) block(c, d) = lvl.matrix.coeff(2 * v + c, 2 * v + d);
      for (int c = 0; c < 2; ++c)
        if (lvl.constrained[2 * v + c]) {
          block.row(c).setZero();
          block.col(c).setZero();
          block(c, c) = 1.0;
        }
      const double det = block.determinant();
      if (!(std::abs(det) > 0.0))
        throw SolverError("singular 2x2 diagonal block at vertex " + std::to_string(v));
      lvl.block_inverse[v] = block.inverse();
    }
    levels_.push_back(std::move(lvl));
  }
  for (const auto& p : transfer.prolongation) {
    prolongation_.push_back(p);
    restriction_.push_back(p.transpose());
  }

  coarse_ = std::make_unique<CoarseSolver>();
  Eigen::SparseMatrix<double> a0 = levels_.front().matrix;
  coarse_->lu.compute(a0);
  if (coarse_->lu.info() != Eigen::Success) throw SolverError("coarse LU factorization failed");
  if (!std::isfinite(coarse_->lu.logAbsDeterminant()))
    throw SolverError("coarse matrix is singular");
}

void Multigrid::smooth(const Level& lvl, const Eigen::VectorXd& rhs, Eigen::VectorXd& x,
                       int sweeps) const {
  const int nv = static_cast<int>(lvl.block_inverse.size());
  Eigen::VectorXd res(rhs.size());
  for (int s = 0; s < sweeps; ++s) {
    res.noalias() = rhs - lvl.matrix * x;
    for (int v = 0; v < nv; ++v) {
      const Eigen::Vector2d upd = lvl.block_inverse[v] * res.segment<2>(2 * v);
      for (int c = 0; c < 2; ++c)
        if (!lvl.constrained[2 * v + c]) x[2 * v + c] += config_.damping * upd[c];
    }
  }
}

void Multigrid::cycle(int level, const Eigen::VectorXd& rhs, Eigen::VectorXd& x) const {
  const Level& lvl = levels_[level];
  if (level == 0) {
    x = coarse_->lu.solve(rhs);
    return;
  }
  x.setZero(rhs.size());
  smooth(lvl, rhs, x, config_.pre_smooth);

  Eigen::VectorXd coarse_rhs = restriction_[level - 1] * (rhs - lvl.matrix * x);
  const auto& coarse_mask = levels_[level - 1].constrained;
  for (Eigen::Index i = 0; i < coarse_rhs.size(); ++i)
    if (coarse_mask[i]) coarse_rhs[i] = 0.0;
  Eigen::VectorXd coarse_x;
  cycle(level - 1, coarse_rhs, coarse_x);

  Eigen::VectorXd correction = prolongation_[level - 1] * coarse_x;
  for (Eigen::Index i = 0; i < correction.size(); ++i)
    if (lvl.constrained[i]) correction[i] = 0.0;
  x += correction;

  smooth(lvl, rhs, x, config_.post_smooth);
}

Eigen::VectorXd Multigrid::vcycle(const Eigen::VectorXd& rhs) const {
  const Level& fine = levels_.back();
  if (rhs.size() != fine.matrix.rows()) throw SolverError("rhs size does not match the fine level");
  Eigen::VectorXd free_rhs = rhs;
  for (Eigen::Index i = 0; i < rhs.size(); ++i)
    if (fine.constrained[i]) free_rhs[i] = 0.0;
  Eigen::VectorXd x;
  cycle(num_levels() - 1, free_rhs, x);
  for (Eigen::Index i = 0; i < rhs.size(); ++i)
    if (fine.constrained[i]) x[i] = rhs[i];
  return x;
}

namespace {

double threshold(const KrylovConfig& cfg, double r0) { return std::max(cfg.rel_tol * r0, cfg.abs_tol); }

std::string describe(const char* method, int it, double res) {
  std::ostringstream os;
  os << method << " did not converge in " << it << " iterations (residual " << res << ")";
  return os.str();
}

}  // namespace

KrylovResult bicgstab(const LinearOperator& apply_a, const LinearOperator& apply_m,
                      const Eigen::VectorXd& rhs, const KrylovConfig& config) {
  config.validate();
  KrylovResult out;
  const Eigen::Index n = rhs.size();
  out.solution = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = rhs;
  out.initial_residual = r.norm();
  out.final_residual = out.initial_residual;
  out.residual_history.push_back(out.initial_residual);
  if (out.initial_residual == 0.0) return out;
  const double tol = threshold(config, out.initial_residual);
  if (out.initial_residual <= tol) return out;

  const Eigen::VectorXd r_hat = r;
  const double r_hat_norm = r_hat.norm();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  constexpr double tiny = 1e-300;

  for (int it = 1; it <= config.max_iter; ++it) {
    const double rho_new = r_hat.dot(r);
    if (std::abs(rho_new) <= 1e-30 * r_hat_norm * r.norm() || std::abs(rho_new) < tiny)
      throw Breakdown("BiCGStab breakdown: rho vanished");
    if (it == 1) {
      p = r;
    } else {
      const double beta = (rho_new / rho) * (alpha / omega);
      p = r + beta * (p - omega * v);
    }
    rho = rho_new;

    const Eigen::VectorXd y = apply_m(p);
    v = apply_a(y);
    const double denom = r_hat.dot(v);
    if (std::abs(denom) < tiny) throw Breakdown("BiCGStab breakdown: (r_hat, v) vanished");
    alpha = rho / denom;
    Eigen::VectorXd s = r - alpha * v;
    out.solution += alpha * y;
    const double s_norm = s.norm();
    if (s_norm <= tol) {
      out.iterations = it;
      out.final_residual = s_norm;
      out.residual_history.push_back(s_norm);
      return out;
    }

    const Eigen::VectorXd z = apply_m(s);
    const Eigen::VectorXd t = apply_a(z);
    const double tt = t.squaredNorm();
    if (tt < tiny) throw Breakdown("BiCGStab breakdown: A M s vanished");
    omega = t.dot(s) / tt;
    if (std::abs(omega) < tiny) throw Breakdown("BiCGStab breakdown: omega vanished");
    out.solution += omega * z;
    r = s - omega * t;
    const double r_norm = r.norm();
    out.residual_history.push_back(r_norm);
    out.final_residual = r_norm;
    out.iterations = it;
    if (!std::isfinite(r_norm)) throw Breakdown("BiCGStab produced a non-finite residual");
    if (r_norm <= tol) return out;
  }
  throw NonConvergence(describe("BiCGStab", config.max_iter, out.final_residual), config.max_iter,
                       out.final_residual);
}

KrylovResult conjugate_gradient(const LinearOperator& apply_a, const LinearOperator& apply_m,
                                const Eigen::VectorXd& rhs, const KrylovConfig& config) {
  config.validate();
  KrylovResult out;
  out.solution = Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs;
  out.initial_residual = r.norm();
  out.final_residual = out.initial_residual;
  out.residual_history.push_back(out.initial_residual);
  if (out.initial_residual == 0.0) return out;
  const double tol = threshold(config, out.initial_residual);
  if (out.initial_residual <= tol) return out;

  Eigen::VectorXd z = apply_m(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= config.max_iter; ++it) {
    const Eigen::VectorXd ap = apply_a(p);
    const double pap = p.dot(ap);
    if (!(std::abs(pap) > 0.0)) throw Breakdown("CG breakdown: p^T A p vanished");
    const double alpha = rz / pap;
    out.solution += alpha * p;
    r -= alpha * ap;
    const double r_norm = r.norm();
    out.residual_history.push_back(r_norm);
    out.final_residual = r_norm;
    out.iterations = it;
    if (r_norm <= tol) return out;
    z = apply_m(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw NonConvergence(describe("CG", config.max_iter, out.final_residual), config.max_iter,
                       out.final_residual);
}

KrylovResult krylov_solve(const LinearOperator& apply_a, const LinearOperator& apply_m,
                          const Eigen::VectorXd& rhs, const KrylovConfig& config) {
  return config.method == KrylovMethod::CG ? conjugate_gradient(apply_a, apply_m, rhs, config)
                                           : bicgstab(apply_a, apply_m, rhs, config);
}

KrylovResult solve_with_multigrid(const Multigrid& mg, const Eigen::VectorXd& rhs,
                                  const KrylovConfig& config) {
  const SparseMatrix& a = mg.fine_matrix();
  return krylov_solve([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x; },
                      [&](const Eigen::VectorXd& r) { return mg.vcycle(r); }, rhs, config);
}

ElasticityHierarchy build_elasticity_multigrid(const MeshHierarchy& hierarchy,
                                               const MaterialTable& mat, double traction,
                                               const TransferOperators& transfer,
                                               const MGConfig& config) {
  std::vector<SparseMatrix> matrices;
  std::vector<std::vector<char>> masks;
  for (int l = 0; l + 1 < hierarchy.num_levels(); ++l) {
    const Mesh& level = hierarchy.levels[l];
    SparseMatrix a = assemble_stiffness(level, mat);
    auto mask = bottom_dirichlet(level).mask(2 * level.num_vertices());
    apply_constraints(a, mask);
    matrices.push_back(std::move(a));
    masks.push_back(std::move(mask));
  }
  LinearSystem fine = assemble_elasticity(hierarchy.finest(), mat, traction);
  matrices.push_back(fine.matrix);
  masks.push_back(fine.constraints.mask(2 * hierarchy.finest().num_vertices()));
  Multigrid mg(std::move(matrices), std::move(masks), transfer, config);
  return {std::move(fine), std::move(mg)};
}

}  // namespace cellshape
