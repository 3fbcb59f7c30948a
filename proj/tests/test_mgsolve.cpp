#include <cmath>

#include <Eigen/SparseLU>

#include "cellshape/descent.hpp"
#include "cellshape/mgsolve.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cellshape;
using namespace cellshape::testing;

namespace {

double rel_diff(const SparseMatrix& a, const SparseMatrix& b) {
  return Eigen::MatrixXd(a - b).norm() / Eigen::MatrixXd(a).norm();
}

Eigen::VectorXd linear_field(const Mesh& m) {
  Eigen::VectorXd out(2 * m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) {
    const Point x = m.vertex(i);
    out[2 * i] = 0.3 + 1.7 * x.x() - 0.4 * x.y();
    out[2 * i + 1] = -1.1 + 0.2 * x.x() + 2.5 * x.y();
  }
  return out;
}

Multigrid elasticity_mg(const MeshHierarchy& h, const TransferOperators& tr) {
  return build_elasticity_multigrid(h, make_layered_materials(2), 0.1, tr).mg;
}

}  // namespace

TEST_CASE("config validation") {
  MGConfig mg;
  mg.pre_smooth = 0;
  CHECK_THROWS_AS(mg.validate(), ConfigError);
  mg = {};
  mg.damping = 1.5;
  CHECK_THROWS_AS(mg.validate(), ConfigError);
  KrylovConfig k;
  k.rel_tol = 0.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);
}

TEST_CASE("prolongation patch test and stencil sums") {
  const auto h = generate_composite_domain(2, 2, 0.3, 2);
  const auto tr = TransferOperators::from_hierarchy(h);
  REQUIRE(tr.num_levels() == 3);
  for (int l = 0; l + 1 < h.num_levels(); ++l) {
    const SparseMatrix& p = tr.prolongation[l];
    CHECK((p * linear_field(h.levels[l]) - linear_field(h.levels[l + 1])).cwiseAbs().maxCoeff() <=
          1e-14);
    // Column sums: 1 for the inherited copy plus 1/2 per incident coarse edge.
    std::vector<int> degree(h.levels[l].num_vertices(), 0);
    for (const auto& e : h.parents[l])
      if (!e.inherited()) {
        ++degree[e.a];
        ++degree[e.b];
      }
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p.rows());
    const Eigen::VectorXd sums = p.transpose() * ones;
    for (int v = 0; v < h.levels[l].num_vertices(); ++v) {
      CHECK(sums[2 * v] == doctest::Approx(1.0 + 0.5 * degree[v]));
      CHECK(sums[2 * v + 1] == doctest::Approx(1.0 + 0.5 * degree[v]));
    }
  }
}

TEST_CASE("Galerkin and re-discretized coarse operators coincide on nested meshes") {
  const auto h = generate_composite_domain(2, 2, 0.3, 1);
  const auto tr = TransferOperators::from_hierarchy(h);
  const auto mat = make_layered_materials(2);
  const auto redisc = build_hierarchy_matrices(h, [&](const Mesh& m) { return assemble_stiffness(m, mat); });
  const SparseMatrix gal = galerkin_coarsen(redisc[1], tr.prolongation[0]);
  CHECK(rel_diff(redisc[0], gal) <= 1e-12);

  const Eigen::VectorXd lin = linear_field(h.levels[0]);
  CHECK((redisc[0] * lin - gal * lin).norm() <= 1e-12 * (redisc[0] * lin).norm() + 1e-14);

  // gamma == 0: Galerkin chain of the Jacobian equals the re-discretized metric.
  const PenaltyConfig cfg;
  const NodalField zero(h.finest().num_vertices());
  const auto chain = galerkin_hierarchy(metric_jacobian(h.finest(), zero, cfg), tr);
  const SparseMatrix coarse_metric = metric_matrix(h.levels[0], cfg);
  const Eigen::VectorXd x = random_vector(coarse_metric.cols(), 4);
  CHECK((chain[0] * x - coarse_metric * x).norm() <= 1e-10 * (coarse_metric * x).norm());
  CHECK(rel_diff(chain[1], metric_matrix(h.finest(), cfg)) == 0.0);
}

TEST_CASE("V-cycle is a fixed linear operator") {
  const auto h = generate_composite_domain(2, 2, 0.3, 2);
  const auto tr = TransferOperators::from_hierarchy(h);
  const Multigrid mg = elasticity_mg(h, tr);
  const Eigen::Index n = mg.fine_matrix().rows();
  CHECK(mg.vcycle(Eigen::VectorXd::Zero(n)).norm() == 0.0);
  const Eigen::VectorXd r1 = random_vector(n, 1), r2 = random_vector(n, 2);
  const Eigen::VectorXd lhs = mg.vcycle(2.5 * r1 - 0.75 * r2);
  const Eigen::VectorXd rhs = 2.5 * mg.vcycle(r1) - 0.75 * mg.vcycle(r2);
  CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
}

TEST_CASE("single-level hierarchy is an exact solve") {
  const auto h = generate_composite_domain(2, 2, 0.3, 0);
  const auto tr = TransferOperators::from_hierarchy(h);
  auto sys = build_elasticity_multigrid(h, make_layered_materials(2), 0.1, tr);
  REQUIRE(sys.mg.num_levels() == 1);
  const Eigen::VectorXd x = sys.mg.vcycle(sys.fine.rhs);
  CHECK((x - solve_direct(sys.fine)).norm() <= 1e-12 * x.norm());
}

TEST_CASE("V-cycle contracts the energy-norm error") {
  const auto h = generate_composite_domain(2, 2, 0.3, 2);
  const auto tr = TransferOperators::from_hierarchy(h);
  const Multigrid mg = elasticity_mg(h, tr);
  const SparseMatrix& a = mg.fine_matrix();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu{Eigen::SparseMatrix<double>(a)};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Eigen::VectorXd b = random_vector(a.rows(), seed);
    const Eigen::VectorXd exact = lu.solve(b);
    const Eigen::VectorXd e1 = exact - mg.vcycle(b);
    const double before = std::sqrt(exact.dot(a * exact));
    const double after = std::sqrt(e1.dot(a * e1));
    CHECK(after <= 0.5 * before);
  }
}

TEST_CASE("singular coarse matrix is reported") {
  const auto h = generate_composite_domain(1, 1, 0.3, 0);
  const auto tr = TransferOperators::from_hierarchy(h);
  const int n = 2 * h.finest().num_vertices();
  SparseMatrix zero(n, n);
  CHECK_THROWS_AS(Multigrid({zero}, {std::vector<char>(n, 0)}, tr), SolverError);
}

TEST_CASE("BiCGStab basics") {
  const LinearOperator id = [](const Eigen::VectorXd& x) { return x; };
  KrylovConfig cfg;
  cfg.rel_tol = 1e-14;
  cfg.abs_tol = 1e-300;
  const auto zero = bicgstab(id, id, Eigen::VectorXd::Zero(2), cfg);
  CHECK(zero.iterations == 0);
  CHECK(zero.solution.norm() == 0.0);

  const LinearOperator diag = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(Eigen::Vector2d(2.0 * x[0], 5.0 * x[1]));
  };
  const auto r = bicgstab(diag, id, Eigen::Vector2d(1.0, 1.0), cfg);
  CHECK(r.iterations <= 2);
  CHECK(std::abs(r.solution[0] - 0.5) <= 1e-14);
  CHECK(std::abs(r.solution[1] - 0.2) <= 1e-14);
}

TEST_CASE("Krylov + multigrid agrees with the direct solve; CG cross-check") {
  const auto h = generate_composite_domain(2, 2, 0.3, 2);
  const auto tr = TransferOperators::from_hierarchy(h);
  auto sys = build_elasticity_multigrid(h, make_layered_materials(2), 0.1, tr);
  const Eigen::VectorXd direct = solve_direct(sys.fine);
  KrylovConfig cfg;
  cfg.abs_tol = 1e-30;
  const auto bi = solve_with_multigrid(sys.mg, sys.fine.rhs, cfg);
  CHECK((bi.solution - direct).cwiseAbs().maxCoeff() <= 1e-8 * direct.cwiseAbs().maxCoeff());
  CHECK(bi.final_residual <= cfg.rel_tol * bi.initial_residual);
  CHECK(bi.residual_history.size() == static_cast<std::size_t>(bi.iterations + 1));
  cfg.method = KrylovMethod::CG;
  const auto cg = solve_with_multigrid(sys.mg, sys.fine.rhs, cfg);
  CHECK((cg.solution - direct).cwiseAbs().maxCoeff() <= 1e-8 * direct.cwiseAbs().maxCoeff());
}

TEST_CASE("iteration cap raises NonConvergence") {
  const auto h = generate_composite_domain(2, 2, 0.3, 2);
  const auto tr = TransferOperators::from_hierarchy(h);
  auto sys = build_elasticity_multigrid(h, make_layered_materials(2), 0.1, tr);
  KrylovConfig cfg;
  cfg.max_iter = 1;
  cfg.abs_tol = 1e-30;
  try {
    (void)solve_with_multigrid(sys.mg, sys.fine.rhs, cfg);
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& e) {
    CHECK(e.iterations() == 1);
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("elasticity iteration counts are mesh independent") {
  std::vector<int> its;
  for (int refinements : {1, 2, 3}) {
    const auto h = generate_composite_domain(2, 2, 0.3, refinements);
    const auto tr = TransferOperators::from_hierarchy(h);
    auto sys = build_elasticity_multigrid(h, make_layered_materials(2), 0.1, tr);
    its.push_back(solve_with_multigrid(sys.mg, sys.fine.rhs, KrylovConfig{}).iterations);
  }
  const auto [lo, hi] = std::minmax_element(its.begin(), its.end());
  CHECK(*hi <= 2 * *lo);
}
