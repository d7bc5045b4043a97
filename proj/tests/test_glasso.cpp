#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "rglasso/glasso.hpp"
#include "rglasso/model_zoo.hpp"

using namespace rglasso;

namespace {

SymmetricMatrix random_cov(std::mt19937_64& rng, int p, int n) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = normal(rng);
  }
  return SymmetricMatrix(Eigen::MatrixXd(x.transpose() * x / n));
}

// Objective straight from its definition, via an eigen-decomposition.
double objective_oracle(const Eigen::MatrixXd& u, const Eigen::MatrixXd& s, double lambda, bool diag) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(u);
  double l1 = 0.0;
  for (int i = 0; i < u.rows(); ++i) {
    for (int j = 0; j < u.cols(); ++j) {
      if (i != j || diag) l1 += std::abs(u(i, j));
    }
  }
  return (u * s).trace() - es.eigenvalues().array().log().sum() + lambda * l1;
}

}  // namespace

TEST_CASE("objective at simple points", "[glasso]") {
  const auto id = SymmetricMatrix::identity(3);
  CHECK(glasso_objective(id, id, 0.0, true) == Catch::Approx(3.0));
  CHECK(glasso_objective(id, id, 1.0, true) == Catch::Approx(6.0));
  CHECK(glasso_objective(id, id, 1.0, false) == Catch::Approx(3.0));

  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const auto u = random_cov(rng, 5, 12);
    const auto s = random_cov(rng, 5, 12);
    CHECK(std::abs(glasso_objective(u, s, 0.3, true) - objective_oracle(u.matrix(), s.matrix(), 0.3, true)) < 1e-10);
    CHECK(std::abs(glasso_objective(u, s, 0.3, false) - objective_oracle(u.matrix(), s.matrix(), 0.3, false)) < 1e-10);
  }
}

TEST_CASE("lambda = 0 recovers the inverse", "[glasso]") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const int p = 3 + rep % 8;
    const auto s = random_cov(rng, p, 3 * p);
    const auto est = solve_glasso(s, 0.0);
    const Eigen::MatrixXd inv = inverse_pd(s).matrix();
    CHECK((est.omega.matrix() - inv).norm() / inv.norm() < 1e-4);
  }
  Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(3, 3);
  CHECK_THROWS_AS(solve_glasso(SymmetricMatrix(singular), 0.0), NotPositiveDefinite);
  CHECK_THROWS_AS(solve_glasso(SymmetricMatrix::identity(2), -1.0), std::invalid_argument);
}

TEST_CASE("identity input with unpenalized diagonal", "[glasso]") {
  GlassoOptions opt;
  opt.penalize_diagonal = false;
  const auto est = solve_glasso(SymmetricMatrix::identity(4), 0.1, opt);
  CHECK((est.omega.matrix() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(edge_set(est).empty());
}

TEST_CASE("large lambda gives a diagonal estimate", "[glasso]") {
  std::mt19937_64 rng(3);
  GlassoOptions opt;
  opt.penalize_diagonal = false;
  for (int rep = 0; rep < 10; ++rep) {
    const auto s = random_cov(rng, 6, 20);
    double lmax = 0.0;
    for (int i = 0; i < 6; ++i) {
      for (int j = i + 1; j < 6; ++j) lmax = std::max(lmax, std::abs(s(i, j)));
    }
    const auto est = solve_glasso(s, lmax, opt);
    CHECK(edge_set(est).empty());
    CHECK(est.kkt_residual <= 1e-4);
    // The diagonal solution is 1 / s_ii.
    for (int i = 0; i < 6; ++i) CHECK(est.omega(i, i) == Catch::Approx(1.0 / s(i, i)).epsilon(1e-6));
  }
}

TEST_CASE("KKT residual, monotone objective and PD iterates", "[glasso]") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const int p = 3 + rep % 8;
    const auto s = random_cov(rng, p, 2 * p);
    std::uniform_real_distribution<double> lam(0.01, 0.5);
    for (bool diag : {true, false}) {
      GlassoOptions opt;
      opt.penalize_diagonal = diag;
      const double lambda = lam(rng);
      const auto est = solve_glasso(s, lambda, opt);
      CHECK(est.kkt_residual <= 1e-4);
      CHECK(glasso_kkt_residual(est.omega, s, lambda, diag) <= 1e-4);
      CHECK(cholesky(est.omega));
      for (std::size_t t = 1; t < est.objective_trace.size(); ++t) {
        CHECK(est.objective_trace[t] <= est.objective_trace[t - 1] + 1e-10);
      }
      CHECK(est.objective_value == Catch::Approx(glasso_objective(est.omega, s, lambda, diag)).epsilon(1e-10));
    }
  }
}

TEST_CASE("singular covariance with positive lambda", "[glasso]") {
  std::mt19937_64 rng(6);
  const auto s = random_cov(rng, 10, 4);  // rank 4
  const auto est = solve_glasso(s, 0.1);
  CHECK(cholesky(est.omega));
  CHECK(est.kkt_residual <= 1e-4);
}

TEST_CASE("warm starts and paths agree with cold solves", "[glasso]") {
  std::mt19937_64 rng(7);
  const auto s = random_cov(rng, 8, 30);
  const std::vector<double> lambdas{0.4, 0.2, 0.1, 0.05};
  const auto path = solve_glasso_path(s, lambdas);
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    const auto cold = solve_glasso(s, lambdas[l]);
    CHECK(std::abs(path[l].objective_value - cold.objective_value) < 1e-6);
  }
}

TEST_CASE("sweep budget exhaustion carries the last iterate", "[glasso]") {
  std::mt19937_64 rng(8);
  const auto s = random_cov(rng, 12, 15);
  GlassoOptions opt;
  opt.max_iter = 1;
  opt.tol = 1e-14;
  try {
    solve_glasso(s, 0.01, opt);
    FAIL("expected GlassoNotConverged");
  } catch (const GlassoNotConverged& e) {
    CHECK(e.iterations() == 1);
    CHECK(cholesky(e.last_iterate().omega));
  }
}

TEST_CASE("edge sets", "[glasso]") {
  CHECK(edge_set(SymmetricMatrix::diagonal(Eigen::Vector3d(1, 2, 3))).empty());
  const auto ar = ar1_model(6);
  const auto edges = edge_set(ar.omega);
  EdgeSet chain;
  for (std::size_t i = 0; i + 1 < 6; ++i) chain.insert(make_edge(i, i + 1));
  CHECK(edges == chain);
  CHECK(edge_set(ar.omega, 1e6).empty());
}
