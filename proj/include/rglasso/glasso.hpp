#pragma once

// l1-penalized Gaussian log-likelihood:
//   minimize tr(U S) - log det U + lambda * ||U||_1  over symmetric U > 0.
//
// The solver is primal block coordinate descent over columns. For column j,
// with the remaining block U11 fixed, the optimal diagonal entry has a closed
// form and the off-diagonal column solves the lasso
//   min_b  1/2 b' (w U11^{-1}) b + s12' b + lambda ||b||_1,   w = s_jj (+ lambda),
// which is done by cyclic coordinate descent. Each block step is an exact
// minimization, so every iterate is positive definite and the objective never
// increases. The running inverse W = U^{-1} is updated in O(p^2) per column
// and refreshed from a Cholesky factorization after every sweep.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rglasso/edges.hpp"
#include "rglasso/error.hpp"
#include "rglasso/matrix_core.hpp"

namespace rglasso {

struct GlassoOptions {
  bool penalize_diagonal = true;
  double tol = 1e-4;
  int max_iter = 200;
  /// Iteration cap for each column's lasso subproblem.
  int max_inner_iter = 10000;
};

struct GlassoProblem {
  SymmetricMatrix sigma_hat;
  double lambda = 0.0;
  GlassoOptions options;
};

struct PrecisionEstimate {
  SymmetricMatrix omega;
  double lambda_used = 0.0;
  double objective_value = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  /// Objective after each outer sweep, starting with the initial iterate.
  std::vector<double> objective_trace;
};

/// Thrown when the sweep budget runs out; carries the last iterate.
class GlassoNotConverged : public ConvergenceFailure {
 public:
  GlassoNotConverged(PrecisionEstimate last, const std::string& what)
      : ConvergenceFailure(last.iterations, last.kkt_residual, what), last_(std::move(last)) {}

  const PrecisionEstimate& last_iterate() const noexcept { return last_; }

 private:
  PrecisionEstimate last_;
};

namespace detail {

inline double l1_penalty(const Eigen::MatrixXd& u, bool penalize_diagonal) {
  double acc = u.cwiseAbs().sum();
  if (!penalize_diagonal) acc -= u.diagonal().cwiseAbs().sum();
  return acc;
}

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// KKT residual given W = U^{-1}: the max over entries of the distance from
// S - W to -lambda * (subdifferential of |u_ij|).
inline double kkt_residual_from_inverse(const Eigen::MatrixXd& u, const Eigen::MatrixXd& w,
                                        const Eigen::MatrixXd& s, double lambda,
                                        bool penalize_diagonal) {
  double worst = 0.0;
  const Eigen::Index p = u.rows();
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < p; ++i) {
      const double g = s(i, j) - w(i, j);
      const double pen = (i == j && !penalize_diagonal) ? 0.0 : lambda;
      double r;
      if (u(i, j) > 0.0) {
        r = std::abs(g + pen);
      } else if (u(i, j) < 0.0) {
        r = std::abs(g - pen);
      } else {
        r = std::max(0.0, std::abs(g) - pen);
      }
      worst = std::max(worst, r);
    }
  }
  return worst;
}

}  // namespace detail

/// tr(U S) - log det U + lambda * sum |u_ij| (diagonal included when penalized).
inline double glasso_objective(const SymmetricMatrix& u, const SymmetricMatrix& sigma_hat,
                               double lambda, bool penalize_diagonal = true) {
  if (u.dim() != sigma_hat.dim()) throw std::invalid_argument("glasso_objective: dim mismatch");
  const double trace = (u.matrix().cwiseProduct(sigma_hat.matrix())).sum();
  return trace - logdet_pd(u) + lambda * detail::l1_penalty(u.matrix(), penalize_diagonal);
}

/// Optimality residual of U for the penalized problem, computed from a fresh
/// inverse of U.
inline double glasso_kkt_residual(const SymmetricMatrix& u, const SymmetricMatrix& sigma_hat,
                                  double lambda, bool penalize_diagonal = true) {
  const SymmetricMatrix w = inverse_pd(u);
  return detail::kkt_residual_from_inverse(u.matrix(), w.matrix(), sigma_hat.matrix(), lambda,
                                           penalize_diagonal);
}

/// Solves the penalized problem, optionally warm-started from a PD iterate of
/// the same dimension.
inline PrecisionEstimate solve_glasso(const GlassoProblem& problem,
                                      const std::optional<SymmetricMatrix>& warm_start = {}) {
  const GlassoOptions& opt = problem.options;
  const Eigen::MatrixXd& s = problem.sigma_hat.matrix();
  const double lambda = problem.lambda;
  const Eigen::Index p = s.rows();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("solve_glasso: lambda must be finite and nonnegative");
  }
  if (!(opt.tol > 0.0) || opt.max_iter < 1) {
    throw std::invalid_argument("solve_glasso: tol must be positive and max_iter >= 1");
  }
  if (p == 0) throw std::invalid_argument("solve_glasso: empty covariance");
  if (lambda == 0.0 && !cholesky(problem.sigma_hat)) {
    throw NotPositiveDefinite(
        "solve_glasso: lambda = 0 with a singular covariance has no minimizer");
  }
  const double diag_shift = opt.penalize_diagonal ? lambda : 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(s(j, j) + diag_shift > 0.0)) {
      throw NotPositiveDefinite("solve_glasso: nonpositive diagonal in the covariance");
    }
  }

  Eigen::MatrixXd u;
  if (warm_start && static_cast<Eigen::Index>(warm_start->dim()) == p &&
      cholesky(*warm_start)) {
    u = warm_start->matrix();
  } else {
    u = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) u(j, j) = 1.0 / (s(j, j) + diag_shift);
  }

  auto objective_of = [&](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) logdet += std::log(llt.matrixLLT()(i, i));
    return u.cwiseProduct(s).sum() - 2.0 * logdet +
           lambda * detail::l1_penalty(u, opt.penalize_diagonal);
  };

  PrecisionEstimate est;
  est.lambda_used = lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(u);
  Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(p, p));
  w = 0.5 * (w + w.transpose());
  est.objective_trace.push_back(objective_of(llt));
  est.kkt_residual = detail::kkt_residual_from_inverse(u, w, s, lambda, opt.penalize_diagonal);

  const Eigen::Index m = p - 1;
  std::vector<Eigen::Index> others(static_cast<std::size_t>(m));
  Eigen::MatrixXd h(m, m);
  Eigen::VectorXd s12(m), beta(m), grad(m), w12(m);
  const double inner_tol = 1e-2 * opt.tol;

  bool converged = (p == 1);
  if (p == 1) {
    u(0, 0) = 1.0 / (s(0, 0) + diag_shift);
    w(0, 0) = s(0, 0) + diag_shift;
    est.kkt_residual = detail::kkt_residual_from_inverse(u, w, s, lambda, opt.penalize_diagonal);
    est.objective_trace.push_back(objective_of(Eigen::LLT<Eigen::MatrixXd>(u)));
  }

  int sweep = 0;
  while (!converged && sweep < opt.max_iter) {
    ++sweep;
    double change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index a = 0, k = 0; a < p; ++a) {
        if (a != j) others[static_cast<std::size_t>(k++)] = a;
      }
      const double wjj = w(j, j);
      const double a_jj = s(j, j) + diag_shift;
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index ra = others[static_cast<std::size_t>(a)];
        w12(a) = w(ra, j);
        s12(a) = s(ra, j);
        beta(a) = u(ra, j);
      }
      // H = a_jj * U11^{-1}, with U11^{-1} = W11 - w12 w12' / w_jj.
      for (Eigen::Index b = 0; b < m; ++b) {
        const Eigen::Index rb = others[static_cast<std::size_t>(b)];
        for (Eigen::Index a = 0; a < m; ++a) {
          const Eigen::Index ra = others[static_cast<std::size_t>(a)];
          h(a, b) = a_jj * (w(ra, rb) - w12(a) * w12(b) / wjj);
        }
      }
      h = 0.5 * (h + h.transpose());
      grad.noalias() = h * beta;

      for (int inner = 0; inner < opt.max_inner_iter; ++inner) {
        double worst = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
          const double hkk = h(k, k);
          const double g = s12(k) + grad(k) - hkk * beta(k);
          const double next = -detail::soft_threshold(g, lambda) / hkk;
          const double delta = next - beta(k);
          if (delta != 0.0) {
            grad.noalias() += delta * h.col(k);
            beta(k) = next;
            worst = std::max(worst, std::abs(delta) * hkk);
          }
        }
        if (worst <= inner_tol) break;
      }

      // Closed-form diagonal and block-inverse update of W.
      const double quad = beta.dot(grad) / a_jj;
      const double new_ujj = quad + 1.0 / a_jj;
      change += std::abs(new_ujj - u(j, j));
      u(j, j) = new_ujj;
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index ra = others[static_cast<std::size_t>(a)];
        change += 2.0 * std::abs(beta(a) - u(ra, j));
        u(ra, j) = beta(a);
        u(j, ra) = beta(a);
      }
      // U11^{-1} = H / a_jj; new W11 = U11^{-1} + v v' / a_jj with v = H beta.
      for (Eigen::Index b = 0; b < m; ++b) {
        const Eigen::Index rb = others[static_cast<std::size_t>(b)];
        for (Eigen::Index a = 0; a < m; ++a) {
          const Eigen::Index ra = others[static_cast<std::size_t>(a)];
          w(ra, rb) = (h(a, b) + grad(a) * grad(b)) / a_jj;
        }
        w(rb, j) = -grad(b);
        w(j, rb) = -grad(b);
      }
      w(j, j) = a_jj;
    }

    llt.compute(u);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite("solve_glasso: iterate lost positive definiteness");
    }
    w = llt.solve(Eigen::MatrixXd::Identity(p, p));
    w = 0.5 * (w + w.transpose());
    est.objective_trace.push_back(objective_of(llt));
    est.kkt_residual = detail::kkt_residual_from_inverse(u, w, s, lambda, opt.penalize_diagonal);
    const double mean_change = change / static_cast<double>(p * p);
    converged = mean_change <= opt.tol && est.kkt_residual <= opt.tol;
  }

  est.iterations = sweep;
  est.omega = SymmetricMatrix(u);
  est.objective_value = est.objective_trace.back();
  if (!converged) {
    throw GlassoNotConverged(std::move(est), "solve_glasso: no convergence after " +
                                                 std::to_string(opt.max_iter) + " sweeps");
  }
  return est;
}

inline PrecisionEstimate solve_glasso(const SymmetricMatrix& sigma_hat, double lambda,
                                      const GlassoOptions& options = {}) {
  return solve_glasso(GlassoProblem{sigma_hat, lambda, options});
}

/// Solves along a lambda sequence (normally descending), warm-starting each
/// problem from the previous solution.
inline std::vector<PrecisionEstimate> solve_glasso_path(const SymmetricMatrix& sigma_hat,
                                                        std::span<const double> lambdas,
                                                        const GlassoOptions& options = {}) {
  std::vector<PrecisionEstimate> out;
  out.reserve(lambdas.size());
  std::optional<SymmetricMatrix> warm;
  for (double lambda : lambdas) {
    out.push_back(solve_glasso(GlassoProblem{sigma_hat, lambda, options}, warm));
    warm = out.back().omega;
  }
  return out;
}

/// Off-diagonal support {(i, l), i < l : |omega_il| > zero_tol}.
inline EdgeSet edge_set(const SymmetricMatrix& omega, double zero_tol = 1e-8) {
  EdgeSet edges;
  for (std::size_t i = 0; i < omega.dim(); ++i) {
    for (std::size_t l = i + 1; l < omega.dim(); ++l) {
      if (std::abs(omega(i, l)) > zero_tol) edges.insert(Edge{i, l});
    }
  }
  return edges;
}

inline EdgeSet edge_set(const PrecisionEstimate& est, double zero_tol = 1e-8) {
  return edge_set(est.omega, zero_tol);
}

}  // namespace rglasso
