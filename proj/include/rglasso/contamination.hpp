#pragma once

// Gaussian sampling and the two contamination mechanisms:
//   ICM  - each cell independently replaced with probability epsilon by the
//          matching coordinate of Z ~ N(shift * 1, sigma_scale^2 * Sigma);
//   THCM - each row independently replaced with probability epsilon by the
//          fixed point k * v, v the smallest-eigenvalue direction of Sigma
//          scaled so that v' Sigma^{-1} v = 1.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string_view>

#include "rglasso/error.hpp"
#include "rglasso/matrix_core.hpp"
#include "rglasso/random.hpp"

namespace rglasso {

enum class Scheme { Clean, ICM, THCM };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Clean: return "Clean";
    case Scheme::ICM: return "ICM";
    case Scheme::THCM: return "THCM";
  }
  return "?";
}

inline std::optional<Scheme> parse_scheme(std::string_view name) {
  for (Scheme s : {Scheme::Clean, Scheme::ICM, Scheme::THCM}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

struct ContaminationSpec {
  Scheme scheme = Scheme::Clean;
  double epsilon = 0.0;
  double shift = 10.0;
  double sigma_scale = 0.2;
  double k = 100.0;
  std::uint64_t seed = 0;
};

struct ContaminatedSample {
  DataMatrix data;
  /// 1 where a cell was replaced. THCM marks every cell of a replaced row.
  Eigen::MatrixXi cell_indicator;
  /// 1 where a row has at least one replaced cell.
  Eigen::VectorXi row_indicator;
};

/// n draws from N(0, Sigma) as rows of L z with L the Cholesky factor.
inline DataMatrix mvn_sample(const SymmetricMatrix& sigma, Eigen::Index n, Rng& rng) {
  const auto factor = cholesky(sigma);
  if (!factor) throw NotPositiveDefinite("mvn_sample: covariance is not positive definite");
  const Eigen::Index p = static_cast<Eigen::Index>(sigma.dim());
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) z(i, j) = normal(rng);
  }
  return z * factor->transpose();
}

inline DataMatrix mvn_sample(const SymmetricMatrix& sigma, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  return mvn_sample(sigma, n, rng);
}

namespace detail {

inline void check_epsilon(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
}

}  // namespace detail

inline ContaminatedSample icm_contaminate(const DataMatrix& x, const ContaminationSpec& spec,
                                          const SymmetricMatrix& sigma) {
  detail::check_epsilon(spec.epsilon);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<Eigen::Index>(sigma.dim()) != p) {
    throw std::invalid_argument("icm_contaminate: Sigma dimension mismatch");
  }
  const auto factor = cholesky(sigma);
  if (!factor) throw NotPositiveDefinite("icm_contaminate: Sigma is not positive definite");

  Rng rng(spec.seed);
  std::bernoulli_distribution cell(spec.epsilon);
  std::normal_distribution<double> normal;
  ContaminatedSample out{x, Eigen::MatrixXi::Zero(n, p), Eigen::VectorXi::Zero(n)};
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) out.cell_indicator(i, j) = cell(rng) ? 1 : 0;
    for (Eigen::Index j = 0; j < p; ++j) z(j) = normal(rng);
    const Eigen::VectorXd outlier =
        Eigen::VectorXd::Constant(p, spec.shift) + spec.sigma_scale * (*factor) * z;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (out.cell_indicator(i, j)) {
        out.data(i, j) = outlier(j);
        out.row_indicator(i) = 1;
      }
    }
  }
  return out;
}

/// Eigenvector of Sigma's smallest eigenvalue, scaled so v' Sigma^{-1} v = 1,
/// with its first nonzero coordinate positive.
inline Eigen::VectorXd thcm_direction(const SymmetricMatrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma.matrix());
  const double lmin = es.eigenvalues()(0);
  if (!(lmin > 0.0)) throw NotPositiveDefinite("thcm_direction: Sigma is not positive definite");
  Eigen::VectorXd v = es.eigenvectors().col(0);
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (std::abs(v(j)) > 1e-12) {
      if (v(j) < 0.0) v = -v;
      break;
    }
  }
  // For a unit eigenvector u, u' Sigma^{-1} u = 1 / lmin.
  return v * std::sqrt(lmin);
}

inline ContaminatedSample thcm_contaminate(const DataMatrix& x, const ContaminationSpec& spec,
                                           const SymmetricMatrix& sigma) {
  detail::check_epsilon(spec.epsilon);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<Eigen::Index>(sigma.dim()) != p) {
    throw std::invalid_argument("thcm_contaminate: Sigma dimension mismatch");
  }
  const Eigen::RowVectorXd point = (spec.k * thcm_direction(sigma)).transpose();
  Rng rng(spec.seed);
  std::bernoulli_distribution row(spec.epsilon);
  ContaminatedSample out{x, Eigen::MatrixXi::Zero(n, p), Eigen::VectorXi::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    if (row(rng)) {
      out.data.row(i) = point;
      out.cell_indicator.row(i).setOnes();
      out.row_indicator(i) = 1;
    }
  }
  return out;
}

inline ContaminatedSample contaminate(const DataMatrix& x, const ContaminationSpec& spec,
                                      const SymmetricMatrix& sigma) {
  switch (spec.scheme) {
    case Scheme::Clean:
      return {x, Eigen::MatrixXi::Zero(x.rows(), x.cols()), Eigen::VectorXi::Zero(x.rows())};
    case Scheme::ICM: return icm_contaminate(x, spec, sigma);
    case Scheme::THCM: return thcm_contaminate(x, spec, sigma);
  }
  throw std::invalid_argument("contaminate: unknown scheme");
}

}  // namespace rglasso
