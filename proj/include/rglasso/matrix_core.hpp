#pragma once

// Dense symmetric matrix utilities: Cholesky, inverse, log-determinant,
// nearest positive-definite projection and the bivariate Mahalanobis distance.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "rglasso/error.hpp"

namespace rglasso {

/// n x p observation table; rows are cases, columns are variables.
using DataMatrix = Eigen::MatrixXd;

/// p x p real symmetric matrix with finite entries. The input is symmetrized
/// as (M + M^T) / 2 on construction, which is exact for symmetric input.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;

  explicit SymmetricMatrix(const Eigen::MatrixXd& m) : m_(m) {
    if (m.rows() != m.cols()) {
      throw std::invalid_argument("SymmetricMatrix: matrix is not square");
    }
    if (!m.allFinite()) {
      throw std::invalid_argument("SymmetricMatrix: non-finite entry");
    }
    m_ = 0.5 * (m + m.transpose());
  }

  static SymmetricMatrix identity(std::size_t p) {
    return SymmetricMatrix(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                                     static_cast<Eigen::Index>(p)));
  }

  static SymmetricMatrix diagonal(const Eigen::VectorXd& d) {
    return SymmetricMatrix(Eigen::MatrixXd(d.asDiagonal()));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const noexcept { return m_; }

  bool has_unit_diagonal(double tol = 1e-12) const {
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
      if (std::abs(m_(i, i) - 1.0) > tol) return false;
    }
    return true;
  }

  friend bool operator==(const SymmetricMatrix& a, const SymmetricMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  Eigen::MatrixXd m_;
};

struct PdCertificate {
  double min_eigenvalue_bound = 0.0;
  bool cholesky_success = false;
};

/// Lower Cholesky factor, or nullopt when M is not numerically positive definite.
inline std::optional<Eigen::MatrixXd> cholesky(const SymmetricMatrix& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m.matrix());
  if (llt.info() != Eigen::Success) return std::nullopt;
  return Eigen::MatrixXd(llt.matrixL());
}

inline double min_eigenvalue(const SymmetricMatrix& m) {
  if (m.dim() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline PdCertificate certify_pd(const SymmetricMatrix& m) {
  return {min_eigenvalue(m), cholesky(m).has_value()};
}

inline double logdet_pd(const SymmetricMatrix& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m.matrix());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("logdet_pd: matrix is not positive definite");
  }
  const Eigen::MatrixXd& lu = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lu.rows(); ++i) acc += std::log(lu(i, i));
  return 2.0 * acc;
}

inline SymmetricMatrix inverse_pd(const SymmetricMatrix& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m.matrix());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("inverse_pd: matrix is not positive definite");
  }
  const auto p = static_cast<Eigen::Index>(m.dim());
  return SymmetricMatrix(llt.solve(Eigen::MatrixXd::Identity(p, p)));
}

struct NearestPdOptions {
  double eig_floor = 1e-6;
  int max_iter = 100;
};

namespace detail {

inline Eigen::MatrixXd clip_spectrum(const Eigen::MatrixXd& vectors,
                                     const Eigen::VectorXd& values, double floor) {
  const Eigen::VectorXd clipped = values.cwiseMax(floor);
  Eigen::MatrixXd out = vectors * clipped.asDiagonal() * vectors.transpose();
  return 0.5 * (out + out.transpose());
}

inline bool satisfies_floor(const SymmetricMatrix& m, double floor) {
  return min_eigenvalue(m) >= floor && cholesky(m).has_value();
}

}  // namespace detail

/// Projects M onto {min eigenvalue >= eig_floor} by eigenvalue clipping. Inputs
/// with a unit diagonal are rescaled back to a unit diagonal after clipping,
/// with the clip level raised so the rescaled matrix still meets the floor.
/// Matrices that already meet the floor are returned unchanged.
inline SymmetricMatrix nearest_pd(const SymmetricMatrix& m, const NearestPdOptions& opt = {}) {
  if (m.dim() == 0 || detail::satisfies_floor(m, opt.eig_floor)) return m;

  const bool unit_diagonal = m.has_unit_diagonal();
  // A small margin keeps the reconstructed spectrum above the floor after rounding.
  const double target = opt.eig_floor * (1.0 + 1e-6);
  Eigen::MatrixXd x = m.matrix();
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x);
    Eigen::MatrixXd candidate;
    if (unit_diagonal) {
      // After D^{-1/2} C D^{-1/2}, the smallest eigenvalue is at least
      // clip / max(diag C), so raise the clip level until that bound holds.
      double clip = target;
      for (int k = 0; k < 50; ++k) {
        candidate = detail::clip_spectrum(es.eigenvectors(), es.eigenvalues(), clip);
        const double needed = target * candidate.diagonal().maxCoeff();
        if (clip >= needed) break;
        clip = needed;
      }
      const Eigen::VectorXd inv_sd = candidate.diagonal().cwiseSqrt().cwiseInverse();
      candidate = inv_sd.asDiagonal() * candidate * inv_sd.asDiagonal();
      candidate.diagonal().setOnes();
    } else {
      candidate = detail::clip_spectrum(es.eigenvectors(), es.eigenvalues(), target);
    }
    SymmetricMatrix out(candidate);
    if (detail::satisfies_floor(out, opt.eig_floor)) return out;
    x = out.matrix();
  }
  throw ConvergenceFailure(opt.max_iter, min_eigenvalue(SymmetricMatrix(x)),
                           "nearest_pd: no positive-definite projection after " +
                               std::to_string(opt.max_iter) + " iterations");
}

/// Clamp applied to |r| when a 2x2 correlation matrix is (near) singular.
inline constexpr double kCorrelationClamp = 1.0 - 1e-10;

/// Squared Mahalanobis distance z^T A^{-1} z for a 2x2 correlation matrix with
/// off-diagonal `r`. |r| >= 1 is clamped to 1 - 1e-10.
inline double mahalanobis2_bivariate(double z1, double z2, double r) {
  r = std::clamp(r, -kCorrelationClamp, kCorrelationClamp);
  const double d = (z1 * z1 - 2.0 * r * z1 * z2 + z2 * z2) / (1.0 - r * r);
  return std::max(d, 0.0);
}

inline double mahalanobis2_bivariate(std::array<double, 2> point, const SymmetricMatrix& a) {
  if (a.dim() != 2) throw std::invalid_argument("mahalanobis2_bivariate: A must be 2x2");
  return mahalanobis2_bivariate(point[0], point[1], a(0, 1));
}

}  // namespace rglasso
