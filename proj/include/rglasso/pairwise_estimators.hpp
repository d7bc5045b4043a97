#pragma once

// Plug-in covariance estimators for the penalized solver: the sample
// covariance, the two-step adjusted Winsorization estimator, GK pairwise
// covariances with Qn / tau scales, and rank/sign correlations scaled by Qn.

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rglasso/error.hpp"
#include "rglasso/matrix_core.hpp"
#include "rglasso/robust_scale.hpp"

namespace rglasso {

enum class EstimatorKind {
  Glasso,
  RGlassoWinsor,
  RGlassoQn,
  RGlassoTau,
  RGlassoGauss,
  RGlassoSpearman,
  RGlassoQuadrant,
};

inline constexpr std::array<EstimatorKind, 7> kAllEstimators = {
    EstimatorKind::Glasso,       EstimatorKind::RGlassoWinsor,   EstimatorKind::RGlassoQn,
    EstimatorKind::RGlassoTau,   EstimatorKind::RGlassoGauss,    EstimatorKind::RGlassoSpearman,
    EstimatorKind::RGlassoQuadrant};

inline std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Glasso: return "Glasso";
    case EstimatorKind::RGlassoWinsor: return "RGlassoWinsor";
    case EstimatorKind::RGlassoQn: return "RGlassoQn";
    case EstimatorKind::RGlassoTau: return "RGlassoTau";
    case EstimatorKind::RGlassoGauss: return "RGlassoGauss";
    case EstimatorKind::RGlassoSpearman: return "RGlassoSpearman";
    case EstimatorKind::RGlassoQuadrant: return "RGlassoQuadrant";
  }
  return "?";
}

inline std::optional<EstimatorKind> parse_estimator(std::string_view name) {
  for (EstimatorKind k : kAllEstimators) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

struct WinsorConfig {
  double c1 = 2.0;
  /// 95% quantile of the chi-square distribution with 2 degrees of freedom.
  double mahalanobis_cutoff = 5.99;
  /// Apply the step-2 shrinkage to the raw columns instead of the
  /// median/MAD standardized ones before correlating.
  bool shrink_raw = false;
};

struct PairwiseResult {
  SymmetricMatrix correlation;
  std::vector<double> scales;
};

namespace detail {

inline std::span<const double> column(const DataMatrix& data, Eigen::Index j) {
  return {data.col(j).data(), static_cast<std::size_t>(data.rows())};
}

// Pearson correlation; 0 when either input has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline void require_rows(const DataMatrix& data, Eigen::Index min_rows, const char* who) {
  if (data.rows() < min_rows) {
    throw std::invalid_argument(std::string(who) + ": need at least " +
                                std::to_string(min_rows) + " rows");
  }
  if (!data.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite data");
}

inline DegenerateColumn degenerate(std::size_t j) {
  return DegenerateColumn(j, "column " + std::to_string(j) + " has zero robust scale");
}

}  // namespace detail

/// (x - median) / mad, entrywise.
inline std::vector<double> standardize_column(std::span<const double> col,
                                              std::size_t column_index = 0) {
  const double m = median(col);
  const double s = mad(col);
  if (s == 0.0) throw detail::degenerate(column_index);
  std::vector<double> out(col.size());
  std::transform(col.begin(), col.end(), out.begin(), [=](double v) { return (v - m) / s; });
  return out;
}

inline double huber_psi(double x, double c) { return std::min(std::max(-c, x), c); }

/// Bivariate adjusted Winsorization of two standardized columns. Points in the
/// more populated quadrant pair are clipped at c1, the others at
/// c2 = sqrt(n2 / n1) * c1. Points on an axis count toward the major pair, and
/// a tie makes {Q1, Q3} the major pair.
inline std::pair<std::vector<double>, std::vector<double>> adjusted_winsorize_pair(
    std::span<const double> xj, std::span<const double> xk, const WinsorConfig& cfg = {}) {
  if (xj.size() != xk.size()) {
    throw std::invalid_argument("adjusted_winsorize_pair: length mismatch");
  }
  const std::size_t n = xj.size();
  std::size_t odd = 0;   // Q1 or Q3
  std::size_t even = 0;  // Q2 or Q4
  for (std::size_t i = 0; i < n; ++i) {
    const double prod = xj[i] * xk[i];
    if (prod > 0.0) ++odd;
    if (prod < 0.0) ++even;
  }
  const bool major_is_odd = odd >= even;
  const std::size_t n1 = n - (major_is_odd ? even : odd);
  const std::size_t n2 = n - n1;
  const double c2 = (n1 == 0) ? cfg.c1
                              : std::sqrt(static_cast<double>(n2) / static_cast<double>(n1)) *
                                    cfg.c1;

  std::pair<std::vector<double>, std::vector<double>> out{std::vector<double>(n),
                                                          std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double prod = xj[i] * xk[i];
    const bool minor = major_is_odd ? (prod < 0.0) : (prod > 0.0);
    const double c = minor ? c2 : cfg.c1;
    out.first[i] = huber_psi(xj[i], c);
    out.second[i] = huber_psi(xk[i], c);
  }
  return out;
}

/// Step one: pairwise correlations of adjusted-Winsorized standardized columns.
inline PairwiseResult initial_correlation_matrix(const DataMatrix& data,
                                                 const WinsorConfig& cfg = {}) {
  detail::require_rows(data, 2, "initial_correlation_matrix");
  const Eigen::Index p = data.cols();
  std::vector<std::vector<double>> z(static_cast<std::size_t>(p));
  std::vector<double> scales(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto col = detail::column(data, j);
    z[j] = standardize_column(col, static_cast<std::size_t>(j));
    scales[j] = mad(col);
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      const auto [vj, vk] = adjusted_winsorize_pair(z[j], z[k], cfg);
      r(j, k) = r(k, j) = detail::pearson(vj, vk);
    }
  }
  return {SymmetricMatrix(r), std::move(scales)};
}

/// Per-point shrinkage factors min(sqrt(cutoff / D), 1), where D is the squared
/// Mahalanobis distance of the standardized point under correlation `r`.
inline std::vector<double> mahalanobis_shrinkage(std::span<const double> zj,
                                                 std::span<const double> zk, double r,
                                                 double cutoff) {
  std::vector<double> f(zj.size(), 1.0);
  for (std::size_t i = 0; i < zj.size(); ++i) {
    const double d = mahalanobis2_bivariate(zj[i], zk[i], r);
    if (d > cutoff) f[i] = std::sqrt(cutoff / d);
  }
  return f;
}

/// Step two: shrinks each standardized point toward the origin onto the
/// ellipse {D = cutoff}. Points inside the ellipse are left alone.
inline std::pair<std::vector<double>, std::vector<double>> multivariate_winsorize_pair(
    std::span<const double> zj, std::span<const double> zk, double r, double cutoff) {
  if (zj.size() != zk.size()) {
    throw std::invalid_argument("multivariate_winsorize_pair: length mismatch");
  }
  const auto f = mahalanobis_shrinkage(zj, zk, r, cutoff);
  std::pair<std::vector<double>, std::vector<double>> out{std::vector<double>(zj.size()),
                                                          std::vector<double>(zj.size())};
  for (std::size_t i = 0; i < zj.size(); ++i) {
    out.first[i] = f[i] * zj[i];
    out.second[i] = f[i] * zk[i];
  }
  return out;
}

inline std::pair<std::vector<double>, std::vector<double>> multivariate_winsorize_pair(
    std::span<const double> zj, std::span<const double> zk, const SymmetricMatrix& a,
    double cutoff) {
  if (a.dim() != 2) throw std::invalid_argument("multivariate_winsorize_pair: A must be 2x2");
  return multivariate_winsorize_pair(zj, zk, a(0, 1), cutoff);
}

/// Winsorized correlation R^W (before scaling) together with the MAD scales.
inline PairwiseResult winsorized_correlation(const DataMatrix& data, const WinsorConfig& cfg = {}) {
  const PairwiseResult initial = initial_correlation_matrix(data, cfg);
  const Eigen::Index p = data.cols();
  std::vector<std::vector<double>> z(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    z[j] = standardize_column(detail::column(data, j), static_cast<std::size_t>(j));
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
  std::vector<double> uj(static_cast<std::size_t>(data.rows()));
  std::vector<double> uk(uj.size());
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      const auto f =
          mahalanobis_shrinkage(z[j], z[k], initial.correlation(j, k), cfg.mahalanobis_cutoff);
      for (std::size_t i = 0; i < f.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        uj[i] = f[i] * (cfg.shrink_raw ? data(row, j) : z[j][i]);
        uk[i] = f[i] * (cfg.shrink_raw ? data(row, k) : z[k][i]);
      }
      r(j, k) = r(k, j) = detail::pearson(uj, uk);
    }
  }
  return {SymmetricMatrix(r), initial.scales};
}

/// Sigma^W = diag(s) R^W diag(s), projected to the nearest positive-definite matrix.
inline SymmetricMatrix winsorized_covariance(const DataMatrix& data, const WinsorConfig& cfg = {},
                                             const NearestPdOptions& pd = {}) {
  detail::require_rows(data, 3, "winsorized_covariance");
  const PairwiseResult rw = winsorized_correlation(data, cfg);
  const Eigen::Map<const Eigen::VectorXd> s(rw.scales.data(),
                                            static_cast<Eigen::Index>(rw.scales.size()));
  return nearest_pd(
      SymmetricMatrix(Eigen::MatrixXd(s.asDiagonal() * rw.correlation.matrix() * s.asDiagonal())),
      pd);
}

enum class ScaleKind { Qn, Tau };

inline double robust_scale(std::span<const double> x, ScaleKind kind, const TauConfig& tau = {}) {
  return kind == ScaleKind::Qn ? qn_scale(x) : tau_scale(x, tau);
}

/// Pairwise covariance from the identity
/// Cov(X, Y) = [Var(aX + bY) - Var(aX - bY)] / (4ab), a = 1/scale(X), b = 1/scale(Y),
/// with Var replaced by the squared robust scale.
inline double gk_covariance(std::span<const double> xj, std::span<const double> xk,
                            ScaleKind kind, const TauConfig& tau = {}) {
  if (xj.size() != xk.size()) throw std::invalid_argument("gk_covariance: length mismatch");
  const double sj = robust_scale(xj, kind, tau);
  const double sk = robust_scale(xk, kind, tau);
  if (sj == 0.0) throw detail::degenerate(0);
  if (sk == 0.0) throw detail::degenerate(1);
  const double a = 1.0 / sj;
  const double b = 1.0 / sk;
  std::vector<double> sum(xj.size());
  std::vector<double> diff(xj.size());
  for (std::size_t i = 0; i < xj.size(); ++i) {
    sum[i] = a * xj[i] + b * xk[i];
    diff[i] = a * xj[i] - b * xk[i];
  }
  const double ss = robust_scale(sum, kind, tau);
  const double sd = robust_scale(diff, kind, tau);
  return (ss * ss - sd * sd) / (4.0 * a * b);
}

enum class RankKind { GaussianRank, Spearman, Quadrant };

struct RankOptions {
  /// Map Spearman rho to 2 sin(pi rho / 6).
  bool spearman_consistency = false;
  /// Map the quadrant correlation r to sin(pi r / 2).
  bool quadrant_consistency = false;
};

/// Ranks 1..n with ties given their average rank.
inline std::vector<double> midranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double quadrant_correlation(std::span<const double> x, std::span<const double> y) {
  const double mx = median(x);
  const double my = median(y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double prod = (x[i] - mx) * (y[i] - my);
    acc += static_cast<double>((prod > 0.0) - (prod < 0.0));
  }
  return acc / static_cast<double>(x.size());
}

/// Robust correlation matrix from ranks or signs, with Qn scales per column.
inline PairwiseResult rank_correlations(const DataMatrix& data, RankKind kind,
                                        const RankOptions& opt = {}) {
  detail::require_rows(data, 3, "rank_correlations");
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  std::vector<double> scales(static_cast<std::size_t>(p));
  std::vector<std::vector<double>> scores(static_cast<std::size_t>(p));
  const boost::math::normal_distribution<double> gauss;
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto col = detail::column(data, j);
    scales[j] = qn_scale(col);
    if (scales[j] == 0.0) throw detail::degenerate(static_cast<std::size_t>(j));
    if (kind == RankKind::Quadrant) continue;
    scores[j] = midranks(col);
    if (kind == RankKind::GaussianRank) {
      for (double& r : scores[j]) r = boost::math::quantile(gauss, r / static_cast<double>(n + 1));
    }
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      double rho = 0.0;
      switch (kind) {
        case RankKind::GaussianRank:
          rho = detail::pearson(scores[j], scores[k]);
          break;
        case RankKind::Spearman:
          rho = detail::pearson(scores[j], scores[k]);
          if (opt.spearman_consistency) rho = 2.0 * std::sin(std::numbers::pi * rho / 6.0);
          break;
        case RankKind::Quadrant:
          rho = quadrant_correlation(detail::column(data, j), detail::column(data, k));
          if (opt.quadrant_consistency) rho = std::sin(0.5 * std::numbers::pi * rho);
          break;
      }
      r(j, k) = r(k, j) = rho;
    }
  }
  return {SymmetricMatrix(r), std::move(scales)};
}

/// Sample covariance with the 1/n divisor.
inline SymmetricMatrix sample_covariance(const DataMatrix& data) {
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  return SymmetricMatrix((centered.transpose() * centered) / static_cast<double>(data.rows()));
}

struct PluginOptions {
  WinsorConfig winsor;
  TauConfig tau;
  RankOptions rank;
  NearestPdOptions pd;
};

/// Covariance estimate fed to the penalized solver for the given estimator.
/// Every output is passed through nearest_pd.
inline SymmetricMatrix plugin_covariance(const DataMatrix& data, EstimatorKind kind,
                                         const PluginOptions& opt = {}) {
  detail::require_rows(data, 3, "plugin_covariance");
  const Eigen::Index p = data.cols();
  switch (kind) {
    case EstimatorKind::Glasso:
      return nearest_pd(sample_covariance(data), opt.pd);
    case EstimatorKind::RGlassoWinsor:
      return winsorized_covariance(data, opt.winsor, opt.pd);
    case EstimatorKind::RGlassoQn:
    case EstimatorKind::RGlassoTau: {
      const ScaleKind sk = kind == EstimatorKind::RGlassoQn ? ScaleKind::Qn : ScaleKind::Tau;
      Eigen::MatrixXd cov(p, p);
      for (Eigen::Index j = 0; j < p; ++j) {
        const double s = robust_scale(detail::column(data, j), sk, opt.tau);
        if (s == 0.0) throw detail::degenerate(static_cast<std::size_t>(j));
        cov(j, j) = s * s;
      }
      for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index k = j + 1; k < p; ++k) {
          cov(j, k) = cov(k, j) =
              gk_covariance(detail::column(data, j), detail::column(data, k), sk, opt.tau);
        }
      }
      return nearest_pd(SymmetricMatrix(cov), opt.pd);
    }
    case EstimatorKind::RGlassoGauss:
    case EstimatorKind::RGlassoSpearman:
    case EstimatorKind::RGlassoQuadrant: {
      const RankKind rk = kind == EstimatorKind::RGlassoGauss      ? RankKind::GaussianRank
                          : kind == EstimatorKind::RGlassoSpearman ? RankKind::Spearman
                                                                   : RankKind::Quadrant;
      const PairwiseResult pr = rank_correlations(data, rk, opt.rank);
      const Eigen::Map<const Eigen::VectorXd> s(pr.scales.data(), p);
      return nearest_pd(
          SymmetricMatrix(Eigen::MatrixXd(s.asDiagonal() * pr.correlation.matrix() *
                                          s.asDiagonal())),
          opt.pd);
    }
  }
  throw std::invalid_argument("plugin_covariance: unknown estimator");
}

}  // namespace rglasso
