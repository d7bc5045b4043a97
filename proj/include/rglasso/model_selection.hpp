#pragma once

// Regularization grid and k-fold cross-validation for lambda.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "rglasso/csv.hpp"
#include "rglasso/error.hpp"
#include "rglasso/glasso.hpp"
#include "rglasso/matrix_core.hpp"
#include "rglasso/pairwise_estimators.hpp"
#include "rglasso/random.hpp"

namespace rglasso {

/// How the held-out fold is summarized when scoring a fit.
enum class CvLoss {
  Robust,  // same plug-in estimator as the training fit
  Sample,  // sample covariance
};

struct CvConfig {
  int folds = 5;
  int grid_size = 20;
  double lambda_min_ratio = 0.01;
  std::uint64_t seed = 0;
  CvLoss loss = CvLoss::Robust;
};

/// Used as the only grid point when every off-diagonal entry is zero.
inline constexpr double kDegenerateLambda = 1e-3;

/// grid_size log-spaced values from max_{i!=j} |s_ij| down to
/// lambda_min_ratio times that.
inline std::vector<double> lambda_grid(const SymmetricMatrix& sigma_hat, const CvConfig& cfg) {
  if (cfg.grid_size < 1) throw std::invalid_argument("lambda_grid: grid_size must be >= 1");
  if (!(cfg.lambda_min_ratio > 0.0 && cfg.lambda_min_ratio < 1.0)) {
    throw std::invalid_argument("lambda_grid: lambda_min_ratio must lie in (0, 1)");
  }
  double lmax = 0.0;
  for (std::size_t i = 0; i < sigma_hat.dim(); ++i) {
    for (std::size_t j = i + 1; j < sigma_hat.dim(); ++j) {
      lmax = std::max(lmax, std::abs(sigma_hat(i, j)));
    }
  }
  if (lmax == 0.0) return {kDegenerateLambda};
  std::vector<double> grid(static_cast<std::size_t>(cfg.grid_size));
  grid[0] = lmax;
  const double log_ratio = std::log(cfg.lambda_min_ratio);
  for (int g = 1; g < cfg.grid_size; ++g) {
    grid[static_cast<std::size_t>(g)] =
        lmax * std::exp(log_ratio * static_cast<double>(g) / static_cast<double>(cfg.grid_size - 1));
  }
  return grid;
}

/// Seeded shuffle of 0..n-1 cut into `folds` contiguous blocks whose sizes
/// differ by at most one.
inline std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int folds,
                                                            std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("fold_partition: need at least two folds");
  if (n < static_cast<std::size_t>(folds)) {
    throw std::invalid_argument("fold_partition: fewer rows than folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto k = static_cast<std::size_t>(folds);
  std::vector<std::vector<std::size_t>> out(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                  order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return out;
}

struct CvResult {
  double lambda_star = 0.0;
  std::vector<double> lambdas;
  std::vector<double> mean_loss;
  std::vector<double> sd_loss;
  /// False for grid points where any fold fit failed.
  std::vector<bool> valid;
};

/// Held-out negative log-likelihood tr(Omega S_test) - log det Omega.
inline double heldout_loss(const SymmetricMatrix& omega, const SymmetricMatrix& sigma_test) {
  return omega.matrix().cwiseProduct(sigma_test.matrix()).sum() - logdet_pd(omega);
}

namespace detail {

inline DataMatrix select_rows(const DataMatrix& data, const std::vector<std::size_t>& rows) {
  DataMatrix out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace detail

/// K-fold cross-validation over a lambda grid built from `sigma_full` (the
/// plug-in covariance of all rows). The selected lambda minimizes the mean
/// held-out loss; ties go to the larger lambda.
inline CvResult kfold_cv(const DataMatrix& data, EstimatorKind kind, const CvConfig& cfg,
                         const SymmetricMatrix& sigma_full, const PluginOptions& plugin = {},
                         const GlassoOptions& solver = {}) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto folds = fold_partition(n, cfg.folds, cfg.seed);
  CvResult res;
  res.lambdas = lambda_grid(sigma_full, cfg);
  const std::size_t g = res.lambdas.size();
  const std::size_t k = folds.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> loss(g, std::vector<double>(k, nan));

  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t o = 0; o < k; ++o) {
      if (o != f) train.insert(train.end(), folds[o].begin(), folds[o].end());
    }
    std::sort(train.begin(), train.end());
    std::vector<std::size_t> test = folds[f];
    std::sort(test.begin(), test.end());
    SymmetricMatrix s_train;
    SymmetricMatrix s_test;
    try {
      s_train = plugin_covariance(detail::select_rows(data, train), kind, plugin);
      const DataMatrix test_rows = detail::select_rows(data, test);
      s_test = cfg.loss == CvLoss::Robust ? plugin_covariance(test_rows, kind, plugin)
                                          : sample_covariance(test_rows);
    } catch (const std::exception&) {
      continue;
    }
    std::optional<SymmetricMatrix> warm;
    for (std::size_t l = 0; l < g; ++l) {
      try {
        PrecisionEstimate est = solve_glasso(GlassoProblem{s_train, res.lambdas[l], solver}, warm);
        loss[l][f] = heldout_loss(est.omega, s_test);
        warm = std::move(est.omega);
      } catch (const std::exception&) {
        // Cell stays NaN and the grid point is excluded below.
      }
    }
  }

  res.mean_loss.assign(g, nan);
  res.sd_loss.assign(g, nan);
  res.valid.assign(g, false);
  std::optional<std::size_t> best;
  for (std::size_t l = 0; l < g; ++l) {
    const bool ok = std::all_of(loss[l].begin(), loss[l].end(),
                                [](double v) { return std::isfinite(v); });
    if (!ok) continue;
    res.valid[l] = true;
    const double mean = std::accumulate(loss[l].begin(), loss[l].end(), 0.0) / static_cast<double>(k);
    double ss = 0.0;
    for (double v : loss[l]) ss += (v - mean) * (v - mean);
    res.mean_loss[l] = mean;
    res.sd_loss[l] = k > 1 ? std::sqrt(ss / static_cast<double>(k - 1)) : 0.0;
    if (!best || mean < res.mean_loss[*best]) best = l;
  }
  if (!best) throw ConvergenceFailure(0, nan, "kfold_cv: every grid point failed in some fold");
  res.lambda_star = res.lambdas[*best];
  return res;
}

inline CvResult kfold_cv(const DataMatrix& data, EstimatorKind kind, const CvConfig& cfg,
                         const PluginOptions& plugin = {}, const GlassoOptions& solver = {}) {
  return kfold_cv(data, kind, cfg, plugin_covariance(data, kind, plugin), plugin, solver);
}

inline void write_cv_curve_csv(std::ostream& out, const CvResult& cv) {
  out << "lambda,mean_loss,sd_loss\n";
  for (std::size_t l = 0; l < cv.lambdas.size(); ++l) {
    out << format_double(cv.lambdas[l]) << ',' << format_double(cv.mean_loss[l]) << ','
        << format_double(cv.sd_loss[l]) << '\n';
  }
}

struct FitResult {
  SymmetricMatrix sigma_hat;
  CvResult cv;
  PrecisionEstimate estimate;
};

/// Plug-in covariance, cross-validated lambda, and the final fit on all rows.
inline FitResult fit_with_cv(const DataMatrix& data, EstimatorKind kind, const CvConfig& cfg,
                             const PluginOptions& plugin = {}, const GlassoOptions& solver = {}) {
  FitResult fit;
  fit.sigma_hat = plugin_covariance(data, kind, plugin);
  fit.cv = kfold_cv(data, kind, cfg, fit.sigma_hat, plugin, solver);
  fit.estimate = solve_glasso(GlassoProblem{fit.sigma_hat, fit.cv.lambda_star, solver});
  return fit;
}

}  // namespace rglasso
