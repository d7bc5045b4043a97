#pragma once

// Univariate robust location and scale estimators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rglasso {

struct LocationScale {
  double location = 0.0;
  double scale = 0.0;
};

/// Gaussian consistency factor for the MAD.
inline constexpr double kMadConsistency = 1.4826;

/// Asymptotic Gaussian consistency factor for Qn (Rousseeuw and Croux, 1993).
inline constexpr double kQnConsistency = 2.2219;

namespace detail {

inline void require_finite(std::span<const double> x, const char* who) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(who) + ": non-finite entry");
    }
  }
}

// Median of a scratch buffer; reorders the buffer.
inline double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower =
      *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// Sample median. Even lengths use the midpoint of the two middle order statistics.
inline double median(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("median: empty input");
  detail::require_finite(x, "median");
  std::vector<double> buf(x.begin(), x.end());
  return detail::median_inplace(buf);
}

/// Median absolute deviation about the median, times `consistency`.
inline double mad(std::span<const double> x, double consistency = kMadConsistency) {
  const double med = median(x);
  std::vector<double> dev(x.size());
  std::transform(x.begin(), x.end(), dev.begin(),
                 [med](double v) { return std::abs(v - med); });
  return consistency * detail::median_inplace(dev);
}

inline LocationScale median_mad(std::span<const double> x) {
  return {median(x), mad(x)};
}

/// Small-sample correction for Qn. Values for n <= 9 are the tabulated
/// Rousseeuw-Croux factors; larger n use the asymptotic rational forms.
inline double qn_small_sample_factor(std::size_t n) {
  switch (n) {
    case 2: return 0.399;
    case 3: return 0.994;
    case 4: return 0.512;
    case 5: return 0.844;
    case 6: return 0.611;
    case 7: return 0.857;
    case 8: return 0.669;
    case 9: return 0.872;
    default: break;
  }
  const double dn = static_cast<double>(n);
  return (n % 2 == 1) ? dn / (dn + 1.4) : dn / (dn + 3.8);
}

/// The uncorrected Qn kernel: the k-th smallest of the C(n,2) pairwise
/// absolute differences, k = C(h,2), h = floor(n/2) + 1.
inline double qn_raw(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("qn_scale: need at least two observations");
  detail::require_finite(x, "qn_scale");
  std::vector<double> gaps;
  gaps.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) gaps.push_back(std::abs(x[i] - x[j]));
  }
  const std::size_t h = n / 2 + 1;
  const std::size_t k = h * (h - 1) / 2;
  auto kth = gaps.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(gaps.begin(), kth, gaps.end());
  return *kth;
}

/// Qn scale estimate with asymptotic and small-sample consistency factors.
inline double qn_scale(std::span<const double> x) {
  return kQnConsistency * qn_small_sample_factor(x.size()) * qn_raw(x);
}

/// Tuning for the tau-scale. The consistency factor is derived from `c` so
/// that the estimate is unbiased for the standard deviation at the Gaussian.
struct TauConfig {
  double c = 3.0;
};

/// E[min(Z^2, c^2)] for Z standard normal.
inline double truncated_second_moment(double c) {
  const double tail = std::erfc(c / std::numbers::sqrt2);  // P(|Z| > c)
  const double density = std::exp(-0.5 * c * c) / std::sqrt(2.0 * std::numbers::pi);
  return (1.0 - tail) - 2.0 * c * density + c * c * tail;
}

/// Tau-scale: s0^2 * mean(rho_c((x - median) / s0)) with rho_c(u) = min(u^2, c^2),
/// rescaled for Gaussian consistency. Returns 0 when the MAD is 0.
inline double tau_scale(std::span<const double> x, const TauConfig& cfg = {}) {
  if (x.size() < 2) throw std::invalid_argument("tau_scale: need at least two observations");
  const double med = median(x);
  const double s0 = mad(x);
  if (s0 == 0.0) return 0.0;
  const double c2 = cfg.c * cfg.c;
  double acc = 0.0;
  for (double v : x) {
    const double u = (v - med) / s0;
    acc += std::min(u * u, c2);
  }
  const double tau2 = s0 * s0 * (acc / static_cast<double>(x.size())) /
                      truncated_second_moment(cfg.c);
  return std::sqrt(tau2);
}

}  // namespace rglasso
