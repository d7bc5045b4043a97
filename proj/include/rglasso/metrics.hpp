#pragma once

// Estimation and graph-recovery performance measures.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rglasso/edges.hpp"
#include "rglasso/error.hpp"
#include "rglasso/matrix_core.hpp"

namespace rglasso {

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
};

struct Rates {
  double tpr = 0.0;
  double tnr = 0.0;
  double mcc = 0.0;
  /// Set when TP + FN = 0 or TN + FP = 0, i.e. a rate had no denominator.
  bool degenerate = false;
};

struct MetricsReport {
  double m_f = 0.0;
  double d_kl = 0.0;
  Confusion counts;
  Rates rates;
};

/// sqrt(sum_ij (omega_hat_ij - omega_ij)^2) over all p^2 entries.
inline double frobenius_error(const SymmetricMatrix& omega_hat, const SymmetricMatrix& omega) {
  if (omega_hat.dim() != omega.dim()) throw std::invalid_argument("frobenius_error: dim mismatch");
  return (omega_hat.matrix() - omega.matrix()).norm();
}

/// 1/2 (tr(Omega_hat Omega^{-1}) - log det(Omega_hat Omega^{-1}) - p).
inline double kl_divergence(const SymmetricMatrix& omega_hat, const SymmetricMatrix& omega) {
  if (omega_hat.dim() != omega.dim()) throw std::invalid_argument("kl_divergence: dim mismatch");
  const SymmetricMatrix sigma = inverse_pd(omega);
  const double trace = omega_hat.matrix().cwiseProduct(sigma.matrix()).sum();
  const double logdet = logdet_pd(omega_hat) - logdet_pd(omega);
  return 0.5 * (trace - logdet - static_cast<double>(omega.dim()));
}

/// Confusion counts over the C(p,2) unordered off-diagonal pairs.
inline Confusion confusion(const EdgeSet& edges_hat, const EdgeSet& edges_true, std::size_t p) {
  Confusion c;
  for (const Edge& e : edges_hat) {
    if (e.i >= e.j || e.j >= p) throw std::invalid_argument("confusion: edge out of range");
    if (edges_true.contains(e)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (const Edge& e : edges_true) {
    if (e.i >= e.j || e.j >= p) throw std::invalid_argument("confusion: edge out of range");
  }
  c.fn = edges_true.size() - c.tp;
  const std::uint64_t pairs = static_cast<std::uint64_t>(p) * (p > 0 ? p - 1 : 0) / 2;
  c.tn = pairs - c.tp - c.fp - c.fn;
  return c;
}

/// TPR, TNR and Matthews correlation. An empty class gives a rate of 0 with
/// `degenerate` set; a zero factor in the MCC denominator gives MCC = 0.
inline Rates rates_and_mcc(const Confusion& c) {
  Rates r;
  const double tp = static_cast<double>(c.tp);
  const double tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0) r.degenerate = true;
  r.tpr = (c.tp + c.fn == 0) ? 0.0 : tp / (tp + fn);
  r.tnr = (c.tn + c.fp == 0) ? 0.0 : tn / (tn + fp);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  r.mcc = denom == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(denom);
  return r;
}

inline MetricsReport evaluate(const SymmetricMatrix& omega_hat, const EdgeSet& edges_hat,
                              const SymmetricMatrix& omega, const EdgeSet& edges_true) {
  MetricsReport m;
  m.m_f = frobenius_error(omega_hat, omega);
  m.d_kl = kl_divergence(omega_hat, omega);
  m.counts = confusion(edges_hat, edges_true, omega.dim());
  m.rates = rates_and_mcc(m.counts);
  return m;
}

/// Fraction of edge sets containing each pair; symmetric with a zero diagonal.
inline Eigen::MatrixXd adjacency_frequency(const std::vector<EdgeSet>& edge_sets, std::size_t p) {
  if (edge_sets.empty()) throw std::invalid_argument("adjacency_frequency: no replicates");
  const auto dim = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd freq = Eigen::MatrixXd::Zero(dim, dim);
  for (const EdgeSet& edges : edge_sets) {
    for (const Edge& e : edges) {
      if (e.j >= p) throw std::invalid_argument("adjacency_frequency: edge out of range");
      freq(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) += 1.0;
    }
  }
  freq /= static_cast<double>(edge_sets.size());
  freq.triangularView<Eigen::StrictlyLower>() = freq.transpose();
  return freq;
}

/// |edges| / C(p, 2).
inline double network_density(const EdgeSet& edges, std::size_t p) {
  if (p < 2) throw std::invalid_argument("network_density: p must be at least 2");
  return static_cast<double>(edges.size()) / (0.5 * static_cast<double>(p) * static_cast<double>(p - 1));
}

}  // namespace rglasso
