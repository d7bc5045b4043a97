#pragma once

// True precision-matrix generators: AR(1), block diagonal, random graph,
// nearest-neighbour of order two, and hub.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rglasso/edges.hpp"
#include "rglasso/matrix_core.hpp"
#include "rglasso/random.hpp"

namespace rglasso {

enum class ModelKind { AR1, BG, Rand, NN2, Hub };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::AR1: return "AR1";
    case ModelKind::BG: return "BG";
    case ModelKind::Rand: return "Rand";
    case ModelKind::NN2: return "NN2";
    case ModelKind::Hub: return "Hub";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model(std::string_view name) {
  for (ModelKind k : {ModelKind::AR1, ModelKind::BG, ModelKind::Rand, ModelKind::NN2,
                      ModelKind::Hub}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

struct ModelSpec {
  ModelKind kind = ModelKind::AR1;
  std::size_t p = 60;
  std::size_t q = 10;       // BG: number of blocks
  double prob = 0.05;       // Rand: edge probability
  std::size_t groups = 3;   // Hub: number of hubs
  std::uint64_t seed = 0;   // Rand, NN2
};

struct TrueModel {
  SymmetricMatrix omega;
  SymmetricMatrix sigma;
  EdgeSet edges;
};

/// Edge weight v and eigenvalue floor shared by the graph-based models.
inline constexpr double kGraphEdgeWeight = 0.3;
inline constexpr double kGraphEigenFloor = 0.1;

/// Entries of the AR(1) inverse below this magnitude are set to zero.
inline constexpr double kZeroSnap = 1e-12;

namespace detail {

inline EdgeSet support(const Eigen::MatrixXd& omega) {
  EdgeSet edges;
  const Eigen::Index p = omega.rows();
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index l = i + 1; l < p; ++l) {
      if (std::abs(omega(i, l)) > kZeroSnap) {
        edges.insert(Edge{static_cast<std::size_t>(i), static_cast<std::size_t>(l)});
      }
    }
  }
  return edges;
}

inline TrueModel from_precision(const Eigen::MatrixXd& omega) {
  SymmetricMatrix om(omega);
  SymmetricMatrix sigma = inverse_pd(om);
  return {om, sigma, support(om.matrix())};
}

// Omega = v * Theta + s * I with s = max(0, floor - l) + |l|, l = lambda_min(v * Theta),
// so that lambda_min(Omega) >= floor.
inline TrueModel from_adjacency(const Eigen::MatrixXd& theta) {
  const Eigen::MatrixXd vt = kGraphEdgeWeight * theta;
  const double lmin =
      theta.rows() > 0
          ? Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(vt, Eigen::EigenvaluesOnly)
                .eigenvalues()
                .minCoeff()
          : 0.0;
  const double shift = std::max(0.0, kGraphEigenFloor - lmin) + std::abs(lmin);
  Eigen::MatrixXd omega = vt;
  omega.diagonal().array() += shift;
  return from_precision(omega);
}

inline Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace detail

/// Sigma_ij = 0.4^|i-j|, Omega = Sigma^{-1} (tridiagonal).
inline TrueModel ar1_model(std::size_t p) {
  if (p < 2) throw std::invalid_argument("ar1_model: p must be at least 2");
  Eigen::MatrixXd sigma(detail::idx(p), detail::idx(p));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double gap = static_cast<double>(i > j ? i - j : j - i);
      sigma(detail::idx(i), detail::idx(j)) = std::pow(0.4, gap);
    }
  }
  SymmetricMatrix sig(sigma);
  Eigen::MatrixXd omega = inverse_pd(sig).matrix();
  omega = omega.unaryExpr([](double v) { return std::abs(v) < kZeroSnap ? 0.0 : v; });
  SymmetricMatrix om(omega);
  return {om, sig, detail::support(om.matrix())};
}

/// q diagonal blocks of size p/q with unit diagonal and 0.5 off-diagonal.
inline TrueModel block_model(std::size_t p, std::size_t q) {
  if (q == 0 || p % q != 0) throw std::invalid_argument("block_model: q must divide p");
  const std::size_t size = p / q;
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(detail::idx(p), detail::idx(p));
  for (std::size_t b = 0; b < q; ++b) {
    omega.block(detail::idx(b * size), detail::idx(b * size), detail::idx(size),
                detail::idx(size))
        .setConstant(0.5);
  }
  omega.diagonal().setOnes();
  return detail::from_precision(omega);
}

/// Erdos-Renyi adjacency with edge probability `prob`.
inline TrueModel random_model(std::size_t p, double prob, std::uint64_t seed) {
  if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("random_model: prob in (0,1)");
  Rng rng(seed);
  std::bernoulli_distribution coin(prob);
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(detail::idx(p), detail::idx(p));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      if (coin(rng)) theta(detail::idx(i), detail::idx(j)) = theta(detail::idx(j), detail::idx(i)) = 1.0;
    }
  }
  return detail::from_adjacency(theta);
}

/// Each node picks two distinct random neighbours; the graph is the union.
inline TrueModel nn2_model(std::size_t p, std::uint64_t seed) {
  if (p < 4) throw std::invalid_argument("nn2_model: p must be at least 4");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, p - 2);
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(detail::idx(p), detail::idx(p));
  for (std::size_t i = 0; i < p; ++i) {
    // Draw from {0..p-1} \ {i} by skipping i.
    std::size_t first = pick(rng);
    if (first >= i) ++first;
    std::size_t second = first;
    while (second == first) {
      second = pick(rng);
      if (second >= i) ++second;
    }
    for (std::size_t nb : {first, second}) {
      theta(detail::idx(i), detail::idx(nb)) = theta(detail::idx(nb), detail::idx(i)) = 1.0;
    }
  }
  return detail::from_adjacency(theta);
}

/// Nodes split into equal consecutive groups; the first node of each group
/// is connected to every other member.
inline TrueModel hub_model(std::size_t p, std::size_t groups) {
  if (groups == 0 || p % groups != 0) throw std::invalid_argument("hub_model: groups must divide p");
  const std::size_t size = p / groups;
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(detail::idx(p), detail::idx(p));
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t center = g * size;
    for (std::size_t m = center + 1; m < center + size; ++m) {
      theta(detail::idx(center), detail::idx(m)) = theta(detail::idx(m), detail::idx(center)) = 1.0;
    }
  }
  return detail::from_adjacency(theta);
}

inline TrueModel make_model(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::AR1: return ar1_model(spec.p);
    case ModelKind::BG: return block_model(spec.p, spec.q);
    case ModelKind::Rand: return random_model(spec.p, spec.prob, spec.seed);
    case ModelKind::NN2: return nn2_model(spec.p, spec.seed);
    case ModelKind::Hub: return hub_model(spec.p, spec.groups);
  }
  throw std::invalid_argument("make_model: unknown model");
}

}  // namespace rglasso
