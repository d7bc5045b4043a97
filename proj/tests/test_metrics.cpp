#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "rglasso/metrics.hpp"

using namespace rglasso;

namespace {

EdgeSet random_edges(std::mt19937_64& rng, std::size_t p, double prob) {
  std::bernoulli_distribution coin(prob);
  EdgeSet out;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      if (coin(rng)) out.insert(Edge{i, j});
    }
  }
  return out;
}

SymmetricMatrix random_pd(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) a(i, j) = normal(rng);
  }
  return SymmetricMatrix(Eigen::MatrixXd(a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(p, p)));
}

}  // namespace

TEST_CASE("Frobenius error", "[metrics]") {
  const auto id = SymmetricMatrix::identity(4);
  CHECK(frobenius_error(id, id) == 0.0);
  CHECK(frobenius_error(SymmetricMatrix(Eigen::MatrixXd(2 * id.matrix())), id) == Catch::Approx(2.0));
  std::mt19937_64 rng(1);
  const auto a = random_pd(rng, 5);
  const auto b = random_pd(rng, 5);
  double acc = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) acc += std::pow(a(i, j) - b(i, j), 2);
  }
  CHECK(std::abs(frobenius_error(a, b) - std::sqrt(acc)) <= 1e-12);
}

TEST_CASE("KL divergence", "[metrics]") {
  const auto id = SymmetricMatrix::identity(2);
  CHECK(std::abs(kl_divergence(id, id)) < 1e-14);
  const auto two = SymmetricMatrix(Eigen::MatrixXd(2 * id.matrix()));
  CHECK(std::abs(kl_divergence(two, id) - (1.0 - std::log(2.0))) <= 1e-12);
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 1000; ++rep) {
    const int p = 2 + rep % 5;
    CHECK(kl_divergence(random_pd(rng, p), random_pd(rng, p)) >= -1e-10);
  }
}

TEST_CASE("confusion counts match pair enumeration", "[metrics]") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t p = 2 + static_cast<std::size_t>(rep % 7);
    const auto hat = random_edges(rng, p, 0.4);
    const auto truth = random_edges(rng, p, 0.4);
    Confusion oracle;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        const bool h = hat.contains(Edge{i, j});
        const bool t = truth.contains(Edge{i, j});
        if (h && t) ++oracle.tp;
        if (!h && !t) ++oracle.tn;
        if (h && !t) ++oracle.fp;
        if (!h && t) ++oracle.fn;
      }
    }
    const auto c = confusion(hat, truth, p);
    CHECK(c.tp == oracle.tp);
    CHECK(c.tn == oracle.tn);
    CHECK(c.fp == oracle.fp);
    CHECK(c.fn == oracle.fn);
  }
  EdgeSet truth{Edge{0, 1}, Edge{1, 2}};
  const auto same = confusion(truth, truth, 4);
  CHECK(same.fp == 0);
  CHECK(same.fn == 0);
  const auto none = confusion({}, truth, 4);
  CHECK(none.tp == 0);
  CHECK(none.fn == 2);
}

TEST_CASE("rates and MCC", "[metrics]") {
  const auto perfect = rates_and_mcc(Confusion{3, 4, 0, 0});
  CHECK(perfect.tpr == 1.0);
  CHECK(perfect.tnr == 1.0);
  CHECK(perfect.mcc == 1.0);
  CHECK(rates_and_mcc(Confusion{0, 5, 0, 2}).mcc == 0.0);
  const auto hand = rates_and_mcc(Confusion{2, 3, 1, 1});
  CHECK(std::abs(hand.mcc - 5.0 / 12.0) <= 1e-12);
  CHECK(hand.tpr == Catch::Approx(2.0 / 3.0));
  CHECK(hand.tnr == Catch::Approx(0.75));
  CHECK(rates_and_mcc(Confusion{0, 6, 0, 0}).degenerate);
}

TEST_CASE("adjacency frequency", "[metrics]") {
  const EdgeSet a{Edge{0, 1}, Edge{1, 2}};
  const EdgeSet b{Edge{0, 1}, Edge{2, 3}};
  const auto single = adjacency_frequency({a}, 4);
  CHECK(single(0, 1) == 1.0);
  CHECK(single(1, 0) == 1.0);
  CHECK(single(0, 2) == 0.0);
  CHECK(adjacency_frequency({a, a, a}, 4) == single);

  const auto f = adjacency_frequency({a, b}, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) == 0.0);
    for (std::size_t j = i + 1; j < 4; ++j) {
      const double expected = 0.5 * (a.contains(Edge{i, j}) + b.contains(Edge{i, j}));
      CHECK(f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == expected);
      CHECK(f(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) == expected);
    }
  }
}

TEST_CASE("network density", "[metrics]") {
  CHECK(network_density({}, 5) == 0.0);
  EdgeSet complete;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) complete.insert(Edge{i, j});
  }
  CHECK(network_density(complete, 6) == 1.0);
  EdgeSet e91;
  for (std::size_t i = 0; i < 26 && e91.size() < 91; ++i) {
    for (std::size_t j = i + 1; j < 26 && e91.size() < 91; ++j) e91.insert(Edge{i, j});
  }
  CHECK(network_density(e91, 26) == Catch::Approx(0.28));
}
