// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
// usage: rglasso_acceptance <path-to-rglasso-bench> <work-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rglasso/experiment.hpp"

using namespace rglasso;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// k-th smallest (1-based) by counting, without sorting.
double kth_by_counting(const std::vector<double>& v, std::size_t k) {
  for (double cand : v) {
    std::size_t below = 0, at_or_below = 0;
    for (double w : v) {
      below += w < cand;
      at_or_below += w <= cand;
    }
    if (below < k && k <= at_or_below) return cand;
  }
  throw std::logic_error("kth_by_counting: unreachable");
}

double enum_median(const std::vector<double>& v) {
  const std::size_t n = v.size();
  return n % 2 ? kth_by_counting(v, n / 2 + 1)
               : 0.5 * (kth_by_counting(v, n / 2) + kth_by_counting(v, n / 2 + 1));
}

double enum_mad(const std::vector<double>& v) {
  const double m = enum_median(v);
  std::vector<double> dev;
  for (double x : v) dev.push_back(std::fabs(x - m));
  return kMadConsistency * enum_median(dev);
}

double enum_qn(const std::vector<double>& v) {
  std::vector<double> gaps;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) gaps.push_back(std::fabs(v[i] - v[j]));
  }
  const std::size_t h = v.size() / 2 + 1;
  return kQnConsistency * qn_small_sample_factor(v.size()) * kth_by_counting(gaps, h * (h - 1) / 2);
}

SymmetricMatrix random_cov(std::mt19937_64& rng, int p, int n) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = normal(rng);
  }
  return SymmetricMatrix(Eigen::MatrixXd(x.transpose() * x / n));
}

Outcome solver_correctness() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(3, 10);
  std::uniform_real_distribution<double> lam(0.01, 0.5);
  // The solver tolerance bounds the residual in Omega^{-1} and the per-sweep
  // change, not the error in Omega itself, which is larger by roughly
  // p * ||Omega||_2. The unpenalized check therefore runs at tol 1e-6; the
  // error at the default tolerance is reported alongside.
  GlassoOptions tight;
  tight.tol = 1e-6;
  double worst_rel = 0.0, worst_default = 0.0, worst_kkt = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int p = dim(rng);
    const auto s = random_cov(rng, p, 2 * p + 5);
    const Eigen::MatrixXd inv = inverse_pd(s).matrix();
    const auto exact = solve_glasso(s, 0.0, tight);
    worst_rel = std::max(worst_rel, (exact.omega.matrix() - inv).norm() / inv.norm());
    worst_default = std::max(worst_default, (solve_glasso(s, 0.0).omega.matrix() - inv).norm() / inv.norm());
    const double lambda = lam(rng);
    const auto est = solve_glasso(s, lambda);
    worst_kkt = std::max(worst_kkt, glasso_kkt_residual(est.omega, s, lambda, true));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(worst_rel <= 1e-4, "lambda=0 relative error " + fmt(worst_rel));
  o.require(worst_kkt <= 1e-4, "KKT residual " + fmt(worst_kkt));
  o.require(secs < 10.0, "runtime " + fmt(secs) + " s");
  o.note("max rel err " + fmt(worst_rel, 3) + " (at default tol " + fmt(worst_default, 3) +
         "), max KKT " + fmt(worst_kkt, 3) + ", " + fmt(secs, 3) + " s");
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> small(-4, 4);
  std::normal_distribution<double> normal(0.0, 2.0);
  int mismatches = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(rep % 11);  // 2..12
    std::vector<double> x(n);
    const bool ties = rep % 3 == 0;
    for (auto& v : x) v = ties ? small(rng) : normal(rng);
    if (median(x) != enum_median(x)) ++mismatches;
    if (mad(x) != enum_mad(x)) ++mismatches;
    if (qn_scale(x) != enum_qn(x)) ++mismatches;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " scale mismatches");

  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 5 + static_cast<std::size_t>(rep % 8);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = normal(rng);
      b[i] = 0.4 * a[i] + normal(rng);
    }
    const double alpha = 1.0 / enum_qn(a), beta = 1.0 / enum_qn(b);
    std::vector<double> sum(n), diff(n);
    for (std::size_t i = 0; i < n; ++i) {
      sum[i] = alpha * a[i] + beta * b[i];
      diff[i] = alpha * a[i] - beta * b[i];
    }
    const double direct = (std::pow(enum_qn(sum), 2) - std::pow(enum_qn(diff), 2)) / (4 * alpha * beta);
    worst = std::max(worst, std::fabs(gk_covariance(a, b, ScaleKind::Qn) - direct) /
                                std::max(1.0, std::fabs(direct)));
  }
  o.require(worst <= 1e-12, "GK deviation " + fmt(worst));
  o.note("600 scale checks, GK max dev " + fmt(worst, 3));
  return o;
}

Outcome winsorization_pipeline() {
  Outcome o;
  const std::vector<double> xj{3, 3, 3, -3}, xk{3, 3, 3, 3};
  const auto [vj, vk] = adjusted_winsorize_pair(xj, xk);
  const double c2 = 2.0 / std::sqrt(3.0);
  double dev = 0.0;
  for (int i = 0; i < 3; ++i) dev = std::max({dev, std::fabs(vj[i] - 2.0), std::fabs(vk[i] - 2.0)});
  dev = std::max({dev, std::fabs(vj[3] + c2), std::fabs(vk[3] - c2)});
  const std::vector<double> zj{10.0}, zk{0.0};
  const auto [uj, uk] = multivariate_winsorize_pair(zj, zk, SymmetricMatrix::identity(2), 5.99);
  dev = std::max({dev, std::fabs(uj[0] - 10.0 * std::sqrt(5.99 / 100.0)), std::fabs(uk[0])});
  o.require(dev <= 1e-12, "fixture deviation " + fmt(dev));

  int not_pd = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    const int p = 2 + static_cast<int>(seed % 19);
    const int n = 10 + static_cast<int>(seed % 31);
    std::normal_distribution<double> normal;
    std::bernoulli_distribution outlier(0.05);
    DataMatrix x(n, p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) x(i, j) = outlier(rng) ? 50.0 + normal(rng) : normal(rng);
    }
    try {
      if (!cholesky(winsorized_covariance(x))) ++not_pd;
    } catch (const DegenerateColumn&) {
      ++not_pd;
    }
  }
  o.require(not_pd == 0, std::to_string(not_pd) + " of 1000 fixtures not PD");
  o.note("fixture dev " + fmt(dev, 3) + ", 1000/1000 PD");
  return o;
}

Outcome breakdown_contrast() {
  Outcome o;
  auto run = [] {
    DataMatrix x = mvn_sample(SymmetricMatrix::identity(10), 100, 404);
    const double w_clean = winsorized_covariance(x).matrix().cwiseAbs().maxCoeff();
    const double s_clean = sample_covariance(x).matrix().cwiseAbs().maxCoeff();
    std::vector<int> cells(1000);
    for (int i = 0; i < 1000; ++i) cells[i] = i;
    std::mt19937_64 rng(405);
    std::shuffle(cells.begin(), cells.end(), rng);
    for (int c = 0; c < 200; ++c) x(cells[c] / 10, cells[c] % 10) = 1e6;
    return std::array<double, 4>{w_clean, winsorized_covariance(x).matrix().cwiseAbs().maxCoeff(),
                                 s_clean, sample_covariance(x).matrix().cwiseAbs().maxCoeff()};
  };
  const auto a = run();
  const auto b = run();
  o.require(a[1] <= 10 * a[0] + 10, "winsorized max " + fmt(a[1]) + " vs clean " + fmt(a[0]));
  o.require(a[3] - a[2] >= 1e6, "sample covariance grew only " + fmt(a[3] - a[2]));
  o.require(a == b, "not deterministic");
  o.note("winsor max " + fmt(a[0]) + " -> " + fmt(a[1]) + ", sample max " + fmt(a[2]) + " -> " + fmt(a[3]));
  return o;
}

struct TrendRun {
  double dkl[2][2] = {};  // [estimator: Glasso, Winsor][cell: clean, ICM]
  double mcc[2][2] = {};
  double tpr[2][2] = {};
  int failed = 0;
  double seconds = 0;
};

const TrendRun& trend_run() {
  static const TrendRun run = [] {
    TrendRun r;
    const auto start = std::chrono::steady_clock::now();
    std::istringstream text(
        "model.kind=AR1\nmodel.p=60\nn=100\nreplicates=20\n"
        "estimators=Glasso,RGlassoWinsor\n"
        "contamination.scheme=Clean,ICM\ncontamination.epsilon=0.10\n"
        "master_seed=20240501\n");
    const auto cfg = parse_config(text);
    const auto rec = run_experiment(cfg, std::max(1u, std::thread::hardware_concurrency()));
    for (const auto& a : rec.aggregates) {
      const int e = a.estimator == EstimatorKind::Glasso ? 0 : 1;
      const int c = a.scheme == Scheme::Clean ? 0 : 1;
      r.dkl[e][c] = a.mean[1];
      r.tpr[e][c] = a.mean[2];
      r.mcc[e][c] = a.mean[4];
      r.failed += a.failed;
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }();
  return run;
}

Outcome table1_trend() {
  Outcome o;
  const auto& r = trend_run();
  o.require(r.failed == 0, std::to_string(r.failed) + " failed replicates");
  o.require(r.dkl[0][0] < r.dkl[1][0], "(a) clean D_KL Glasso " + fmt(r.dkl[0][0]) +
                                           " not below RGlassoWinsor " + fmt(r.dkl[1][0]));
  const double ratio = r.dkl[0][1] / r.dkl[1][1];
  o.require(ratio >= 4.0, "(b) ICM D_KL ratio " + fmt(ratio) + " < 4");
  o.require(r.dkl[1][0] >= 3.5 && r.dkl[1][0] <= 8.0,
            "(c) clean D_KL RGlassoWinsor " + fmt(r.dkl[1][0]) + " outside [3.5, 8.0]");
  o.note("clean D_KL " + fmt(r.dkl[0][0]) + " vs " + fmt(r.dkl[1][0]) + ", ICM D_KL " +
         fmt(r.dkl[0][1]) + " vs " + fmt(r.dkl[1][1]) + " (ratio " + fmt(ratio, 3) + "), " +
         fmt(r.seconds, 3) + " s");
  return o;
}

Outcome graph_recovery_trend() {
  Outcome o;
  const auto& r = trend_run();
  o.require(r.mcc[1][1] >= 0.30, "MCC(RGlassoWinsor) " + fmt(r.mcc[1][1]) + " < 0.30");
  o.require(r.mcc[0][1] <= 0.10, "MCC(Glasso) " + fmt(r.mcc[0][1]) + " > 0.10");
  o.require(r.tpr[1][1] >= 0.6, "TPR(RGlassoWinsor) " + fmt(r.tpr[1][1]) + " < 0.6");
  o.require(r.tpr[0][1] <= 0.15, "TPR(Glasso) " + fmt(r.tpr[0][1]) + " > 0.15");
  o.require(r.mcc[1][1] > r.mcc[0][1] && r.tpr[1][1] > r.tpr[0][1], "ordering violated");
  o.note("ICM 0.10: MCC " + fmt(r.mcc[1][1], 3) + " vs " + fmt(r.mcc[0][1], 3) + ", TPR " +
         fmt(r.tpr[1][1], 3) + " vs " + fmt(r.tpr[0][1], 3));
  return o;
}

Outcome model_generators() {
  Outcome o;
  o.require(hub_model(60, 3).edges.size() == 57, "hub p=60");
  o.require(hub_model(200, 10).edges.size() == 190, "hub p=200");
  o.require(block_model(60, 10).edges.size() == 150, "BG p=60");
  EdgeSet chain;
  for (std::size_t i = 0; i + 1 < 60; ++i) chain.insert(make_edge(i, i + 1));
  o.require(ar1_model(60).edges == chain, "AR(1) chain");
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (ModelKind k : {ModelKind::AR1, ModelKind::BG, ModelKind::Rand, ModelKind::NN2, ModelKind::Hub}) {
      ModelSpec spec;
      spec.kind = k;
      spec.seed = seed;
      if (!cholesky(make_model(spec).omega)) ++failures;
    }
  }
  o.require(failures == 0, std::to_string(failures) + " generator outputs not factorizable");
  o.note("edge counts 57/190/150, chain ok, 500 factorizations");
  return o;
}

Outcome icm_propagation() {
  Outcome o;
  ContaminationSpec spec;
  spec.scheme = Scheme::ICM;
  spec.epsilon = 0.10;
  spec.seed = 808;
  const auto out = icm_contaminate(DataMatrix::Zero(10000, 60), spec, SymmetricMatrix::identity(60));
  const double frac = out.row_indicator.cast<double>().mean();
  const double expected = 1.0 - std::pow(0.9, 60);
  o.require(std::fabs(frac - expected) <= 0.02, "fraction " + fmt(frac));
  o.note("fraction " + fmt(frac, 5) + " vs " + fmt(expected, 5));
  return o;
}

Outcome metrics_suite() {
  Outcome o;
  const auto id = SymmetricMatrix::identity(2);
  const double kl = kl_divergence(SymmetricMatrix(Eigen::MatrixXd(2 * id.matrix())), id);
  o.require(std::fabs(kl - (1.0 - std::log(2.0))) <= 1e-12, "KL " + fmt(kl, 17));
  const double mcc = rates_and_mcc(Confusion{2, 3, 1, 1}).mcc;
  o.require(std::fabs(mcc - 5.0 / 12.0) <= 1e-12, "MCC " + fmt(mcc, 17));
  std::mt19937_64 rng(909);
  std::bernoulli_distribution coin(0.4);
  int bad = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t p = 2 + static_cast<std::size_t>(rep % 7);
    EdgeSet hat, truth;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        if (coin(rng)) hat.insert(Edge{i, j});
        if (coin(rng)) truth.insert(Edge{i, j});
      }
    }
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        const bool h = hat.contains(Edge{i, j}), t = truth.contains(Edge{i, j});
        tp += h && t;
        tn += !h && !t;
        fp += h && !t;
        fn += !h && t;
      }
    }
    const auto c = confusion(hat, truth, p);
    if (c.tp != tp || c.tn != tn || c.fp != fp || c.fn != fn) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " confusion mismatches");
  o.note("KL and MCC exact, 500 confusion checks");
  return o;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const fs::path& bench, const fs::path& work) {
  Outcome o;
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path config = work / "grid.cfg";
  std::ofstream(config) << "model.kind=AR1,Hub,Rand\nmodel.p=12\nmodel.groups=3\n"
                           "estimators=Glasso,RGlassoWinsor,RGlassoQn\n"
                           "contamination.scheme=Clean,ICM,THCM\ncontamination.epsilon=0.05,0.1\n"
                           "n=40\nreplicates=3\ncv.grid_size=6\nmaster_seed=99\n";
  auto run = [&](const std::string& dir, const std::string& extra) {
    const std::string cmd = "\"" + bench.string() + "\" simulate --config \"" + config.string() +
                            "\" --out \"" + (work / dir).string() + "\"" + extra + " > /dev/null";
    return std::system(cmd.c_str());
  };
  o.require(run("serial_a", "") == 0, "serial run a failed");
  o.require(run("serial_b", "") == 0, "serial run b failed");
  o.require(run("parallel", " --threads 8") == 0, "parallel run failed");
  if (!o.pass) return o;
  const std::string raw = slurp(work / "serial_a" / "raw.csv");
  o.require(!raw.empty(), "empty raw.csv");
  o.require(raw == slurp(work / "serial_b" / "raw.csv"), "serial reruns differ");
  for (const char* f : {"raw.csv", "aggregate.csv", "edges.csv", "lambda.csv", "manifest.txt"}) {
    o.require(slurp(work / "serial_a" / f) == slurp(work / "parallel" / f),
              std::string(f) + " differs between serial and --threads 8");
  }
  o.note("raw.csv " + std::to_string(raw.size()) + " bytes identical across 3 runs");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: " << argv[0] << " <rglasso-bench> <work-dir>\n";
    return 2;
  }
  const fs::path bench = argv[1];
  const fs::path work = argv[2];

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"solver correctness", solver_correctness},
      {"scale and GK oracle equivalence", oracle_equivalence},
      {"winsorization pipeline", winsorization_pipeline},
      {"breakdown contrast under cellwise outliers", breakdown_contrast},
      {"D_KL trend, AR(1) p=60", table1_trend},
      {"graph recovery trend, AR(1) ICM 0.10", graph_recovery_trend},
      {"model generators", model_generators},
      {"ICM row propagation", icm_propagation},
      {"metrics unit checks", metrics_suite},
      {"simulate determinism", [&] { return determinism(bench, work / "determinism"); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    failures += out.pass ? 0 : 1;
    std::cout << "criterion " << (i + 1) << ": " << (out.pass ? "PASS" : "FAIL") << " - "
              << criteria[i].first << " (" << out.detail << ")" << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
