#pragma once

// Monte Carlo benchmark harness: configuration parsing, the replicate loop,
// CSV outputs, CSV-driven estimation and heatmap export.
//
// Seeding: every random stream is derived from the master seed with
// derive_seed() along a fixed path:
//   true model (Rand, NN2)  {0, model}
//   clean sample            {1, model, replicate}
//   contamination           {2, model, scheme, epsilon, replicate}
//   CV fold shuffle         {3, model, scheme, epsilon, replicate}
// where each index is the position in the corresponding config list.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "rglasso/contamination.hpp"
#include "rglasso/csv.hpp"
#include "rglasso/edges.hpp"
#include "rglasso/error.hpp"
#include "rglasso/glasso.hpp"
#include "rglasso/metrics.hpp"
#include "rglasso/model_selection.hpp"
#include "rglasso/model_zoo.hpp"
#include "rglasso/pairwise_estimators.hpp"
#include "rglasso/random.hpp"

namespace rglasso {

inline constexpr const char* kRawHeader =
    "estimator,model,p,n,scheme,epsilon,replicate,mF,dKL,TPR,TNR,MCC,status";
inline constexpr const char* kAggregateHeader =
    "estimator,model,p,n,scheme,epsilon,ok,failed,mF_mean,mF_sd,dKL_mean,dKL_sd,TPR_mean,TPR_sd,"
    "TNR_mean,TNR_sd,MCC_mean,MCC_sd";

struct SchemeCell {
  ContaminationSpec spec;
  std::size_t scheme_index = 0;
  std::size_t epsilon_index = 0;
};

struct ExperimentConfig {
  std::vector<ModelSpec> models;
  std::vector<EstimatorKind> estimators;
  std::vector<SchemeCell> schemes;
  int n = 100;
  int replicates = 100;
  CvConfig cv;
  std::uint64_t master_seed = 1;
  PluginOptions plugin;
  GlassoOptions solver;
  /// Where `simulate` writes; the command line may override it.
  std::filesystem::path output_dir = "runs";
  /// Canonical key=value text of the parsed configuration.
  std::string canonical;
};

struct MetricsRow {
  EstimatorKind estimator = EstimatorKind::Glasso;
  ModelKind model = ModelKind::AR1;
  std::size_t p = 0;
  int n = 0;
  Scheme scheme = Scheme::Clean;
  double epsilon = 0.0;
  int replicate = 0;
  MetricsReport metrics;
  double lambda = 0.0;
  /// "ok", or "failed:<reason>".
  std::string status = "ok";
  EdgeSet edges;

  bool ok() const { return status == "ok"; }
};

struct AggregateRow {
  EstimatorKind estimator = EstimatorKind::Glasso;
  ModelKind model = ModelKind::AR1;
  std::size_t p = 0;
  int n = 0;
  Scheme scheme = Scheme::Clean;
  double epsilon = 0.0;
  int ok = 0;
  int failed = 0;
  // mF, dKL, TPR, TNR, MCC
  std::array<double, 5> mean{};
  std::array<double, 5> sd{};
};

struct RunRecord {
  std::string config_digest;
  std::vector<MetricsRow> rows;
  std::vector<AggregateRow> aggregates;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double out;
  if (!parse_number(v, out) || !std::isfinite(out)) {
    throw ConfigError("'" + key + "': not a number: '" + v + "'");
  }
  return out;
}

inline long long to_integer(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw ConfigError("'" + key + "': not an integer: '" + v + "'");
  return static_cast<long long>(d);
}

inline std::uint64_t to_seed(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long s = std::stoull(v, &used, 0);
    if (used != v.size()) throw ConfigError("'" + key + "': bad seed '" + v + "'");
    return s;
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "': bad seed '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + v + "'");
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string format_epsilon(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

inline std::string sanitize_reason(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return s;
}

}  // namespace detail

/// Default block count for BG when `model.q` is not given.
inline std::optional<std::size_t> default_blocks(std::size_t p) {
  if (p == 200) return 40;
  if (p % 6 == 0) return p / 6;
  return std::nullopt;
}

/// Default hub count when `model.groups` is not given.
inline std::optional<std::size_t> default_groups(std::size_t p) {
  if (p == 60) return 3;
  if (p == 200) return 10;
  return std::nullopt;
}

/// Parses the flat `key=value` experiment file. Lists are comma separated;
/// `#` starts a comment. Recognized keys:
///
///   model.kind          AR1,BG,Rand,NN2,Hub (list)
///   model.p             dimension(s) (list)
///   model.q             BG block count (default p/6; 40 for p = 200)
///   model.groups        Hub group count (default 3 for p = 60, 10 for p = 200)
///   model.prob          Rand edge probability (default 3/p)
///   estimators          estimator names (list; default all seven)
///   contamination.scheme       Clean,ICM,THCM (list)
///   contamination.epsilon      fractions for ICM/THCM (list)
///   contamination.shift / .sigma / .k   outlier parameters (10, 0.2, 100)
///   n, replicates, master_seed, output_dir
///   cv.folds, cv.grid_size, cv.lambda_min_ratio, cv.loss (robust|sample)
///   glasso.penalize_diagonal, glasso.tol, glasso.max_iter
///   winsor.c1, winsor.cutoff, winsor.shrink_raw
///   tau.c, spearman.consistency, quadrant.consistency
inline ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (kv.contains(key)) throw ConfigError("duplicate key '" + key + "'");
    kv[key] = value;
  }

  ExperimentConfig cfg;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  // Scalars first.
  if (auto v = take("n")) cfg.n = static_cast<int>(detail::to_integer("n", *v));
  if (auto v = take("replicates")) cfg.replicates = static_cast<int>(detail::to_integer("replicates", *v));
  if (auto v = take("output_dir")) cfg.output_dir = *v;
  if (auto v = take("master_seed")) cfg.master_seed = detail::to_seed("master_seed", *v);
  if (auto v = take("cv.folds")) cfg.cv.folds = static_cast<int>(detail::to_integer("cv.folds", *v));
  if (auto v = take("cv.grid_size")) cfg.cv.grid_size = static_cast<int>(detail::to_integer("cv.grid_size", *v));
  if (auto v = take("cv.lambda_min_ratio")) cfg.cv.lambda_min_ratio = detail::to_double("cv.lambda_min_ratio", *v);
  if (auto v = take("cv.loss")) {
    if (*v == "robust") cfg.cv.loss = CvLoss::Robust;
    else if (*v == "sample") cfg.cv.loss = CvLoss::Sample;
    else throw ConfigError("'cv.loss': expected robust or sample");
  }
  if (auto v = take("glasso.penalize_diagonal")) cfg.solver.penalize_diagonal = detail::to_bool("glasso.penalize_diagonal", *v);
  if (auto v = take("glasso.tol")) cfg.solver.tol = detail::to_double("glasso.tol", *v);
  if (auto v = take("glasso.max_iter")) cfg.solver.max_iter = static_cast<int>(detail::to_integer("glasso.max_iter", *v));
  if (auto v = take("winsor.c1")) cfg.plugin.winsor.c1 = detail::to_double("winsor.c1", *v);
  if (auto v = take("winsor.cutoff")) cfg.plugin.winsor.mahalanobis_cutoff = detail::to_double("winsor.cutoff", *v);
  if (auto v = take("winsor.shrink_raw")) cfg.plugin.winsor.shrink_raw = detail::to_bool("winsor.shrink_raw", *v);
  if (auto v = take("tau.c")) cfg.plugin.tau.c = detail::to_double("tau.c", *v);
  if (auto v = take("spearman.consistency")) cfg.plugin.rank.spearman_consistency = detail::to_bool("spearman.consistency", *v);
  if (auto v = take("quadrant.consistency")) cfg.plugin.rank.quadrant_consistency = detail::to_bool("quadrant.consistency", *v);

  if (cfg.n < 3) throw ConfigError("'n' must be at least 3");
  if (cfg.replicates < 1) throw ConfigError("'replicates' must be at least 1");
  if (cfg.cv.folds < 2 || cfg.cv.folds > cfg.n) throw ConfigError("'cv.folds' must lie in [2, n]");
  if (cfg.cv.grid_size < 1) throw ConfigError("'cv.grid_size' must be at least 1");
  if (!(cfg.cv.lambda_min_ratio > 0.0 && cfg.cv.lambda_min_ratio < 1.0)) {
    throw ConfigError("'cv.lambda_min_ratio' must lie in (0, 1)");
  }
  if (!(cfg.solver.tol > 0.0) || cfg.solver.max_iter < 1) throw ConfigError("bad glasso tolerance settings");
  if (!(cfg.plugin.winsor.c1 > 0.0) || !(cfg.plugin.winsor.mahalanobis_cutoff > 0.0)) {
    throw ConfigError("winsor.c1 and winsor.cutoff must be positive");
  }
  if (!(cfg.plugin.tau.c > 0.0)) throw ConfigError("'tau.c' must be positive");

  // Models.
  const auto kinds = detail::split_list(take("model.kind").value_or(""));
  if (kinds.empty()) throw ConfigError("'model.kind' is required");
  const auto dims = detail::split_list(take("model.p").value_or("60"));
  if (dims.empty()) throw ConfigError("'model.p' is empty");
  const auto q = take("model.q");
  const auto groups = take("model.groups");
  const auto prob = take("model.prob");
  for (const auto& kname : kinds) {
    const auto kind = parse_model(kname);
    if (!kind) throw ConfigError("unknown model '" + kname + "'");
    for (const auto& dname : dims) {
      ModelSpec spec;
      spec.kind = *kind;
      const long long p = detail::to_integer("model.p", dname);
      if (p < 4) throw ConfigError("'model.p' must be at least 4");
      spec.p = static_cast<std::size_t>(p);
      if (*kind == ModelKind::BG) {
        auto blocks = q ? std::optional<std::size_t>(static_cast<std::size_t>(detail::to_integer("model.q", *q)))
                        : default_blocks(spec.p);
        if (!blocks || *blocks == 0 || spec.p % *blocks != 0) {
          throw ConfigError("BG needs 'model.q' dividing p = " + std::to_string(spec.p));
        }
        spec.q = *blocks;
      }
      if (*kind == ModelKind::Hub) {
        auto g = groups ? std::optional<std::size_t>(static_cast<std::size_t>(detail::to_integer("model.groups", *groups)))
                        : default_groups(spec.p);
        if (!g || *g == 0 || spec.p % *g != 0) {
          throw ConfigError("Hub needs 'model.groups' dividing p = " + std::to_string(spec.p));
        }
        spec.groups = *g;
      }
      spec.prob = prob ? detail::to_double("model.prob", *prob) : 3.0 / static_cast<double>(spec.p);
      if (!(spec.prob > 0.0 && spec.prob < 1.0)) throw ConfigError("'model.prob' must lie in (0, 1)");
      const std::size_t mi = cfg.models.size();
      spec.seed = derive_seed(cfg.master_seed, {0, mi});
      cfg.models.push_back(spec);
    }
  }

  // Estimators.
  if (auto v = take("estimators")) {
    for (const auto& name : detail::split_list(*v)) {
      const auto k = parse_estimator(name);
      if (!k) throw ConfigError("unknown estimator '" + name + "'");
      cfg.estimators.push_back(*k);
    }
    if (cfg.estimators.empty()) throw ConfigError("'estimators' is empty");
  } else {
    cfg.estimators.assign(kAllEstimators.begin(), kAllEstimators.end());
  }

  // Contamination cells.
  const auto schemes = detail::split_list(take("contamination.scheme").value_or("Clean"));
  const auto eps_text = detail::split_list(take("contamination.epsilon").value_or(""));
  ContaminationSpec base;
  if (auto v = take("contamination.shift")) base.shift = detail::to_double("contamination.shift", *v);
  if (auto v = take("contamination.sigma")) base.sigma_scale = detail::to_double("contamination.sigma", *v);
  if (auto v = take("contamination.k")) base.k = detail::to_double("contamination.k", *v);
  if (schemes.empty()) throw ConfigError("'contamination.scheme' is empty");
  for (std::size_t si = 0; si < schemes.size(); ++si) {
    const auto scheme = parse_scheme(schemes[si]);
    if (!scheme) throw ConfigError("unknown contamination scheme '" + schemes[si] + "'");
    if (*scheme == Scheme::Clean) {
      SchemeCell cell{base, si, 0};
      cell.spec.scheme = Scheme::Clean;
      cell.spec.epsilon = 0.0;
      cfg.schemes.push_back(cell);
      continue;
    }
    if (eps_text.empty()) throw ConfigError("'contamination.epsilon' is required for " + schemes[si]);
    for (std::size_t ei = 0; ei < eps_text.size(); ++ei) {
      const double eps = detail::to_double("contamination.epsilon", eps_text[ei]);
      if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
      SchemeCell cell{base, si, ei};
      cell.spec.scheme = *scheme;
      cell.spec.epsilon = eps;
      cfg.schemes.push_back(cell);
    }
  }

  if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "'");

  // Canonical text for the digest.
  std::ostringstream c;
  c << "n=" << cfg.n << "\nreplicates=" << cfg.replicates << "\nmaster_seed=" << cfg.master_seed
    << "\ncv=" << cfg.cv.folds << ',' << cfg.cv.grid_size << ',' << format_double(cfg.cv.lambda_min_ratio)
    << ',' << (cfg.cv.loss == CvLoss::Robust ? "robust" : "sample") << "\nglasso="
    << cfg.solver.penalize_diagonal << ',' << format_double(cfg.solver.tol) << ',' << cfg.solver.max_iter
    << "\nwinsor=" << format_double(cfg.plugin.winsor.c1) << ','
    << format_double(cfg.plugin.winsor.mahalanobis_cutoff) << ',' << cfg.plugin.winsor.shrink_raw
    << "\ntau=" << format_double(cfg.plugin.tau.c) << "\nrank=" << cfg.plugin.rank.spearman_consistency
    << ',' << cfg.plugin.rank.quadrant_consistency << '\n';
  for (const auto& m : cfg.models) {
    c << "model=" << to_string(m.kind) << ',' << m.p << ',' << m.q << ',' << m.groups << ','
      << format_double(m.prob) << '\n';
  }
  for (EstimatorKind e : cfg.estimators) c << "estimator=" << to_string(e) << '\n';
  for (const auto& s : cfg.schemes) {
    c << "scheme=" << to_string(s.spec.scheme) << ',' << format_double(s.spec.epsilon) << ','
      << format_double(s.spec.shift) << ',' << format_double(s.spec.sigma_scale) << ','
      << format_double(s.spec.k) << '\n';
  }
  cfg.canonical = c.str();
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

inline std::string config_digest(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(cfg.canonical)));
  return buf;
}

/// Per-cell mean and sample standard deviation over successful rows. Rows
/// must be grouped by cell, in replicate order, as run_experiment emits them.
inline std::vector<AggregateRow> aggregate(const std::vector<MetricsRow>& rows) {
  std::vector<AggregateRow> out;
  std::map<std::tuple<int, int, std::size_t, int, int, double>, std::size_t> index;
  std::vector<std::array<std::vector<double>, 5>> values;
  for (const MetricsRow& r : rows) {
    const auto key = std::make_tuple(static_cast<int>(r.estimator), static_cast<int>(r.model), r.p,
                                     r.n, static_cast<int>(r.scheme), r.epsilon);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      AggregateRow a;
      a.estimator = r.estimator;
      a.model = r.model;
      a.p = r.p;
      a.n = r.n;
      a.scheme = r.scheme;
      a.epsilon = r.epsilon;
      out.push_back(a);
      values.emplace_back();
    }
    AggregateRow& a = out[it->second];
    if (!r.ok()) {
      ++a.failed;
      continue;
    }
    ++a.ok;
    const std::array<double, 5> v = {r.metrics.m_f, r.metrics.d_kl, r.metrics.rates.tpr,
                                     r.metrics.rates.tnr, r.metrics.rates.mcc};
    for (std::size_t m = 0; m < 5; ++m) values[it->second][m].push_back(v[m]);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t c = 0; c < out.size(); ++c) {
    for (std::size_t m = 0; m < 5; ++m) {
      const auto& xs = values[c][m];
      if (xs.empty()) {
        out[c].mean[m] = out[c].sd[m] = nan;
        continue;
      }
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      out[c].mean[m] = mean;
      out[c].sd[m] = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    }
  }
  return out;
}

/// Runs the full grid. Rows come out ordered by (model, scheme cell,
/// replicate, estimator) independent of `threads`.
inline RunRecord run_experiment(const ExperimentConfig& cfg, unsigned threads = 1) {
  std::vector<TrueModel> truth;
  truth.reserve(cfg.models.size());
  for (const ModelSpec& m : cfg.models) truth.push_back(make_model(m));

  struct Task {
    std::size_t model;
    std::size_t cell;
    int replicate;
  };
  std::vector<Task> tasks;
  for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
    for (std::size_t ci = 0; ci < cfg.schemes.size(); ++ci) {
      for (int r = 0; r < cfg.replicates; ++r) tasks.push_back({mi, ci, r});
    }
  }
  std::vector<std::vector<MetricsRow>> results(tasks.size());

  auto run_task = [&](std::size_t t) {
    const Task& task = tasks[t];
    const ModelSpec& mspec = cfg.models[task.model];
    const TrueModel& tm = truth[task.model];
    const SchemeCell& cell = cfg.schemes[task.cell];
    const auto r = static_cast<std::uint64_t>(task.replicate);
    const std::uint64_t mi = task.model;

    std::vector<MetricsRow>& out = results[t];
    out.reserve(cfg.estimators.size());
    auto make_row = [&](EstimatorKind e) {
      MetricsRow row;
      row.estimator = e;
      row.model = mspec.kind;
      row.p = mspec.p;
      row.n = cfg.n;
      row.scheme = cell.spec.scheme;
      row.epsilon = cell.spec.epsilon;
      row.replicate = task.replicate;
      return row;
    };

    DataMatrix y;
    try {
      const DataMatrix x = mvn_sample(tm.sigma, cfg.n, derive_seed(cfg.master_seed, {1, mi, r}));
      ContaminationSpec cs = cell.spec;
      cs.seed = derive_seed(cfg.master_seed, {2, mi, cell.scheme_index, cell.epsilon_index, r});
      y = contaminate(x, cs, tm.sigma).data;
    } catch (const std::exception& ex) {
      for (EstimatorKind e : cfg.estimators) {
        MetricsRow row = make_row(e);
        row.status = "failed:" + detail::sanitize_reason(ex.what());
        out.push_back(std::move(row));
      }
      return;
    }

    CvConfig cv = cfg.cv;
    cv.seed = derive_seed(cfg.master_seed, {3, mi, cell.scheme_index, cell.epsilon_index, r});
    for (EstimatorKind e : cfg.estimators) {
      MetricsRow row = make_row(e);
      try {
        const FitResult fit = fit_with_cv(y, e, cv, cfg.plugin, cfg.solver);
        row.lambda = fit.cv.lambda_star;
        row.edges = edge_set(fit.estimate);
        row.metrics = evaluate(fit.estimate.omega, row.edges, tm.omega, tm.edges);
      } catch (const std::exception& ex) {
        row.status = "failed:" + detail::sanitize_reason(ex.what());
        row.edges.clear();
      }
      out.push_back(std::move(row));
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks.size())));
  if (workers <= 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) run_task(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  RunRecord rec;
  rec.config_digest = config_digest(cfg);
  for (auto& chunk : results) {
    for (auto& row : chunk) rec.rows.push_back(std::move(row));
  }
  rec.aggregates = aggregate(rec.rows);
  return rec;
}

namespace detail {

inline std::string cell_prefix(EstimatorKind e, ModelKind m, std::size_t p, int n, Scheme s, double eps) {
  std::ostringstream o;
  o << to_string(e) << ',' << to_string(m) << ',' << p << ',' << n << ',' << to_string(s) << ','
    << format_epsilon(eps);
  return o.str();
}

inline std::string metric_text(double v) {
  return std::isfinite(v) ? format_double(v) : std::string("NA");
}

}  // namespace detail

inline void write_raw_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kRawHeader << '\n';
  for (const MetricsRow& r : rows) {
    out << detail::cell_prefix(r.estimator, r.model, r.p, r.n, r.scheme, r.epsilon) << ','
        << r.replicate << ',';
    if (r.ok()) {
      out << format_double(r.metrics.m_f) << ',' << format_double(r.metrics.d_kl) << ','
          << format_double(r.metrics.rates.tpr) << ',' << format_double(r.metrics.rates.tnr) << ','
          << format_double(r.metrics.rates.mcc);
    } else {
      out << "NA,NA,NA,NA,NA";
    }
    out << ',' << r.status << '\n';
  }
}

inline void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggregateHeader << '\n';
  for (const AggregateRow& a : rows) {
    out << detail::cell_prefix(a.estimator, a.model, a.p, a.n, a.scheme, a.epsilon) << ',' << a.ok
        << ',' << a.failed;
    for (std::size_t m = 0; m < 5; ++m) {
      out << ',' << detail::metric_text(a.mean[m]) << ',' << detail::metric_text(a.sd[m]);
    }
    out << '\n';
  }
}

/// One row per estimated edge: cell, replicate, i, j (0-based).
inline void write_edges_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "estimator,model,p,n,scheme,epsilon,replicate,i,j\n";
  for (const MetricsRow& r : rows) {
    const std::string prefix = detail::cell_prefix(r.estimator, r.model, r.p, r.n, r.scheme, r.epsilon);
    for (const Edge& e : r.edges) {
      out << prefix << ',' << r.replicate << ',' << e.i << ',' << e.j << '\n';
    }
  }
}

/// Writes raw.csv, aggregate.csv, edges.csv, lambda.csv and manifest.txt.
inline void write_run(const RunRecord& rec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw DataError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("raw.csv");
    write_raw_csv(f, rec.rows);
  }
  {
    auto f = open("aggregate.csv");
    write_aggregate_csv(f, rec.aggregates);
  }
  {
    auto f = open("edges.csv");
    write_edges_csv(f, rec.rows);
  }
  {
    auto f = open("lambda.csv");
    f << "estimator,model,p,n,scheme,epsilon,replicate,lambda\n";
    for (const MetricsRow& r : rec.rows) {
      f << detail::cell_prefix(r.estimator, r.model, r.p, r.n, r.scheme, r.epsilon) << ','
        << r.replicate << ',' << (r.ok() ? format_double(r.lambda) : std::string("NA")) << '\n';
    }
  }
  {
    auto f = open("manifest.txt");
    f << "config_digest=" << rec.config_digest << "\nrows=" << rec.rows.size()
      << "\ncells=" << rec.aggregates.size() << '\n';
  }
}

namespace detail {

inline MetricsRow parse_raw_line(const std::string& line, std::size_t line_no) {
  const auto c = split_csv_line(line);
  auto fail = [&](const std::string& why) {
    return DataError("raw.csv line " + std::to_string(line_no) + ": " + why);
  };
  if (c.size() != 13) throw fail("expected 13 fields");
  MetricsRow r;
  const auto e = parse_estimator(c[0]);
  const auto m = parse_model(c[1]);
  const auto s = parse_scheme(c[4]);
  if (!e || !m || !s) throw fail("unknown estimator, model or scheme");
  r.estimator = *e;
  r.model = *m;
  r.scheme = *s;
  double v;
  if (!parse_number(c[2], v)) throw fail("bad p");
  r.p = static_cast<std::size_t>(v);
  if (!parse_number(c[3], v)) throw fail("bad n");
  r.n = static_cast<int>(v);
  if (!parse_number(c[5], r.epsilon)) throw fail("bad epsilon");
  if (!parse_number(c[6], v)) throw fail("bad replicate");
  r.replicate = static_cast<int>(v);
  r.status = c[12];
  if (r.ok()) {
    if (!parse_number(c[7], r.metrics.m_f) || !parse_number(c[8], r.metrics.d_kl) ||
        !parse_number(c[9], r.metrics.rates.tpr) || !parse_number(c[10], r.metrics.rates.tnr) ||
        !parse_number(c[11], r.metrics.rates.mcc)) {
      throw fail("bad metric value");
    }
  }
  return r;
}

}  // namespace detail

inline std::vector<MetricsRow> read_raw_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kRawHeader) {
    throw DataError("raw.csv: unexpected header");
  }
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::parse_raw_line(line, line_no));
  }
  return rows;
}

/// Loads a run directory and checks that aggregate.csv matches the mean and
/// SD recomputed from raw.csv to 1e-12 (relative for large values).
inline RunRecord load_run_record(const std::filesystem::path& dir) {
  RunRecord rec;
  {
    std::ifstream f(dir / "raw.csv");
    if (!f) throw DataError("cannot open " + (dir / "raw.csv").string());
    rec.rows = read_raw_csv(f);
  }
  rec.aggregates = aggregate(rec.rows);
  {
    std::ifstream f(dir / "manifest.txt");
    std::string line;
    while (std::getline(f, line)) {
      if (line.rfind("config_digest=", 0) == 0) rec.config_digest = line.substr(14);
    }
  }
  std::ifstream f(dir / "aggregate.csv");
  if (!f) throw DataError("cannot open " + (dir / "aggregate.csv").string());
  std::string line;
  std::getline(f, line);
  std::size_t idx = 0;
  while (std::getline(f, line)) {
    if (detail::trim(line).empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 18 || idx >= rec.aggregates.size()) throw DataError("aggregate.csv: malformed");
    const AggregateRow& a = rec.aggregates[idx++];
    for (std::size_t m = 0; m < 5; ++m) {
      for (int which = 0; which < 2; ++which) {
        const std::string& text = c[8 + 2 * m + static_cast<std::size_t>(which)];
        const double expect = which == 0 ? a.mean[m] : a.sd[m];
        if (text == "NA") {
          if (std::isfinite(expect)) throw DataError("aggregate.csv: NA where raw rows give a value");
          continue;
        }
        double got;
        if (!parse_number(text, got)) throw DataError("aggregate.csv: bad number");
        if (std::abs(got - expect) > 1e-12 * std::max(1.0, std::abs(expect))) {
          throw DataError("aggregate.csv: value disagrees with raw.csv");
        }
      }
    }
  }
  if (idx != rec.aggregates.size()) throw DataError("aggregate.csv: missing cells");
  return rec;
}

/// Cell selector for heatmaps: estimator, model (optionally "model:p"),
/// scheme, epsilon.
struct CellSelector {
  EstimatorKind estimator = EstimatorKind::Glasso;
  ModelKind model = ModelKind::AR1;
  std::optional<std::size_t> p;
  Scheme scheme = Scheme::Clean;
  double epsilon = 0.0;
};

inline CellSelector parse_cell_selector(const std::string& text) {
  const auto parts = detail::split_list(text);
  if (parts.size() != 4) throw ConfigError("--cell expects estimator,model,scheme,eps");
  CellSelector sel;
  const auto e = parse_estimator(parts[0]);
  if (!e) throw ConfigError("unknown estimator '" + parts[0] + "'");
  sel.estimator = *e;
  std::string model = parts[1];
  if (const auto colon = model.find(':'); colon != std::string::npos) {
    sel.p = static_cast<std::size_t>(detail::to_integer("--cell", model.substr(colon + 1)));
    model = model.substr(0, colon);
  }
  const auto m = parse_model(model);
  if (!m) throw ConfigError("unknown model '" + model + "'");
  sel.model = *m;
  const auto s = parse_scheme(parts[2]);
  if (!s) throw ConfigError("unknown scheme '" + parts[2] + "'");
  sel.scheme = *s;
  sel.epsilon = detail::to_double("--cell", parts[3]);
  return sel;
}

/// Edge-frequency matrix over the successful replicates of one cell.
inline Eigen::MatrixXd heatmap_from_run(const std::filesystem::path& dir, const CellSelector& sel) {
  std::ifstream raw(dir / "raw.csv");
  if (!raw) throw DataError("cannot open " + (dir / "raw.csv").string());
  const auto rows = read_raw_csv(raw);
  auto matches = [&](EstimatorKind e, ModelKind m, std::size_t p, Scheme s, double eps) {
    return e == sel.estimator && m == sel.model && s == sel.scheme &&
           std::abs(eps - sel.epsilon) < 1e-12 && (!sel.p || *sel.p == p);
  };
  std::optional<std::size_t> p;
  std::map<int, EdgeSet> per_rep;
  for (const MetricsRow& r : rows) {
    if (!matches(r.estimator, r.model, r.p, r.scheme, r.epsilon) || !r.ok()) continue;
    if (p && *p != r.p) throw ConfigError("cell matches several dimensions; use model:p");
    p = r.p;
    per_rep[r.replicate];
  }
  if (!p) throw ConfigError("no successful replicates for the requested cell");

  std::ifstream edges(dir / "edges.csv");
  if (!edges) throw DataError("cannot open " + (dir / "edges.csv").string());
  std::string line;
  std::getline(edges, line);
  while (std::getline(edges, line)) {
    const auto c = split_csv_line(line);
    if (c.size() != 9) continue;
    const auto e = parse_estimator(c[0]);
    const auto m = parse_model(c[1]);
    const auto s = parse_scheme(c[4]);
    double pp, eps, rep, i, j;
    if (!e || !m || !s || !parse_number(c[2], pp) || !parse_number(c[5], eps) ||
        !parse_number(c[6], rep) || !parse_number(c[7], i) || !parse_number(c[8], j)) {
      throw DataError("edges.csv: malformed line");
    }
    if (!matches(*e, *m, static_cast<std::size_t>(pp), *s, eps)) continue;
    auto it = per_rep.find(static_cast<int>(rep));
    if (it != per_rep.end()) it->second.insert(make_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
  }
  std::vector<EdgeSet> sets;
  for (auto& [rep, set] : per_rep) sets.push_back(std::move(set));
  return adjacency_frequency(sets, *p);
}

/// Gray level for an adjacency frequency: 0 -> 255 (white), 1 -> 0 (black),
/// rounding half up.
inline int heatmap_pixel(double freq) {
  const double f = std::clamp(freq, 0.0, 1.0);
  return static_cast<int>(std::floor(255.0 * (1.0 - f) + 0.5));
}

/// Writes `<stem>.csv` (the matrix) and `<stem>.pgm` (plain P2 graymap).
/// A trailing .pgm or .csv on `path` is replaced.
inline void export_heatmap(const Eigen::MatrixXd& freq, std::filesystem::path path) {
  if (path.extension() == ".pgm" || path.extension() == ".csv") path.replace_extension();
  for (Eigen::Index i = 0; i < freq.size(); ++i) {
    const double v = freq.data()[i];
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("export_heatmap: entries must lie in [0, 1]");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path csv = path;
  csv += ".csv";
  std::filesystem::path pgm = path;
  pgm += ".pgm";
  {
    std::ofstream f(csv, std::ios::binary);
    if (!f) throw DataError("cannot write " + csv.string());
    write_matrix_csv(f, freq);
  }
  std::ofstream f(pgm, std::ios::binary);
  if (!f) throw DataError("cannot write " + pgm.string());
  f << "P2\n" << freq.cols() << ' ' << freq.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < freq.rows(); ++i) {
    for (Eigen::Index j = 0; j < freq.cols(); ++j) {
      if (j) f << ' ';
      f << heatmap_pixel(freq(i, j));
    }
    f << '\n';
  }
  if (!f) throw DataError("write failed for " + pgm.string());
}

struct EstimateReport {
  std::vector<std::string> column_names;
  FitResult fit;
  EdgeSet edges;
  double density = 0.0;
};

/// Estimates a network from an n x p CSV table and writes omega.csv,
/// edges.csv, cv.csv and summary.txt into `out_dir`.
inline EstimateReport estimate_from_csv(const std::filesystem::path& input, EstimatorKind kind,
                                        const CvConfig& cv, const std::filesystem::path& out_dir,
                                        const PluginOptions& plugin = {},
                                        const GlassoOptions& solver = {}) {
  NumericTable table = read_numeric_csv(input.string());
  const auto n = table.values.rows();
  const auto p = table.values.cols();
  if (n < 3 || p < 2) throw DataError("need at least 3 rows and 2 columns, got " +
                                      std::to_string(n) + "x" + std::to_string(p));
  if (n < cv.folds) throw DataError("fewer rows than CV folds");
  EstimateReport rep;
  rep.column_names = table.column_names;
  try {
    rep.fit = fit_with_cv(table.values, kind, cv, plugin, solver);
  } catch (const DegenerateColumn& ex) {
    const std::string name = ex.column() < table.column_names.size() ? table.column_names[ex.column()]
                                                                      : std::to_string(ex.column());
    throw DegenerateColumn(ex.column(), "column '" + name + "' has zero robust scale");
  }
  rep.edges = edge_set(rep.fit.estimate);
  rep.density = network_density(rep.edges, static_cast<std::size_t>(p));

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(out_dir / "omega.csv", std::ios::binary);
    write_matrix_csv(f, rep.fit.estimate.omega.matrix());
  }
  {
    std::ofstream f(out_dir / "edges.csv", std::ios::binary);
    f << "i,j,node_i,node_j,weight\n";
    for (const Edge& e : rep.edges) {
      f << e.i << ',' << e.j << ',' << table.column_names[e.i] << ',' << table.column_names[e.j] << ','
        << format_double(rep.fit.estimate.omega(e.i, e.j)) << '\n';
    }
  }
  {
    std::ofstream f(out_dir / "cv.csv", std::ios::binary);
    write_cv_curve_csv(f, rep.fit.cv);
  }
  {
    std::ofstream f(out_dir / "summary.txt", std::ios::binary);
    f << "estimator=" << to_string(kind) << "\nn=" << n << "\np=" << p
      << "\nlambda=" << format_double(rep.fit.cv.lambda_star) << "\nedges=" << rep.edges.size()
      << "\ndensity=" << format_double(rep.density) << '\n';
  }
  return rep;
}

}  // namespace rglasso
