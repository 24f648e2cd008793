// Simulation studies: data generators, excess-risk estimates and the seeded
// Monte-Carlo harness comparing Agghoo/Majhoo with Monte-Carlo CV.
//
// Normal laws are written N(mean, variance): inputs X ~ N(0, pi) have
// standard deviation sqrt(pi) and noise N(0, 1/2) has standard deviation
// sqrt(1/2).
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "agghoo/core.hpp"
#include "agghoo/kernel.hpp"
#include "agghoo/knn.hpp"
#include "agghoo/rng.hpp"
#include "agghoo/select.hpp"

namespace agghoo::sim {

// ---------------------------------------------------------------------------
// Regression study: Y = exp(cos X) + Z
// ---------------------------------------------------------------------------

struct RegressionSimSpec {
  std::size_t n = 500;
  double x_variance = std::numbers::pi;
  double noise_variance = 0.5;
  std::uint64_t seed = 0;
};

inline double regression_function(double x) { return std::exp(std::cos(x)); }

inline Dataset gen_regression(const RegressionSimSpec& spec) {
  require(spec.n >= 1, "gen_regression: n must be >= 1");
  SplitMix64 rng(spec.seed);
  const double sx = std::sqrt(spec.x_variance);
  const double sz = std::sqrt(spec.noise_variance);
  RowMatrix x(static_cast<Eigen::Index>(spec.n), 1);
  Vector y(static_cast<Eigen::Index>(spec.n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = sx * rng.normal();
    y(i) = regression_function(x(i, 0)) + sz * rng.normal();
  }
  return Dataset(std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------
// Classification study: X ~ U[0,1]^2, P(Y=1|X) = sigmoid((g(X) - b) / scale)
// ---------------------------------------------------------------------------

struct ClassifSimSpec {
  std::size_t n = 500;
  double threshold = 1.18;  // b
  double scale = 0.05;      // lambda of the logistic link
  std::uint64_t seed = 0;
};

inline double link_surface(double u, double v) {
  const double t = u * u + v;
  return std::exp(-t * t * t) + u * u + v * v;
}

inline double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

inline double class_probability(std::span<const double> x, double threshold = 1.18, double scale = 0.05) {
  return sigmoid((link_surface(x[0], x[1]) - threshold) / scale);
}

/// 1{g(x) >= b}
inline double bayes_label(std::span<const double> x, double threshold = 1.18) {
  return link_surface(x[0], x[1]) >= threshold ? 1.0 : 0.0;
}

inline Dataset gen_classification(const ClassifSimSpec& spec) {
  require(spec.n >= 1, "gen_classification: n must be >= 1");
  require(spec.scale > 0.0, "gen_classification: scale must be > 0");
  SplitMix64 rng(spec.seed);
  RowMatrix x(static_cast<Eigen::Index>(spec.n), 2);
  Vector y(static_cast<Eigen::Index>(spec.n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.uniform();
    x(i, 1) = rng.uniform();
    const double eta = class_probability(row_span(x, i), spec.threshold, spec.scale);
    y(i) = rng.uniform() < eta ? 1.0 : 0.0;
  }
  return Dataset(std::move(x), std::move(y));
}

/// E[min(eta, 1-eta)] by the midpoint rule on a nodes x nodes grid.
inline double bayes_risk_quadrature(std::size_t nodes = 1000, double threshold = 1.18, double scale = 0.05) {
  double acc = 0.0;
  double x[2];
  for (std::size_t i = 0; i < nodes; ++i) {
    x[0] = (static_cast<double>(i) + 0.5) / static_cast<double>(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
      x[1] = (static_cast<double>(j) + 0.5) / static_cast<double>(nodes);
      const double eta = class_probability(x, threshold, scale);
      acc += std::min(eta, 1.0 - eta);
    }
  }
  return acc / static_cast<double>(nodes * nodes);
}

// ---------------------------------------------------------------------------
// Excess risk
// ---------------------------------------------------------------------------

enum class StudyTask { eps_svr, knn };

enum class ClassifExcess {
  /// mean over test x of |2 eta(x) - 1| 1{pred(x) != bayes(x)}; uses the
  /// known conditional law, ignores test labels.
  eta_weighted,
  /// mean 1{pred != y} - mean 1{bayes != y} on the same test sample.
  paired_zero_one,
};

/// Excess-risk estimate from predictions at the test inputs.
inline double excess_from_predictions(StudyTask task, const Vector& predictions, const Dataset& test,
                                      ClassifExcess estimator = ClassifExcess::eta_weighted) {
  require(predictions.size() == static_cast<Eigen::Index>(test.size()), "excess: prediction count mismatch");
  const auto n = static_cast<double>(test.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto x = test.row(i);
    const double p = predictions(static_cast<Eigen::Index>(i));
    const double y = test.y()(static_cast<Eigen::Index>(i));
    if (task == StudyTask::eps_svr) {
      acc += std::abs(p - y) - std::abs(regression_function(x[0]) - y);
    } else {
      const double bayes = bayes_label(x);
      const bool wrong = label_of(p) != label_of(bayes);
      if (estimator == ClassifExcess::eta_weighted) {
        if (wrong) acc += std::abs(2.0 * class_probability(x) - 1.0);
      } else {
        acc += (label_of(p) != label_of(y) ? 1.0 : 0.0) - (label_of(bayes) != label_of(y) ? 1.0 : 0.0);
      }
    }
  }
  return acc / n;
}

inline double excess_risk_estimate(const Predictor& pred, const Dataset& test, StudyTask task,
                                   ClassifExcess estimator = ClassifExcess::eta_weighted) {
  const Task expected = task == StudyTask::eps_svr ? Task::regression : Task::classification;
  require(pred.task() == expected, "excess_risk_estimate: predictor task does not match the study");
  require(test.dim() == (task == StudyTask::eps_svr ? 1u : 2u), "excess_risk_estimate: test set shape mismatch");
  return excess_from_predictions(task, pred.predict_rows(test.x()), test, estimator);
}

// ---------------------------------------------------------------------------
// Experiment harness
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  StudyTask task = StudyTask::eps_svr;
  std::size_t n = 500;
  std::size_t n_test = 1000;
  std::size_t replicates = 1000;
  std::vector<double> taus{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::size_t> vs{1, 2, 5, 10};
  // eps_svr
  std::vector<double> costs = KernelFamily::default_costs();
  double epsilon = 0.25;
  double bandwidth = 0.5;
  SolverConfig solver;
  // knn: explicit grid, or odd k up to min(n_t, k_cap) when empty
  std::vector<std::size_t> ks;
  std::size_t k_cap = 99;
  ClassifExcess classif_excess = ClassifExcess::paired_zero_one;
  bool include_oracle = true;
  std::uint64_t seed = 20190101;
  std::size_t threads = 0;  // 0: AGGHOO_THREADS, else hardware concurrency
  std::string output;             // report CSV path, optional
  std::string replicate_output;   // per-replicate CSV path, optional
};

struct RiskRow {
  std::string method;  // agghoo | majhoo | cv | oracle
  std::optional<double> tau;
  std::optional<std::size_t> V;
  double mean_excess = 0.0;
  double se = 0.0;
  std::size_t replicates = 0;
};

struct ReplicateRow {
  std::size_t replicate = 0;
  std::string method;
  std::optional<double> tau;
  std::optional<std::size_t> V;
  double excess = 0.0;
};

struct RiskReport {
  std::vector<RiskRow> rows;
  std::vector<ReplicateRow> per_replicate;  // replicate-major, then row order
  std::vector<std::string> warnings;

  const RiskRow* find(const std::string& method, std::optional<double> tau, std::optional<std::size_t> V) const {
    for (const auto& r : rows) {
      const bool tau_ok = tau ? (r.tau && std::abs(*r.tau - *tau) < 1e-12) : !r.tau;
      if (r.method == method && tau_ok && r.V == V) return &r;
    }
    return nullptr;
  }
};

/// Mean and standard error (sample sd / sqrt(R); 0 when R = 1), summing in
/// index order.
inline std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  require(!v.empty(), "mean_and_se: empty");
  const auto r = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / r;
  if (v.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (r - 1.0)) / std::sqrt(r)};
}

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("AGGHOO_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

namespace detail {

struct Cell {
  std::string method;
  std::optional<double> tau;
  std::optional<std::size_t> V;
};

inline std::uint64_t double_bits(double v) {
  std::uint64_t b = 0;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

inline Dataset draw_sample(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed) {
  if (cfg.task == StudyTask::eps_svr) return gen_regression({n, std::numbers::pi, 0.5, seed});
  return gen_classification({n, 1.18, 0.05, seed});
}

inline std::unique_ptr<RuleFamily> make_family(const ExperimentConfig& cfg, std::size_t n_train) {
  if (cfg.task == StudyTask::eps_svr) {
    return std::make_unique<KernelFamily>(cfg.costs, LossSpec::eps_insensitive(cfg.epsilon), LossSpec::absolute(),
                                          KernelSpec::gaussian(cfg.bandwidth), cfg.solver);
  }
  std::vector<std::size_t> ks;
  if (cfg.ks.empty()) {
    ks = odd_k_grid(n_train, cfg.k_cap);
  } else {
    for (std::size_t k : cfg.ks)
      if (k <= n_train) ks.push_back(k);
  }
  return std::make_unique<KnnFamily>(std::move(ks));
}

}  // namespace detail

/// Per-replicate seeds: the replicate's data come from hash64(seed, r, tag)
/// and the split plan for training fraction tau from
/// hash64(seed, r, "splits", bits(tau)). For each tau one plan of max(V)
/// subsets is drawn and every V uses its first V subsets; Agghoo/Majhoo and
/// CV at the same (tau, V) share those splits.
inline RiskReport run_experiment(const ExperimentConfig& cfg) {
  require(cfg.n >= 2 && cfg.n_test >= 1 && cfg.replicates >= 1, "run_experiment: bad sizes");
  require(cfg.taus.empty() || !cfg.vs.empty(), "run_experiment: empty V grid");
  for (std::size_t v : cfg.vs) require(v >= 1, "run_experiment: V must be >= 1");
  if (cfg.task == StudyTask::eps_svr) require(!cfg.costs.empty(), "run_experiment: empty cost grid");

  RiskReport report;
  std::vector<std::pair<double, std::size_t>> feasible;  // (tau, n_t)
  for (double tau : cfg.taus) {
    const double raw = std::floor(tau * static_cast<double>(cfg.n) + 1e-9);
    if (!(tau > 0.0 && tau < 1.0) || raw < 1.0 || raw > static_cast<double>(cfg.n - 1)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "tau=%g skipped: floor(tau*n) outside [1, n-1]", tau);
      report.warnings.emplace_back(buf);
      continue;
    }
    feasible.emplace_back(tau, static_cast<std::size_t>(raw));
  }
  const std::size_t v_max = cfg.vs.empty() ? 0 : *std::max_element(cfg.vs.begin(), cfg.vs.end());
  const std::string agg_name = cfg.task == StudyTask::eps_svr ? "agghoo" : "majhoo";

  std::vector<detail::Cell> cells;
  for (const auto& [tau, nt] : feasible) {
    for (std::size_t v : cfg.vs) {
      cells.push_back({agg_name, tau, v});
      cells.push_back({"cv", tau, v});
    }
  }
  if (cfg.include_oracle) cells.push_back({"oracle", std::nullopt, std::nullopt});
  require(!cells.empty(), "run_experiment: nothing to compute");

  auto run_replicate = [&](std::size_t r) {
    std::vector<double> out;
    out.reserve(cells.size());
    const std::uint64_t rs = hash64({cfg.seed, r});
    const Dataset train = detail::draw_sample(cfg, cfg.n, hash64({rs, fnv1a64("train")}));
    const Dataset test = detail::draw_sample(cfg, cfg.n_test, hash64({rs, fnv1a64("test")}));
    auto excess = [&](const Vector& pred) {
      return excess_from_predictions(cfg.task, pred, test, cfg.classif_excess);
    };

    for (const auto& [tau, nt] : feasible) {
      const auto family = detail::make_family(cfg, nt);
      const SplitPlan plan =
          make_split_plan(cfg.n, nt, v_max, hash64({cfg.seed, r, fnv1a64("splits"), detail::double_bits(tau)}));
      const auto evals = evaluate_plan(*family, train, plan);
      std::map<std::size_t, double> refit_excess;  // CV final fits, keyed by rule
      for (std::size_t v : cfg.vs) {
        const std::span<const SplitEvaluation> head(evals.data(), v);
        const AggregateModel agg = cfg.task == StudyTask::eps_svr ? agghoo_from_evaluations(*family, head)
                                                                  : majhoo_from_evaluations(*family, head);
        out.push_back(excess(agg.predict_rows(test.x())));
        std::vector<double> mean(family->size(), 0.0);
        for (const auto& e : head)
          for (std::size_t m = 0; m < mean.size(); ++m) mean[m] += e.risks[m];
        for (double& x : mean) x /= static_cast<double>(v);
        const std::size_t chosen = argmin_lowest(mean);
        auto it = refit_excess.find(chosen);
        if (it == refit_excess.end()) {
          it = refit_excess.emplace(chosen, excess(family->fit(chosen, train).predict_rows(test.x()))).first;
        }
        out.push_back(it->second);
      }
    }
    if (cfg.include_oracle) {
      const auto family = detail::make_family(cfg, cfg.n);
      const FamilyFit all = family->fit_all(train, test.x());
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index m = 0; m < all.predictions.cols(); ++m) best = std::min(best, excess(all.predictions.col(m)));
      out.push_back(best);
    }
    return out;
  };

  std::vector<std::vector<double>> results(cfg.replicates);
  const std::size_t workers = std::min(resolve_threads(cfg.threads), cfg.replicates);
  if (workers <= 1) {
    for (std::size_t r = 0; r < cfg.replicates; ++r) results[r] = run_replicate(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < cfg.replicates; r = next++) {
          try {
            results[r] = run_replicate(r);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<double> column(cfg.replicates);
    for (std::size_t r = 0; r < cfg.replicates; ++r) column[r] = results[r][c];
    const auto [mean, se] = mean_and_se(column);
    report.rows.push_back({cells[c].method, cells[c].tau, cells[c].V, mean, se, cfg.replicates});
  }
  for (std::size_t r = 0; r < cfg.replicates; ++r)
    for (std::size_t c = 0; c < cells.size(); ++c)
      report.per_replicate.push_back({r, cells[c].method, cells[c].tau, cells[c].V, results[r][c]});
  return report;
}

}  // namespace agghoo::sim
