// Command-line front end: simulate | fit | experiment | bounds.
// Exit codes: 0 ok, 1 contract violation or bad usage, 2 I/O error.
#pragma once

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agghoo/bounds.hpp"
#include "agghoo/io.hpp"
#include "agghoo/select.hpp"
#include "agghoo/simlab.hpp"

namespace agghoo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitContract = 1;
inline constexpr int kExitIo = 2;

namespace detail {

inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    io::write_file(path, text);
  }
}

struct SimulateArgs {
  std::string task = "eps_svr";
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

inline int run_simulate(const SimulateArgs& a, std::ostream& out) {
  require(a.n >= 1, "simulate: --n must be >= 1");
  const Dataset d = a.task == "eps_svr" ? sim::gen_regression({a.n, std::numbers::pi, 0.5, a.seed})
                                        : sim::gen_classification({a.n, 1.18, 0.05, a.seed});
  std::ostringstream os;
  io::write_dataset_csv(os, d);
  emit(a.out, os.str(), out);
  return kExitOk;
}

struct FitArgs {
  std::string data;
  std::string test;
  std::string family = "svr";
  std::string method = "agghoo";
  double tau = 0.8;
  std::size_t V = 10;
  std::uint64_t seed = 0;
  double epsilon = 0.25;
  double bandwidth = 0.5;
  std::vector<double> costs;
  std::vector<std::size_t> ks;
  std::size_t k_cap = 99;
  std::string out;
};

inline int run_fit(const FitArgs& a, std::ostream& out) {
  const Dataset data = io::load_dataset_csv(a.data);
  const std::size_t n_t = train_size(a.tau, data.size());
  const std::size_t v = a.method == "holdout" ? 1 : a.V;
  require(v >= 1, "fit: --V must be >= 1");

  std::unique_ptr<RuleFamily> family;
  if (a.family == "svr") {
    family = std::make_unique<KernelFamily>(a.costs.empty() ? KernelFamily::default_costs() : a.costs,
                                            LossSpec::eps_insensitive(a.epsilon), LossSpec::absolute(),
                                            KernelSpec::gaussian(a.bandwidth));
  } else {
    std::vector<std::size_t> ks = a.ks.empty() ? odd_k_grid(n_t, a.k_cap) : a.ks;
    family = std::make_unique<KnnFamily>(std::move(ks));
  }
  const SplitPlan plan = make_split_plan(data.size(), n_t, v, a.seed);
  const auto evals = evaluate_plan(*family, data, plan);

  io::json result = {{"method", a.method}, {"family", a.family}, {"n", data.size()}, {"n_train", n_t}, {"V", v}};
  Predictor pred;
  SelectionTrace trace;
  const KernelModel* kernel = nullptr;
  std::optional<AggregateModel> agg;
  if (a.method == "agghoo" || a.method == "majhoo") {
    agg = a.method == "agghoo" ? agghoo_from_evaluations(*family, evals) : majhoo_from_evaluations(*family, evals);
    pred = agg->as_predictor();
    trace = agg->trace();
    if (agg->merged_kernel()) kernel = &*agg->merged_kernel();
  } else if (a.method == "cv" || a.method == "holdout") {
    if (a.method == "cv") {
      std::tie(trace, pred) = cv_from_evaluations(*family, data, evals);
    } else {
      trace = trace_of(*family, evals, "holdout");
      pred = evals.front().models.at(evals.front().chosen);
    }
    kernel = pred.target<KernelModel>();
  } else {
    throw ContractViolation("fit: --method must be holdout, cv, agghoo or majhoo");
  }
  if (kernel) result["model"] = io::to_json(*kernel);
  result["trace"] = io::to_json(trace);
  result["loss"] = to_string(family->eval_loss().kind);
  result["train_risk"] = empirical_risk(pred, data, family->eval_loss());
  if (!a.test.empty()) {
    const Dataset test = io::load_dataset_csv(a.test);
    result["test_risk"] = empirical_risk(pred, test, family->eval_loss());
  }
  emit(a.out, result.dump(2) + "\n", out);
  return kExitOk;
}

struct ExperimentArgs {
  std::string config;
  std::size_t threads = 0;
  std::string output;
  std::string replicate_output;
};

inline int run_experiment_cmd(const ExperimentArgs& a, std::ostream& out, std::ostream& err) {
  sim::ExperimentConfig cfg = io::load_experiment_config(a.config);
  if (a.threads > 0) cfg.threads = a.threads;
  if (!a.output.empty()) cfg.output = a.output;
  if (!a.replicate_output.empty()) cfg.replicate_output = a.replicate_output;
  const sim::RiskReport report = sim::run_experiment(cfg);
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  emit(cfg.output, io::report_csv(report), out);
  if (!cfg.replicate_output.empty()) io::write_file(cfg.replicate_output, io::replicate_csv(report));
  return kExitOk;
}

struct BoundsArgs {
  std::string theorem;
  std::vector<double> nv{100.0};
  // classif
  double beta = 0.0, r = 1.0, m = 1.0;
  // rkhs / eps
  double rho = 0.0, nu = 0.0, L = 1.0, kappa = 1.0, C = 1.0;
  double sigma = -1.0, noise_variance = 0.5;
  double lambda_min = 1.0, nt = 100.0, grid = 3.0, theta = 0.5;
  double oracle = 0.0;
};

inline int run_bounds(const BoundsArgs& a, std::ostream& out) {
  require(!a.nv.empty(), "bounds: --nv needs at least one value");
  std::ostringstream os;
  auto terms = [&](const bounds::BoundTerms& t) {
    os << io::format_double(t.branch1) << ',' << io::format_double(t.branch2) << ',' << io::format_double(t.branch3)
       << ',' << io::format_double(t.remainder) << ',' << io::format_double(t.rhs) << '\n';
  };
  const auto f = io::format_double;
  if (a.theorem == "classif") {
    os << "beta,r,m,nv,oracle,branch1,branch2,branch3,remainder,rhs\n";
    for (double nv : a.nv) {
      const auto t = bounds::classif_bound_rhs({a.beta, a.r, a.m, nv, a.oracle});
      os << f(a.beta) << ',' << f(a.r) << ',' << f(a.m) << ',' << f(nv) << ',' << f(a.oracle) << ',';
      terms(t);
    }
  } else if (a.theorem == "rkhs") {
    os << "rho,nu,L,kappa,C,lambda_min,nv,nt,grid,theta,oracle,branch1,branch2,branch3,remainder,rhs\n";
    for (double nv : a.nv) {
      const bounds::RkhsBoundParams p{a.rho, a.nu, a.L, a.kappa, a.C, a.lambda_min, nv, a.nt, a.grid, a.theta};
      const auto t = bounds::rkhs_bound_rhs(p, a.oracle);
      os << f(a.rho) << ',' << f(a.nu) << ',' << f(a.L) << ',' << f(a.kappa) << ',' << f(a.C) << ','
         << f(a.lambda_min) << ',' << f(nv) << ',' << f(a.nt) << ',' << f(a.grid) << ',' << f(a.theta) << ','
         << f(a.oracle) << ',';
      terms(t);
    }
  } else if (a.theorem == "eps") {
    const double sigma = a.sigma >= 0.0 ? a.sigma : bounds::gaussian_robust_sigma(a.noise_variance);
    os << "sigma,lambda_min,nv,nt,grid,theta,oracle,branch1,branch2,branch3,remainder,rhs\n";
    for (double nv : a.nv) {
      const auto t = bounds::eps_reg_bound_rhs(sigma, {a.lambda_min, nv, a.nt, a.grid, a.theta}, a.oracle);
      os << f(sigma) << ',' << f(a.lambda_min) << ',' << f(nv) << ',' << f(a.nt) << ',' << f(a.grid) << ','
         << f(a.theta) << ',' << f(a.oracle) << ',';
      terms(t);
    }
  } else {
    throw ContractViolation("bounds: --theorem must be classif, rkhs or eps");
  }
  out << os.str();
  return kExitOk;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Agghoo/Majhoo: averaged and voted hold-out selection", "agghoo"};
  app.require_subcommand(1);

  detail::SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Draw a simulated dataset as CSV");
  simulate->add_option("--task", sa.task, "eps_svr | knn")->check(CLI::IsMember({"eps_svr", "knn"}));
  simulate->add_option("--n", sa.n, "sample size")->required();
  simulate->add_option("--seed", sa.seed, "RNG seed");
  simulate->add_option("--out", sa.out, "output path (default stdout)");

  detail::FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit one procedure on a dataset CSV; prints model JSON and risks");
  fit->add_option("--data", fa.data, "training CSV (x0..x{d-1},y)")->required();
  fit->add_option("--test", fa.test, "optional test CSV");
  fit->add_option("--family", fa.family, "svr | knn")->check(CLI::IsMember({"svr", "knn"}));
  fit->add_option("--method", fa.method, "holdout | cv | agghoo | majhoo")
      ->check(CLI::IsMember({"holdout", "cv", "agghoo", "majhoo"}));
  fit->add_option("--tau", fa.tau, "training fraction");
  fit->add_option("--V", fa.V, "number of splits");
  fit->add_option("--seed", fa.seed, "split seed");
  fit->add_option("--epsilon", fa.epsilon, "eps-insensitive width");
  fit->add_option("--bandwidth", fa.bandwidth, "Gaussian kernel bandwidth h");
  fit->add_option("--costs", fa.costs, "cost grid C (lambda = 1/(2 C n))")->delimiter(',');
  fit->add_option("--ks", fa.ks, "k grid (odd)")->delimiter(',');
  fit->add_option("--k-cap", fa.k_cap, "largest k when --ks is absent");
  fit->add_option("--out", fa.out, "output path (default stdout)");

  detail::ExperimentArgs ea;
  auto* experiment = app.add_subcommand("experiment", "Run a Monte-Carlo study from a JSON config");
  experiment->add_option("--config", ea.config, "JSON config path")->required();
  experiment->add_option("--threads", ea.threads, "worker threads (overrides config and AGGHOO_THREADS)");
  experiment->add_option("--output", ea.output, "report CSV path (default: config output, else stdout)");
  experiment->add_option("--replicate-output", ea.replicate_output, "per-replicate CSV path");

  detail::BoundsArgs ba;
  auto* bnd = app.add_subcommand("bounds", "Tabulate oracle-inequality right-hand sides over n_v");
  bnd->add_option("--theorem", ba.theorem, "classif | rkhs | eps")->required()
      ->check(CLI::IsMember({"classif", "rkhs", "eps"}));
  bnd->add_option("--nv", ba.nv, "validation sizes (comma separated)")->delimiter(',');
  bnd->add_option("--beta", ba.beta, "margin exponent");
  bnd->add_option("--r", ba.r, "margin constant");
  bnd->add_option("--m", ba.m, "family size |M|");
  bnd->add_option("--rho", ba.rho);
  bnd->add_option("--nu", ba.nu);
  bnd->add_option("--L", ba.L);
  bnd->add_option("--kappa", ba.kappa);
  bnd->add_option("--C", ba.C);
  bnd->add_option("--sigma", ba.sigma, "robust noise parameter (eps)");
  bnd->add_option("--noise-variance", ba.noise_variance, "Gaussian noise variance, used when --sigma is absent");
  bnd->add_option("--lambda-min", ba.lambda_min);
  bnd->add_option("--nt", ba.nt, "training size");
  bnd->add_option("--grid", ba.grid, "grid size |Lambda|");
  bnd->add_option("--theta", ba.theta);
  bnd->add_option("--oracle", ba.oracle, "oracle excess risk");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitContract;
  }

  try {
    if (*simulate) return detail::run_simulate(sa, out);
    if (*fit) return detail::run_fit(fa, out);
    if (*experiment) return detail::run_experiment_cmd(ea, out, err);
    return detail::run_bounds(ba, out);
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitContract;
  }
}

}  // namespace agghoo::cli
