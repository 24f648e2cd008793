// CSV and JSON plumbing: datasets, kernel models, selection traces,
// experiment configs and reports.
//
// CSV: header row, RFC-4180 quoting, shortest round-trip floats, LF line endings.
#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agghoo/core.hpp"
#include "agghoo/kernel.hpp"
#include "agghoo/select.hpp"
#include "agghoo/simlab.hpp"

namespace agghoo::io {

using nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Quotes a field when it holds a comma, quote, CR or LF; inner quotes doubled.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

/// Splits one record; quoted fields may not span lines.
inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw IoError("csv: unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

inline void write_dataset_csv(std::ostream& os, const Dataset& d) {
  for (std::size_t k = 0; k < d.dim(); ++k) os << 'x' << k << ',';
  os << "y\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.row(i)) os << format_double(v) << ',';
    os << format_double(d.y()(static_cast<Eigen::Index>(i))) << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("dataset csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = csv_split(line);
  if (header.size() < 2 || header.back() != "y") throw IoError("dataset csv: header must be x0..x{d-1},y");
  for (std::size_t k = 0; k + 1 < header.size(); ++k)
    if (header[k] != "x" + std::to_string(k)) throw IoError("dataset csv: header must be x0..x{d-1},y");
  const std::size_t d = header.size() - 1;
  std::vector<double> xs, ys;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != d + 1) throw IoError("dataset csv: wrong field count");
    for (std::size_t k = 0; k <= d; ++k) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f[k], &used);
      } catch (const std::exception&) {
        throw IoError("dataset csv: bad number '" + f[k] + "'");
      }
      if (used != f[k].size()) throw IoError("dataset csv: bad number '" + f[k] + "'");
      (k < d ? xs : ys).push_back(v);
    }
  }
  if (ys.empty()) throw IoError("dataset csv: no rows");
  RowMatrix x(static_cast<Eigen::Index>(ys.size()), static_cast<Eigen::Index>(d));
  std::copy(xs.begin(), xs.end(), x.data());
  Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return Dataset(std::move(x), std::move(y));
}

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_dataset_csv(in);
}

// ---------------------------------------------------------------------------
// Kernel models
// ---------------------------------------------------------------------------

inline json to_json(const KernelModel& m) {
  json support = json::array();
  for (Eigen::Index i = 0; i < m.support.rows(); ++i)
    for (Eigen::Index k = 0; k < m.support.cols(); ++k) support.push_back(m.support(i, k));
  json theta = json::array();
  for (Eigen::Index i = 0; i < m.theta.size(); ++i) theta.push_back(m.theta(i));
  return {{"kind", "gaussian"}, {"h", m.spec.bandwidth}, {"lambda", m.lambda},
          {"d", m.support.cols()}, {"support", support}, {"theta", theta}};
}

inline KernelModel kernel_model_from_json(const json& j) {
  try {
    require(j.at("kind").get<std::string>() == "gaussian", "kernel model: only gaussian kernels are supported");
    KernelModel m;
    m.spec = KernelSpec::gaussian(j.at("h").get<double>());
    m.lambda = j.at("lambda").get<double>();
    const auto d = j.at("d").get<std::size_t>();
    const auto support = j.at("support").get<std::vector<double>>();
    const auto theta = j.at("theta").get<std::vector<double>>();
    require(d >= 1 && support.size() == theta.size() * d, "kernel model: support/theta size mismatch");
    m.support.resize(static_cast<Eigen::Index>(theta.size()), static_cast<Eigen::Index>(d));
    std::copy(support.begin(), support.end(), m.support.data());
    m.theta = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("kernel model json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Selection traces
// ---------------------------------------------------------------------------

inline json to_json(const SelectionTrace& t) {
  json splits = json::array();
  for (const auto& s : t.splits)
    splits.push_back({{"train", s.train}, {"risks", s.risks}, {"chosen", s.chosen}});
  json j = {{"procedure", t.procedure}, {"labels", t.labels}, {"splits", splits}};
  if (t.cv_chosen) {
    j["cv_risks"] = t.cv_risks;
    j["cv_chosen"] = *t.cv_chosen;
  }
  return j;
}

inline SelectionTrace trace_from_json(const json& j) {
  try {
    SelectionTrace t;
    t.procedure = j.at("procedure").get<std::string>();
    t.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& s : j.at("splits"))
      t.splits.push_back({s.at("train").get<IndexSet>(), s.at("risks").get<std::vector<double>>(),
                          s.at("chosen").get<std::size_t>()});
    if (j.contains("cv_chosen")) {
      t.cv_risks = j.at("cv_risks").get<std::vector<double>>();
      t.cv_chosen = j.at("cv_chosen").get<std::size_t>();
    }
    return t;
  } catch (const json::exception& e) {
    throw IoError(std::string("trace json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Experiment config
// ---------------------------------------------------------------------------
//
// {
//   "task": "eps_svr" | "knn",
//   "n": 500, "n_test": 1000, "replicates": 1000,
//   "taus": [0.1, ...], "vs": [1, 2, 5, 10],
//   "costs": [500, 250, ...],          eps_svr: lambda = 1 / (2 C n_fit)
//   "epsilon": 0.25, "bandwidth": 0.5,
//   "solver": {"method": "dual_coordinate" | "smoothing_gradient",
//              "tolerance", "step_tolerance", "max_sweeps", "polish_every",
//              "kink_tolerance", "smoothing_schedule",
//              "max_stage_iterations", "stage_relative_decrease"},
//   "ks": [], "k_cap": 99,             knn
//   "classif_excess": "paired_zero_one" | "eta_weighted",
//   "include_oracle": true, "seed": 20190101, "threads": 0,
//   "output": "", "replicate_output": ""
// }
// Every field is optional; unknown fields are rejected.

inline json to_json(const SolverConfig& s) {
  return {{"method", s.method == SolverMethod::dual_coordinate ? "dual_coordinate" : "smoothing_gradient"},
          {"tolerance", s.tolerance},
          {"step_tolerance", s.step_tolerance},
          {"max_sweeps", s.max_sweeps},
          {"polish_every", s.polish_every},
          {"kink_tolerance", s.kink_tolerance},
          {"smoothing_schedule", s.smoothing_schedule},
          {"max_stage_iterations", s.max_stage_iterations},
          {"stage_relative_decrease", s.stage_relative_decrease}};
}

inline json to_json(const sim::ExperimentConfig& c) {
  return {{"task", c.task == sim::StudyTask::eps_svr ? "eps_svr" : "knn"},
          {"n", c.n},
          {"n_test", c.n_test},
          {"replicates", c.replicates},
          {"taus", c.taus},
          {"vs", c.vs},
          {"costs", c.costs},
          {"epsilon", c.epsilon},
          {"bandwidth", c.bandwidth},
          {"solver", to_json(c.solver)},
          {"ks", c.ks},
          {"k_cap", c.k_cap},
          {"classif_excess", c.classif_excess == sim::ClassifExcess::eta_weighted ? "eta_weighted" : "paired_zero_one"},
          {"include_oracle", c.include_oracle},
          {"seed", c.seed},
          {"threads", c.threads},
          {"output", c.output},
          {"replicate_output", c.replicate_output}};
}

namespace detail {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ContractViolation(std::string(what) + ": unknown field '" + key + "'");
  }
}

}  // namespace detail

inline SolverConfig solver_config_from_json(const json& j) {
  require(j.is_object(), "solver config must be a JSON object");
  detail::reject_unknown(j,
                         {"method", "tolerance", "step_tolerance", "max_sweeps", "polish_every", "kink_tolerance",
                          "smoothing_schedule", "max_stage_iterations", "stage_relative_decrease"},
                         "solver config");
  SolverConfig s;
  if (j.contains("method")) {
    const auto m = j.at("method").get<std::string>();
    require(m == "dual_coordinate" || m == "smoothing_gradient", "solver config: unknown method");
    s.method = m == "dual_coordinate" ? SolverMethod::dual_coordinate : SolverMethod::smoothing_gradient;
  }
  detail::read_field(j, "tolerance", s.tolerance);
  detail::read_field(j, "step_tolerance", s.step_tolerance);
  detail::read_field(j, "max_sweeps", s.max_sweeps);
  detail::read_field(j, "polish_every", s.polish_every);
  detail::read_field(j, "kink_tolerance", s.kink_tolerance);
  detail::read_field(j, "smoothing_schedule", s.smoothing_schedule);
  detail::read_field(j, "max_stage_iterations", s.max_stage_iterations);
  detail::read_field(j, "stage_relative_decrease", s.stage_relative_decrease);
  require(s.tolerance > 0.0 && s.step_tolerance > 0.0 && s.max_sweeps >= 1, "solver config: tolerances and max_sweeps must be positive");
  return s;
}

/// Type errors and unknown fields raise ContractViolation.
inline sim::ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    require(j.is_object(), "experiment config must be a JSON object");
    detail::reject_unknown(j,
                           {"task", "n", "n_test", "replicates", "taus", "vs", "costs", "epsilon", "bandwidth",
                            "solver", "ks", "k_cap", "classif_excess", "include_oracle", "seed", "threads", "output",
                            "replicate_output"},
                           "experiment config");
    sim::ExperimentConfig c;
    if (j.contains("task")) {
      const auto t = j.at("task").get<std::string>();
      require(t == "eps_svr" || t == "knn", "experiment config: task must be eps_svr or knn");
      c.task = t == "eps_svr" ? sim::StudyTask::eps_svr : sim::StudyTask::knn;
    }
    detail::read_field(j, "n", c.n);
    detail::read_field(j, "n_test", c.n_test);
    detail::read_field(j, "replicates", c.replicates);
    detail::read_field(j, "taus", c.taus);
    detail::read_field(j, "vs", c.vs);
    detail::read_field(j, "costs", c.costs);
    detail::read_field(j, "epsilon", c.epsilon);
    detail::read_field(j, "bandwidth", c.bandwidth);
    if (j.contains("solver")) c.solver = solver_config_from_json(j.at("solver"));
    detail::read_field(j, "ks", c.ks);
    detail::read_field(j, "k_cap", c.k_cap);
    if (j.contains("classif_excess")) {
      const auto e = j.at("classif_excess").get<std::string>();
      require(e == "eta_weighted" || e == "paired_zero_one", "experiment config: unknown classif_excess");
      c.classif_excess = e == "eta_weighted" ? sim::ClassifExcess::eta_weighted : sim::ClassifExcess::paired_zero_one;
    }
    detail::read_field(j, "include_oracle", c.include_oracle);
    detail::read_field(j, "seed", c.seed);
    detail::read_field(j, "threads", c.threads);
    detail::read_field(j, "output", c.output);
    detail::read_field(j, "replicate_output", c.replicate_output);
    require(c.epsilon >= 0.0 && c.bandwidth > 0.0, "experiment config: need epsilon >= 0 and bandwidth > 0");
    for (double cost : c.costs) require(cost > 0.0, "experiment config: costs must be > 0");
    return c;
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("experiment config: ") + e.what());
  }
}

inline sim::ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("cannot parse ") + path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace detail {

inline std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }
inline std::string opt_field(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); }

}  // namespace detail

inline void write_report_csv(std::ostream& os, const sim::RiskReport& r) {
  os << "method,tau,V,mean_excess,se,replicates\n";
  for (const auto& row : r.rows) {
    os << csv_field(row.method) << ',' << detail::opt_field(row.tau) << ',' << detail::opt_field(row.V) << ','
       << format_double(row.mean_excess) << ',' << format_double(row.se) << ',' << row.replicates << '\n';
  }
}

inline void write_replicate_csv(std::ostream& os, const sim::RiskReport& r) {
  os << "replicate,method,tau,V,excess\n";
  for (const auto& row : r.per_replicate) {
    os << row.replicate << ',' << csv_field(row.method) << ',' << detail::opt_field(row.tau) << ','
       << detail::opt_field(row.V) << ',' << format_double(row.excess) << '\n';
  }
}

inline void write_warnings_csv(std::ostream& os, const sim::RiskReport& r) {
  os << "warning\n";
  for (const auto& w : r.warnings) os << csv_field(w) << '\n';
}

inline std::string report_csv(const sim::RiskReport& r) {
  std::ostringstream os;
  write_report_csv(os, r);
  return os.str();
}

inline std::string replicate_csv(const sim::RiskReport& r) {
  std::ostringstream os;
  write_replicate_csv(os, r);
  return os.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << contents;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace agghoo::io
