// Hold-out, Monte-Carlo cross-validation, averaged hold-out picks (Agghoo) and
// their majority vote (Majhoo) over a finite family of learning rules.
//
// Every argmin over rules resolves ties to the lowest rule index, and every
// vote resolves ties to the smallest label.
#pragma once

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "agghoo/core.hpp"
#include "agghoo/kernel.hpp"
#include "agghoo/knn.hpp"

namespace agghoo {

/// Rules fitted on one training sample plus their predictions at a set of
/// query rows (queries x rules).
struct FamilyFit {
  std::vector<Predictor> models;
  Eigen::MatrixXd predictions;
};

/// A finite family (A_m) of learning rules with the loss used to score them
/// on held-out data. fit must be deterministic in (m, train).
class RuleFamily {
 public:
  virtual ~RuleFamily() = default;

  virtual std::size_t size() const = 0;
  virtual std::string label(std::size_t m) const = 0;
  virtual Predictor fit(std::size_t m, const Dataset& train) const = 0;
  virtual const LossSpec& eval_loss() const = 0;
  /// regression: predictors return real scores; classification: labels.
  virtual Task output_task() const = 0;

  /// Fits every rule on `train` and predicts at `queries`. Families override
  /// this to share work across rules.
  virtual FamilyFit fit_all(const Dataset& train, const RowMatrix& queries) const {
    FamilyFit out;
    out.predictions.resize(queries.rows(), static_cast<Eigen::Index>(size()));
    for (std::size_t m = 0; m < size(); ++m) {
      out.models.push_back(fit(m, train));
      out.predictions.col(static_cast<Eigen::Index>(m)) = out.models.back().predict_rows(queries);
    }
    return out;
  }
};

/// Family given by plain callables; handy for ad-hoc rules and tests.
class FunctionFamily final : public RuleFamily {
 public:
  using FitFn = std::function<Predictor(std::size_t, const Dataset&)>;

  FunctionFamily(std::vector<std::string> labels, FitFn fit, LossSpec eval_loss, Task output_task)
      : labels_(std::move(labels)), fit_(std::move(fit)), loss_(eval_loss), task_(output_task) {
    require(!labels_.empty(), "FunctionFamily: empty family");
  }

  std::size_t size() const override { return labels_.size(); }
  std::string label(std::size_t m) const override { return labels_.at(m); }
  Predictor fit(std::size_t m, const Dataset& train) const override { return fit_(m, train); }
  const LossSpec& eval_loss() const override { return loss_; }
  Task output_task() const override { return task_; }

 private:
  std::vector<std::string> labels_;
  FitFn fit_;
  LossSpec loss_;
  Task task_;
};

/// Regularized kernel estimators indexed by a cost grid C_m; a rule fitted on
/// n points uses lambda = 1 / (2 C_m n). With costs 500 / 2^j this is the grid
/// lambda = 2^(j-1) / (500 n_t) on training sets of size n_t.
class KernelFamily final : public RuleFamily {
 public:
  KernelFamily(std::vector<double> costs, LossSpec train_loss, LossSpec eval_loss, KernelSpec spec,
               SolverConfig solver = {})
      : costs_(std::move(costs)), train_loss_(train_loss), eval_loss_(eval_loss), spec_(spec),
        solver_(std::move(solver)) {
    require(!costs_.empty(), "KernelFamily: empty cost grid");
    for (double c : costs_) require(std::isfinite(c) && c > 0.0, "KernelFamily: costs must be > 0");
    require(train_loss_.convex, "KernelFamily: training loss must be convex");
  }

  /// Costs 500 / 2^j for j = 0..17.
  static std::vector<double> default_costs() {
    std::vector<double> c;
    for (int j = 0; j <= 17; ++j) c.push_back(std::ldexp(500.0, -j));
    return c;
  }

  double lambda_for(std::size_t m, std::size_t n_fit) const {
    return 1.0 / (2.0 * costs_.at(m) * static_cast<double>(n_fit));
  }
  const std::vector<double>& costs() const { return costs_; }

  std::size_t size() const override { return costs_.size(); }
  std::string label(std::size_t m) const override { return "C=" + format_double(costs_.at(m)); }
  Predictor fit(std::size_t m, const Dataset& train) const override {
    return Predictor::wrap(fit_kernel(lambda_for(m, train.size()), train, train_loss_, spec_, solver_).first,
                           Task::regression);
  }
  const LossSpec& eval_loss() const override { return eval_loss_; }
  Task output_task() const override { return Task::regression; }

  FamilyFit fit_all(const Dataset& train, const RowMatrix& queries) const override {
    std::vector<double> lambdas(costs_.size());
    for (std::size_t m = 0; m < costs_.size(); ++m) lambdas[m] = lambda_for(m, train.size());
    auto path = fit_kernel_path(lambdas, train, train_loss_, spec_, solver_);
    const Eigen::MatrixXd cross = gram(spec_, queries, train.x());
    FamilyFit out;
    out.predictions.resize(queries.rows(), static_cast<Eigen::Index>(size()));
    for (std::size_t m = 0; m < path.size(); ++m) {
      out.predictions.col(static_cast<Eigen::Index>(m)) = cross * path[m].first.theta;
      out.models.push_back(Predictor::wrap(std::move(path[m].first), Task::regression));
    }
    return out;
  }

 private:
  static std::string format_double(double v) {
    char buf[64];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  }

  std::vector<double> costs_;
  LossSpec train_loss_;
  LossSpec eval_loss_;
  KernelSpec spec_;
  SolverConfig solver_;
};

/// k-NN classifiers for a grid of odd k, scored with the 0-1 loss.
class KnnFamily final : public RuleFamily {
 public:
  explicit KnnFamily(std::vector<std::size_t> ks) : ks_(std::move(ks)) {
    require(!ks_.empty(), "KnnFamily: empty k grid");
    for (std::size_t k : ks_) require(k >= 1 && k % 2 == 1, "KnnFamily: k must be odd and >= 1");
  }

  const std::vector<std::size_t>& ks() const { return ks_; }

  std::size_t size() const override { return ks_.size(); }
  std::string label(std::size_t m) const override { return "k=" + std::to_string(ks_.at(m)); }
  Predictor fit(std::size_t m, const Dataset& train) const override {
    return Predictor::wrap(KnnModel(train, ks_.at(m)), Task::classification);
  }
  const LossSpec& eval_loss() const override { return loss_; }
  Task output_task() const override { return Task::classification; }

  FamilyFit fit_all(const Dataset& train, const RowMatrix& queries) const override {
    auto shared = std::make_shared<const Dataset>(train);
    FamilyFit out;
    out.predictions = knn_predict_many(*shared, ks_, queries);
    for (std::size_t k : ks_) out.models.push_back(Predictor::wrap(KnnModel(shared, k), Task::classification));
    return out;
  }

 private:
  std::vector<std::size_t> ks_;
  LossSpec loss_ = LossSpec::zero_one();
};

// ---------------------------------------------------------------------------
// Traces and aggregates
// ---------------------------------------------------------------------------

struct SplitRecord {
  IndexSet train;
  std::vector<double> risks;  // hold-out risk of every rule
  std::size_t chosen = 0;
};

struct SelectionTrace {
  std::string procedure;  // holdout | cv | agghoo | majhoo
  std::vector<std::string> labels;
  std::vector<SplitRecord> splits;
  std::vector<double> cv_risks;  // cv only: mean of the split rows
  std::optional<std::size_t> cv_chosen;
};

/// One hold-out evaluation: all rules fitted on D^T and scored on T^c.
struct SplitEvaluation {
  IndexSet train;
  std::vector<double> risks;
  std::vector<Predictor> models;
  std::size_t chosen = 0;
};

inline std::size_t argmin_lowest(const std::vector<double>& v) {
  require(!v.empty(), "argmin: empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

/// Smallest label among the most frequent ones.
inline double majority_vote(std::span<const double> labels) {
  require(!labels.empty(), "majority_vote: empty committee");
  std::map<long, std::size_t> counts;
  for (double l : labels) ++counts[label_of(l)];
  return static_cast<double>(detail::majority_label(counts));
}

enum class AggregationMode { mean, majority };

/// Committee of hold-out predictors combined by averaging (regression) or by
/// majority vote (classification).
class AggregateModel {
 public:
  AggregateModel(std::vector<Predictor> components, AggregationMode mode, SelectionTrace trace = {})
      : components_(std::move(components)), mode_(mode), trace_(std::move(trace)) {
    require(!components_.empty(), "AggregateModel: no components");
    if (mode_ == AggregationMode::mean) {
      std::vector<KernelModel> kms;
      for (const auto& c : components_) {
        if (const auto* km = c.target<KernelModel>()) kms.push_back(*km);
      }
      if (kms.size() == components_.size()) merged_ = average_models(kms);
    }
  }

  AggregationMode mode() const { return mode_; }
  const std::vector<Predictor>& components() const { return components_; }
  const SelectionTrace& trace() const { return trace_; }
  /// Single kernel expansion equal to the mean, when every component is one.
  const std::optional<KernelModel>& merged_kernel() const { return merged_; }

  double predict(std::span<const double> x) const {
    if (mode_ == AggregationMode::mean) {
      if (merged_) return merged_->predict(x);
      double acc = 0.0;
      for (const auto& c : components_) acc += c(x);
      return acc / static_cast<double>(components_.size());
    }
    std::vector<double> votes;
    votes.reserve(components_.size());
    for (const auto& c : components_) votes.push_back(c(x));
    return majority_vote(votes);
  }

  Vector predict_rows(const RowMatrix& xs) const {
    if (mode_ == AggregationMode::mean) {
      if (merged_) return merged_->predict_rows(xs);
      Vector acc = Vector::Zero(xs.rows());
      for (const auto& c : components_) acc += c.predict_rows(xs);
      return acc / static_cast<double>(components_.size());
    }
    Eigen::MatrixXd all(xs.rows(), static_cast<Eigen::Index>(components_.size()));
    for (std::size_t v = 0; v < components_.size(); ++v) all.col(static_cast<Eigen::Index>(v)) = components_[v].predict_rows(xs);
    Vector out(xs.rows());
    std::vector<double> row(components_.size());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      for (std::size_t v = 0; v < components_.size(); ++v) row[v] = all(i, static_cast<Eigen::Index>(v));
      out(i) = majority_vote(row);
    }
    return out;
  }

  Predictor as_predictor() const {
    return Predictor::wrap(*this, mode_ == AggregationMode::mean ? Task::regression : Task::classification);
  }

 private:
  std::vector<Predictor> components_;
  AggregationMode mode_;
  SelectionTrace trace_;
  std::optional<KernelModel> merged_;
};

/// Classifier x -> 1{score(x) >= 0}; turns a real-valued surrogate predictor
/// (e.g. an Agghoo average of hinge-loss fits) into a label predictor.
inline Predictor threshold_at_zero(Predictor score) {
  return Predictor::from_function([score](std::span<const double> x) { return score(x) >= 0.0 ? 1.0 : 0.0; },
                                  Task::classification);
}

// ---------------------------------------------------------------------------
// Procedures
// ---------------------------------------------------------------------------

/// Fits every rule on D^T, scores it on T^c, records the argmin.
inline SplitEvaluation evaluate_split(const RuleFamily& family, const Dataset& data, const IndexSet& train) {
  require(family.size() >= 1, "hold-out: empty family");
  require(!train.empty() && train.size() < data.size(), "hold-out: need 1 <= |T| <= n-1");
  std::vector<char> in(data.size(), 0);
  for (std::size_t i : train) {
    require(i < data.size(), "hold-out: training index out of range");
    require(!in[i], "hold-out: duplicate training index");
    in[i] = 1;
  }
  IndexSet valid;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!in[i]) valid.push_back(i);

  const Dataset d_train = data.subset(train);
  const Dataset d_valid = data.subset(valid);
  FamilyFit fit = family.fit_all(d_train, d_valid.x());
  SplitEvaluation ev;
  ev.train = train;
  ev.risks.resize(family.size());
  for (std::size_t m = 0; m < family.size(); ++m)
    ev.risks[m] = mean_loss(family.eval_loss(), fit.predictions.col(static_cast<Eigen::Index>(m)), d_valid.y());
  ev.chosen = argmin_lowest(ev.risks);
  ev.models = std::move(fit.models);
  return ev;
}

inline std::vector<SplitEvaluation> evaluate_plan(const RuleFamily& family, const Dataset& data,
                                                  const SplitPlan& plan) {
  require(plan.n == data.size(), "split plan size does not match the dataset");
  require(plan.size() >= 1, "split plan has no subsets");
  std::vector<SplitEvaluation> out;
  out.reserve(plan.size());
  for (const auto& t : plan.subsets) out.push_back(evaluate_split(family, data, t));
  return out;
}

inline SelectionTrace trace_of(const RuleFamily& family, std::span<const SplitEvaluation> evals,
                               std::string procedure) {
  SelectionTrace tr;
  tr.procedure = std::move(procedure);
  for (std::size_t m = 0; m < family.size(); ++m) tr.labels.push_back(family.label(m));
  for (const auto& e : evals) tr.splits.push_back({e.train, e.risks, e.chosen});
  return tr;
}

inline std::pair<SelectionTrace, Predictor> holdout_select(const RuleFamily& family, const Dataset& data,
                                                           const IndexSet& train) {
  SplitEvaluation ev = evaluate_split(family, data, train);
  Predictor chosen = ev.models.at(ev.chosen);
  std::vector<SplitEvaluation> one;
  one.push_back(std::move(ev));
  return {trace_of(family, one, "holdout"), std::move(chosen)};
}

/// CV from precomputed split evaluations: average the risk rows, take the
/// argmin, refit that rule on all of `data`.
inline std::pair<SelectionTrace, Predictor> cv_from_evaluations(const RuleFamily& family, const Dataset& data,
                                                                std::span<const SplitEvaluation> evals) {
  require(!evals.empty(), "cv: no splits");
  std::vector<double> mean(family.size(), 0.0);
  for (const auto& e : evals)
    for (std::size_t m = 0; m < mean.size(); ++m) mean[m] += e.risks[m];
  for (double& v : mean) v /= static_cast<double>(evals.size());
  SelectionTrace tr = trace_of(family, evals, "cv");
  tr.cv_risks = mean;
  tr.cv_chosen = argmin_lowest(mean);
  Predictor final_rule = family.fit(*tr.cv_chosen, data);
  return {std::move(tr), std::move(final_rule)};
}

inline std::pair<SelectionTrace, Predictor> cv_select(const RuleFamily& family, const Dataset& data,
                                                      const SplitPlan& plan) {
  const auto evals = evaluate_plan(family, data, plan);
  return cv_from_evaluations(family, data, evals);
}

inline AggregateModel agghoo_from_evaluations(const RuleFamily& family, std::span<const SplitEvaluation> evals) {
  require(family.eval_loss().convex && family.output_task() == Task::regression,
          "agghoo: needs real-valued rules and a convex evaluation loss (use majhoo for labels)");
  require(!evals.empty(), "agghoo: no splits");
  std::vector<Predictor> parts;
  for (const auto& e : evals) parts.push_back(e.models.at(e.chosen));
  return AggregateModel(std::move(parts), AggregationMode::mean, trace_of(family, evals, "agghoo"));
}

inline AggregateModel majhoo_from_evaluations(const RuleFamily& family, std::span<const SplitEvaluation> evals) {
  require(family.output_task() == Task::classification, "majhoo: needs label-valued rules (use agghoo)");
  require(!evals.empty(), "majhoo: no splits");
  std::vector<Predictor> parts;
  for (const auto& e : evals) parts.push_back(e.models.at(e.chosen));
  return AggregateModel(std::move(parts), AggregationMode::majority, trace_of(family, evals, "majhoo"));
}

inline AggregateModel agghoo_fit(const RuleFamily& family, const Dataset& data, const SplitPlan& plan) {
  require(family.eval_loss().convex && family.output_task() == Task::regression,
          "agghoo: needs real-valued rules and a convex evaluation loss (use majhoo for labels)");
  const auto evals = evaluate_plan(family, data, plan);
  return agghoo_from_evaluations(family, evals);
}

inline AggregateModel majhoo_fit(const RuleFamily& family, const Dataset& data, const SplitPlan& plan) {
  require(family.output_task() == Task::classification, "majhoo: needs label-valued rules (use agghoo)");
  const auto evals = evaluate_plan(family, data, plan);
  return majhoo_from_evaluations(family, evals);
}

}  // namespace agghoo
