// Datasets, losses, index splits, predictors and empirical risks.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "agghoo/rng.hpp"

namespace agghoo {

/// A caller broke a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite or otherwise out-of-domain numeric input.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<std::size_t>;

inline std::span<const double> row_span(const RowMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

enum class Task { regression, classification };

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Immutable sample: n feature rows of dimension d and n targets.
/// Classification labels are stored as exact small non-negative integers.
class Dataset {
 public:
  Dataset(RowMatrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
    require(x_.rows() == y_.size(), "Dataset: row count of x must equal length of y");
    require(x_.rows() >= 1, "Dataset: need at least one row");
    require(x_.cols() >= 1, "Dataset: need at least one feature");
    if (!x_.allFinite() || !y_.allFinite()) throw DomainError("Dataset: non-finite entry");
  }

  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(x_.cols()); }
  const RowMatrix& x() const { return x_; }
  const Vector& y() const { return y_; }
  std::span<const double> row(std::size_t i) const { return row_span(x_, static_cast<Eigen::Index>(i)); }

  /// Indices of these rows in the dataset this one was cut from (identity for
  /// an original sample). Lets audits check which data a rule was shown.
  IndexSet origin() const {
    if (origin_) return *origin_;
    IndexSet id(size());
    std::iota(id.begin(), id.end(), std::size_t{0});
    return id;
  }

  Dataset subset(std::span<const std::size_t> idx) const {
    require(!idx.empty(), "Dataset::subset: empty index set");
    RowMatrix xs(static_cast<Eigen::Index>(idx.size()), x_.cols());
    Vector ys(static_cast<Eigen::Index>(idx.size()));
    IndexSet org(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      require(idx[k] < size(), "Dataset::subset: index out of range");
      const auto i = static_cast<Eigen::Index>(idx[k]);
      xs.row(static_cast<Eigen::Index>(k)) = x_.row(i);
      ys(static_cast<Eigen::Index>(k)) = y_(i);
      org[k] = origin_ ? (*origin_)[idx[k]] : idx[k];
    }
    Dataset out(std::move(xs), std::move(ys));
    out.origin_ = std::make_shared<const IndexSet>(std::move(org));
    return out;
  }

 private:
  RowMatrix x_;
  Vector y_;
  std::shared_ptr<const IndexSet> origin_;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class LossKind { squared, absolute, eps_insensitive, hinge, zero_one };

struct LossSpec {
  LossKind kind = LossKind::absolute;
  double epsilon = 0.0;             // eps_insensitive only
  std::optional<double> lipschitz;  // none for squared and zero_one
  bool convex = true;
  Task task = Task::regression;

  static LossSpec squared() { return {LossKind::squared, 0.0, std::nullopt, true, Task::regression}; }
  static LossSpec absolute() { return {LossKind::absolute, 0.0, 1.0, true, Task::regression}; }
  static LossSpec eps_insensitive(double eps) {
    require(eps >= 0.0 && std::isfinite(eps), "eps_insensitive: epsilon must be finite and >= 0");
    return {LossKind::eps_insensitive, eps, 1.0, true, Task::regression};
  }
  /// Margin loss on real scores; targets > 0 count as +1, the rest as -1.
  static LossSpec hinge() { return {LossKind::hinge, 0.0, 1.0, true, Task::classification}; }
  static LossSpec zero_one() { return {LossKind::zero_one, 0.0, std::nullopt, false, Task::classification}; }
};

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::squared: return "squared";
    case LossKind::absolute: return "absolute";
    case LossKind::eps_insensitive: return "eps_insensitive";
    case LossKind::hinge: return "hinge";
    case LossKind::zero_one: return "zero_one";
  }
  return "?";
}

inline double hinge_sign(double target) { return target > 0.0 ? 1.0 : -1.0; }

inline long label_of(double v) { return std::lround(v); }

inline double point_loss(const LossSpec& loss, double prediction, double target) {
  if (!std::isfinite(prediction) || !std::isfinite(target)) throw DomainError("point_loss: non-finite input");
  switch (loss.kind) {
    case LossKind::squared: {
      const double r = prediction - target;
      return r * r;
    }
    case LossKind::absolute: return std::abs(prediction - target);
    case LossKind::eps_insensitive: return std::max(std::abs(prediction - target) - loss.epsilon, 0.0);
    case LossKind::hinge: return std::max(1.0 - hinge_sign(target) * prediction, 0.0);
    case LossKind::zero_one: return label_of(prediction) != label_of(target) ? 1.0 : 0.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Split plans
// ---------------------------------------------------------------------------

/// V training subsets of {0..n-1}, each of cardinality n_train.
struct SplitPlan {
  std::size_t n = 0;
  std::size_t n_train = 0;
  std::vector<IndexSet> subsets;  // each sorted ascending
  std::uint64_t seed = 0;

  std::size_t n_validation() const { return n - n_train; }
  std::size_t size() const { return subsets.size(); }

  /// Complement of subsets[v], ascending.
  IndexSet validation(std::size_t v) const {
    std::vector<char> in(n, 0);
    for (std::size_t i : subsets.at(v)) in[i] = 1;
    IndexSet out;
    out.reserve(n - n_train);
    for (std::size_t i = 0; i < n; ++i)
      if (!in[i]) out.push_back(i);
    return out;
  }

  /// The first v subsets, as drawn.
  SplitPlan prefix(std::size_t v) const {
    require(v >= 1 && v <= subsets.size(), "SplitPlan::prefix: bad count");
    SplitPlan p = *this;
    p.subsets.resize(v);
    return p;
  }
};

/// Draws V subsets independently and uniformly among the n_train-subsets of
/// {0..n-1}; partial Fisher-Yates on a fresh identity array per subset, all
/// subsets from one SplitMix64 stream. A plan with V subsets is therefore a
/// prefix of any plan with more subsets and the same seed.
inline SplitPlan make_split_plan(std::size_t n, std::size_t n_train, std::size_t V, std::uint64_t seed) {
  require(n >= 2 && n_train >= 1 && n_train <= n - 1, "make_split_plan: need 1 <= n_t <= n-1");
  require(V >= 1, "make_split_plan: need V >= 1");
  SplitPlan plan{n, n_train, {}, seed};
  plan.subsets.reserve(V);
  SplitMix64 rng(seed);
  IndexSet perm(n);
  for (std::size_t v = 0; v < V; ++v) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t j = 0; j < n_train; ++j) {
      const std::size_t k = j + static_cast<std::size_t>(rng.below(n - j));
      std::swap(perm[j], perm[k]);
    }
    IndexSet t(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(t.begin(), t.end());
    plan.subsets.push_back(std::move(t));
  }
  return plan;
}

/// n_t = floor(tau * n). The 1e-9 guard absorbs binary rounding of decimal
/// fractions (0.7 * 200 must give 140, not 139).
inline std::size_t train_size(double tau, std::size_t n) {
  require(std::isfinite(tau) && tau > 0.0 && tau < 1.0, "train_size: tau must lie in (0,1)");
  const auto nt = static_cast<std::size_t>(std::floor(tau * static_cast<double>(n) + 1e-9));
  require(nt >= 1 && nt <= n - 1, "train_size: floor(tau*n) must lie in [1, n-1]");
  return nt;
}

// ---------------------------------------------------------------------------
// Predictors
// ---------------------------------------------------------------------------

namespace detail {

struct PredictorConcept {
  virtual ~PredictorConcept() = default;
  virtual double predict(std::span<const double> x) const = 0;
  virtual Vector predict_rows(const RowMatrix& xs) const {
    Vector out(xs.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) out(i) = predict(row_span(xs, i));
    return out;
  }
};

template <class Model>
concept HasBatchPredict = requires(const Model& m, const RowMatrix& xs) {
  { m.predict_rows(xs) } -> std::convertible_to<Vector>;
};

template <class Model>
struct PredictorHolder final : PredictorConcept {
  explicit PredictorHolder(Model m) : model(std::move(m)) {}
  double predict(std::span<const double> x) const override { return model.predict(x); }
  Vector predict_rows(const RowMatrix& xs) const override {
    if constexpr (HasBatchPredict<Model>) {
      return model.predict_rows(xs);
    } else {
      return PredictorConcept::predict_rows(xs);
    }
  }
  Model model;
};

struct FunctionModel {
  std::function<double(std::span<const double>)> fn;
  double predict(std::span<const double> x) const { return fn(x); }
};

}  // namespace detail

/// Type-erased, immutable, shareable fitted predictor. Regression predictors
/// return real scores; classification predictors return integer labels.
class Predictor {
 public:
  template <class Model>
  static Predictor wrap(Model model, Task task) {
    Predictor p;
    p.impl_ = std::make_shared<const detail::PredictorHolder<Model>>(std::move(model));
    p.task_ = task;
    return p;
  }

  static Predictor from_function(std::function<double(std::span<const double>)> fn, Task task) {
    return wrap(detail::FunctionModel{std::move(fn)}, task);
  }

  static Predictor constant(double value, Task task) {
    return from_function([value](std::span<const double>) { return value; }, task);
  }

  double operator()(std::span<const double> x) const { return impl_->predict(x); }
  Vector predict_rows(const RowMatrix& xs) const { return impl_->predict_rows(xs); }
  Task task() const { return task_; }
  bool valid() const { return static_cast<bool>(impl_); }

  /// The wrapped model if it has type Model, else nullptr.
  template <class Model>
  const Model* target() const {
    const auto* h = dynamic_cast<const detail::PredictorHolder<Model>*>(impl_.get());
    return h ? &h->model : nullptr;
  }

 private:
  std::shared_ptr<const detail::PredictorConcept> impl_;
  Task task_ = Task::regression;
};

// ---------------------------------------------------------------------------
// Empirical risk
// ---------------------------------------------------------------------------

/// Mean loss of precomputed predictions against targets.
inline double mean_loss(const LossSpec& loss, const Vector& predictions, const Vector& targets) {
  require(predictions.size() == targets.size() && predictions.size() > 0, "mean_loss: size mismatch or empty");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < predictions.size(); ++i) acc += point_loss(loss, predictions(i), targets(i));
  return acc / static_cast<double>(predictions.size());
}

/// (1/|subset|) * sum over the subset of loss(pred(x_i), y_i).
inline double empirical_risk(const Predictor& pred, const Dataset& data, std::span<const std::size_t> subset,
                             const LossSpec& loss) {
  require(!subset.empty(), "empirical_risk: empty subset");
  double acc = 0.0;
  for (std::size_t i : subset) {
    require(i < data.size(), "empirical_risk: index out of range");
    acc += point_loss(loss, pred(data.row(i)), data.y()(static_cast<Eigen::Index>(i)));
  }
  return acc / static_cast<double>(subset.size());
}

inline double empirical_risk(const Predictor& pred, const Dataset& data, const LossSpec& loss) {
  return mean_loss(loss, pred.predict_rows(data.x()), data.y());
}

}  // namespace agghoo
