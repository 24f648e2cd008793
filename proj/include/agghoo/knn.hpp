// Exact k-nearest-neighbors classification.
#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "agghoo/core.hpp"

namespace agghoo {

namespace detail {

/// Training indices ordered by (squared distance to x, index), truncated to
/// the first `count`.
inline std::vector<std::size_t> nearest_indices(const RowMatrix& train, std::span<const double> x,
                                                std::size_t count) {
  const auto n = static_cast<std::size_t>(train.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    const auto r = row_span(train, static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double t = r[k] - x[k];
      d2 += t * t;
    }
    dist[i] = {d2, i};
  }
  count = std::min(count, n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(count), dist.end());
  std::vector<std::size_t> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = dist[k].second;
  return out;
}

/// Most frequent label; smallest label wins ties.
template <class Counts>
long majority_label(const Counts& counts) {
  long best = 0;
  std::size_t best_count = 0;
  bool first = true;
  for (const auto& [label, c] : counts) {  // ascending label order
    if (first || c > best_count) {
      best = label;
      best_count = c;
      first = false;
    }
  }
  return best;
}

}  // namespace detail

/// k-NN classifier over a shared training sample. k must be odd, 1 <= k <= n.
class KnnModel {
 public:
  KnnModel(std::shared_ptr<const Dataset> train, std::size_t k) : train_(std::move(train)), k_(k) {
    require(train_ != nullptr, "KnnModel: null training set");
    require(k_ >= 1 && k_ % 2 == 1, "KnnModel: k must be odd and >= 1");
    require(k_ <= train_->size(), "KnnModel: k exceeds training size");
  }
  KnnModel(const Dataset& train, std::size_t k) : KnnModel(std::make_shared<const Dataset>(train), k) {}

  std::size_t k() const { return k_; }
  const Dataset& train() const { return *train_; }

  double predict(std::span<const double> x) const {
    require(x.size() == train_->dim(), "knn_predict: dimension mismatch");
    std::map<long, std::size_t> votes;
    for (std::size_t i : detail::nearest_indices(train_->x(), x, k_)) ++votes[label_of(train_->y()(static_cast<Eigen::Index>(i)))];
    return static_cast<double>(detail::majority_label(votes));
  }

 private:
  std::shared_ptr<const Dataset> train_;
  std::size_t k_;
};

inline double knn_predict(const KnnModel& model, std::span<const double> x) { return model.predict(x); }

/// Predictions of every k in `ks` at each query, sharing one neighbor
/// ordering per query. Result is queries x ks.size().
inline Eigen::MatrixXd knn_predict_many(const Dataset& train, std::span<const std::size_t> ks,
                                        const RowMatrix& queries) {
  require(!ks.empty(), "knn_predict_many: empty k grid");
  require(static_cast<std::size_t>(queries.cols()) == train.dim(), "knn_predict_many: dimension mismatch");
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  for (std::size_t k : ks) require(k >= 1 && k % 2 == 1 && k <= train.size(), "knn_predict_many: bad k");
  Eigen::MatrixXd out(queries.rows(), static_cast<Eigen::Index>(ks.size()));
  std::vector<std::size_t> order(ks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ks[a] < ks[b]; });
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const auto nn = detail::nearest_indices(train.x(), row_span(queries, q), kmax);
    std::map<long, std::size_t> votes;
    std::size_t used = 0;
    for (std::size_t o : order) {
      for (; used < ks[o]; ++used) ++votes[label_of(train.y()(static_cast<Eigen::Index>(nn[used])))];
      out(q, static_cast<Eigen::Index>(o)) = static_cast<double>(detail::majority_label(votes));
    }
  }
  return out;
}

/// Odd k in [1, min(n_train, cap)].
inline std::vector<std::size_t> odd_k_grid(std::size_t n_train, std::size_t cap = 99) {
  std::vector<std::size_t> ks;
  for (std::size_t k = 1; k <= std::min(n_train, cap); k += 2) ks.push_back(k);
  return ks;
}

}  // namespace agghoo
