#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "agghoo/rng.hpp"
#include "agghoo/select.hpp"

using namespace agghoo;

namespace {

Dataset regression_data(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  RowMatrix x(static_cast<Eigen::Index>(n), 1);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = 2.0 * rng.normal();
    y(i) = std::sin(x(i, 0)) + 0.3 * rng.normal();
  }
  return Dataset(x, y);
}

Dataset class_data(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  RowMatrix x(static_cast<Eigen::Index>(n), 2);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.uniform();
    x(i, 1) = rng.uniform();
    y(i) = rng.uniform() < (x(i, 0) > x(i, 1) ? 0.8 : 0.2) ? 1.0 : 0.0;
  }
  return Dataset(x, y);
}

/// Rule m: the training mean of y shifted by m * step (a family of constants).
FunctionFamily shifted_means(std::size_t count, double step) {
  std::vector<std::string> labels;
  for (std::size_t m = 0; m < count; ++m) labels.push_back("shift" + std::to_string(m));
  return FunctionFamily(
      labels,
      [step](std::size_t m, const Dataset& t) {
        return Predictor::constant(t.y().mean() + static_cast<double>(m) * step - 0.5, Task::regression);
      },
      LossSpec::absolute(), Task::regression);
}

/// Family of fixed constants.
FunctionFamily constants(std::vector<double> values, LossSpec loss = LossSpec::absolute()) {
  std::vector<std::string> labels;
  for (double v : values) labels.push_back(std::to_string(v));
  return FunctionFamily(
      labels, [values](std::size_t m, const Dataset&) { return Predictor::constant(values[m], Task::regression); },
      loss, Task::regression);
}

}  // namespace

TEST(Holdout, SingletonFamily) {
  const Dataset d = regression_data(20, 1);
  const auto fam = constants({3.0});
  const auto [trace, pred] = holdout_select(fam, d, make_split_plan(20, 12, 1, 5).subsets[0]);
  EXPECT_EQ(trace.splits.at(0).chosen, 0u);
  const double x[] = {0.0};
  EXPECT_EQ(pred(x), 3.0);
}

TEST(Holdout, ConstantRulesPickTheRightOne) {
  RowMatrix x(4, 1);
  x << 0, 1, 2, 3;
  const Dataset d(x, Vector::Ones(4));
  const auto [trace, pred] = holdout_select(constants({0.0, 1.0}), d, IndexSet{0, 1});
  EXPECT_EQ(trace.splits[0].risks, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(trace.splits[0].chosen, 1u);
}

TEST(Holdout, MatchesExhaustiveEvaluation) {
  const Dataset d = regression_data(40, 2);
  const auto fam = shifted_means(5, 0.25);
  const IndexSet t = make_split_plan(40, 25, 1, 3).subsets[0];
  const auto [trace, pred] = holdout_select(fam, d, t);
  const Dataset train = d.subset(t);
  IndexSet valid;
  for (std::size_t i = 0; i < 40; ++i)
    if (!std::binary_search(t.begin(), t.end(), i)) valid.push_back(i);
  std::vector<double> risks;
  for (std::size_t m = 0; m < 5; ++m) {
    const double c = train.y().mean() + 0.25 * static_cast<double>(m) - 0.5;
    double acc = 0.0;
    for (std::size_t i : valid) acc += std::fabs(c - d.y()(static_cast<Eigen::Index>(i)));
    risks.push_back(acc / static_cast<double>(valid.size()));
  }
  for (std::size_t m = 0; m < 5; ++m) EXPECT_NEAR(trace.splits[0].risks[m], risks[m], 1e-12);
  const auto best = static_cast<std::size_t>(std::min_element(risks.begin(), risks.end()) - risks.begin());
  EXPECT_EQ(trace.splits[0].chosen, best);
  // trained on D^T, not refit
  const double x[] = {0.0};
  EXPECT_NEAR(pred(x), train.y().mean() + 0.25 * static_cast<double>(best) - 0.5, 1e-15);
}

TEST(Holdout, Contracts) {
  const Dataset d = regression_data(10, 3);
  const auto fam = constants({0.0});
  EXPECT_THROW(holdout_select(fam, d, IndexSet{}), ContractViolation);
  IndexSet all(10);
  std::iota(all.begin(), all.end(), std::size_t{0});
  EXPECT_THROW(holdout_select(fam, d, all), ContractViolation);
  EXPECT_THROW(holdout_select(fam, d, IndexSet{1, 1}), ContractViolation);
  EXPECT_THROW(holdout_select(fam, d, IndexSet{10}), ContractViolation);
  EXPECT_THROW(constants({}), ContractViolation);
}

TEST(Cv, SingleSplitMatchesHoldoutThenRefits) {
  const Dataset d = regression_data(30, 4);
  const auto fam = shifted_means(6, 0.2);
  const auto plan = make_split_plan(30, 20, 1, 9);
  const auto [ho, ho_pred] = holdout_select(fam, d, plan.subsets[0]);
  const auto [cv, cv_pred] = cv_select(fam, d, plan);
  ASSERT_TRUE(cv.cv_chosen.has_value());
  EXPECT_EQ(*cv.cv_chosen, ho.splits[0].chosen);
  const double x[] = {0.0};
  EXPECT_NEAR(cv_pred(x), d.y().mean() + 0.2 * static_cast<double>(*cv.cv_chosen) - 0.5, 1e-15);
}

TEST(Cv, TiesGoToLowestIndex) {
  RowMatrix x(6, 1);
  x << 0, 1, 2, 3, 4, 5;
  const Dataset d(x, Vector::Constant(6, 2.0));
  const auto [cv, pred] = cv_select(constants({2.0, 2.0, 2.0}), d, make_split_plan(6, 3, 4, 1));
  EXPECT_EQ(*cv.cv_chosen, 0u);
  for (double r : cv.cv_risks) EXPECT_EQ(r, 0.0);
}

TEST(Cv, RiskRowIsMeanOfHoldoutRows) {
  const Dataset d = regression_data(35, 5);
  const auto fam = shifted_means(3, 0.4);
  const auto plan = make_split_plan(35, 21, 4, 77);
  const auto [cv, pred] = cv_select(fam, d, plan);
  for (std::size_t m = 0; m < 3; ++m) {
    double acc = 0.0;
    for (const auto& t : plan.subsets) acc += holdout_select(fam, d, t).first.splits[0].risks[m];
    EXPECT_NEAR(cv.cv_risks[m], acc / 4.0, 1e-12);
  }
}

TEST(Agghoo, SingleSplitEqualsHoldoutPredictor) {
  const Dataset d = regression_data(40, 6);
  const KernelFamily fam(KernelFamily::default_costs(), LossSpec::eps_insensitive(0.25), LossSpec::absolute(),
                         KernelSpec::gaussian(0.5));
  const auto plan = make_split_plan(40, 28, 1, 2);
  const auto agg = agghoo_fit(fam, d, plan);
  const auto [ho, ho_pred] = holdout_select(fam, d, plan.subsets[0]);
  ASSERT_TRUE(agg.merged_kernel().has_value());
  const RowMatrix probes = regression_data(10, 60).x();
  EXPECT_EQ(agg.predict_rows(probes), ho_pred.predict_rows(probes));
}

TEST(Agghoo, IdenticalSplitsGiveThatSplitsPredictor) {
  const Dataset d = regression_data(40, 7);
  const KernelFamily fam(KernelFamily::default_costs(), LossSpec::eps_insensitive(0.25), LossSpec::absolute(),
                         KernelSpec::gaussian(0.5));
  SplitPlan plan = make_split_plan(40, 28, 1, 3);
  const auto single = plan.subsets[0];
  plan.subsets.assign(4, single);
  const auto agg = agghoo_fit(fam, d, plan);
  const auto [ho, ho_pred] = holdout_select(fam, d, single);
  const RowMatrix probes = regression_data(10, 61).x();
  EXPECT_LE((agg.predict_rows(probes) - ho_pred.predict_rows(probes)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Agghoo, MeanOfComponents) {
  const Dataset d = regression_data(50, 8);
  const KernelFamily fam(KernelFamily::default_costs(), LossSpec::eps_insensitive(0.25), LossSpec::absolute(),
                         KernelSpec::gaussian(0.5));
  const auto agg = agghoo_fit(fam, d, make_split_plan(50, 35, 3, 4));
  ASSERT_EQ(agg.components().size(), 3u);
  const RowMatrix probes = regression_data(10, 62).x();
  for (Eigen::Index q = 0; q < probes.rows(); ++q) {
    const auto x = row_span(probes, q);
    double mean = 0.0;
    for (const auto& c : agg.components()) mean += c(x) / 3.0;
    EXPECT_NEAR(agg.predict(x), mean, 1e-12);
    EXPECT_NEAR(agg.as_predictor()(x), mean, 1e-12);
  }
  EXPECT_EQ(agg.trace().splits.size(), 3u);
  EXPECT_EQ(agg.trace().procedure, "agghoo");
}

TEST(Agghoo, RejectsLabelFamilies) {
  const Dataset d = class_data(30, 9);
  const KnnFamily fam({1, 3, 5});
  EXPECT_THROW(agghoo_fit(fam, d, make_split_plan(30, 20, 2, 1)), ContractViolation);
}

TEST(Agghoo, HingeScoresThenThreshold) {
  const Dataset d = class_data(60, 10);
  const KernelFamily fam({10.0, 1.0, 0.1}, LossSpec::hinge(), LossSpec::hinge(), KernelSpec::gaussian(0.3));
  const auto agg = agghoo_fit(fam, d, make_split_plan(60, 45, 3, 2));
  const Predictor cls = threshold_at_zero(agg.as_predictor());
  EXPECT_EQ(cls.task(), Task::classification);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double l = cls(d.row(i));
    EXPECT_TRUE(l == 0.0 || l == 1.0);
    EXPECT_EQ(l, agg.predict(d.row(i)) >= 0.0 ? 1.0 : 0.0);
  }
}

TEST(Majhoo, VotesAndTies) {
  const double a[] = {1, 1, 0};
  EXPECT_EQ(majority_vote(a), 1.0);
  const double b[] = {0, 1};
  EXPECT_EQ(majority_vote(b), 0.0);
  const double c[] = {2, 1, 2, 1, 0};
  EXPECT_EQ(majority_vote(c), 1.0);
}

TEST(Majhoo, IdenticalComponentsGiveThatClassifier) {
  const Dataset d = class_data(40, 11);
  const KnnFamily fam({1, 3, 5, 7});
  SplitPlan plan = make_split_plan(40, 30, 1, 4);
  const auto t = plan.subsets[0];
  plan.subsets.assign(3, t);
  const auto vote = majhoo_fit(fam, d, plan);
  const auto [ho, single] = holdout_select(fam, d, t);
  const RowMatrix probes = class_data(50, 12).x();
  EXPECT_EQ(vote.predict_rows(probes), single.predict_rows(probes));
}

TEST(Majhoo, PointwiseVoteOfComponents) {
  const Dataset d = class_data(60, 13);
  const KnnFamily fam({1, 3, 5, 7, 9});
  const auto vote = majhoo_fit(fam, d, make_split_plan(60, 40, 5, 6));
  const RowMatrix probes = class_data(40, 14).x();
  const Vector all = vote.predict_rows(probes);
  for (Eigen::Index q = 0; q < probes.rows(); ++q) {
    std::vector<double> votes;
    for (const auto& c : vote.components()) votes.push_back(c(row_span(probes, q)));
    const long ones = std::count(votes.begin(), votes.end(), 1.0);
    EXPECT_EQ(all(q), ones >= 3 ? 1.0 : 0.0);
    EXPECT_EQ(vote.predict(row_span(probes, q)), all(q));
  }
}

TEST(Majhoo, RejectsRegressionFamilies) {
  const Dataset d = regression_data(20, 15);
  EXPECT_THROW(majhoo_fit(shifted_means(2, 0.1), d, make_split_plan(20, 10, 2, 1)), ContractViolation);
}

TEST(SelectProperties, ConvexityOfAveraging) {
  SplitMix64 rng(100);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t V = 1 + rng.below(8), n = 5 + rng.below(30);
    const LossSpec loss = rep % 2 ? LossSpec::absolute() : LossSpec::eps_insensitive(rng.uniform());
    Eigen::MatrixXd preds(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(V));
    for (Eigen::Index i = 0; i < preds.size(); ++i) preds.data()[i] = 2.0 * rng.normal();
    Vector y(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.normal();
    std::vector<Predictor> comps;
    RowMatrix x(static_cast<Eigen::Index>(n), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = static_cast<double>(i);
    for (std::size_t v = 0; v < V; ++v) {
      const Vector col = preds.col(static_cast<Eigen::Index>(v));
      comps.push_back(Predictor::from_function(
          [col](std::span<const double> r) { return col(static_cast<Eigen::Index>(r[0])); }, Task::regression));
    }
    const AggregateModel agg(comps, AggregationMode::mean);
    const Dataset test(x, y);
    double mean_risk = 0.0;
    for (const auto& c : comps) mean_risk += empirical_risk(c, test, loss) / static_cast<double>(V);
    EXPECT_LE(empirical_risk(agg.as_predictor(), test, loss), mean_risk + 1e-12);
  }
}

TEST(SelectProperties, MajorityVoteZeroOneFactorTwo) {
  SplitMix64 rng(101);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t labels = 2 + rng.below(4), V = 1 + rng.below(9), n = 10 + rng.below(40);
    double vote_risk = 0.0, mean_risk = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = static_cast<double>(rng.below(labels));
      std::vector<double> votes;
      for (std::size_t v = 0; v < V; ++v) votes.push_back(static_cast<double>(rng.below(labels)));
      vote_risk += majority_vote(votes) != y;
      for (double l : votes) mean_risk += (l != y) / static_cast<double>(V);
    }
    EXPECT_LE(vote_risk / n, 2.0 * mean_risk / n + 1e-12);
  }
}

namespace {

/// Excess risk of label j at a point with class probabilities eta.
double point_excess(const std::vector<double>& eta, long j) {
  return *std::max_element(eta.begin(), eta.end()) - eta[static_cast<std::size_t>(j)];
}

}  // namespace

// With M+1 labels the winning label holds at least V/(M+1) votes, so the vote's
// excess risk is at most (M+1) times the committee's mean excess risk.
TEST(SelectProperties, MajorityVoteExcessFactorIsLabelCount) {
  SplitMix64 rng(102);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t labels = 2 + rng.below(4), V = 1 + rng.below(9), n = 10 + rng.below(40);
    double vote_excess = 0.0, mean_excess = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> eta(labels);
      double z = 0.0;
      for (double& e : eta) z += (e = -std::log(rng.uniform_open_zero()));
      for (double& e : eta) e /= z;
      std::vector<double> votes;
      for (std::size_t v = 0; v < V; ++v) votes.push_back(static_cast<double>(rng.below(labels)));
      vote_excess += point_excess(eta, label_of(majority_vote(votes)));
      for (double l : votes) mean_excess += point_excess(eta, label_of(l)) / static_cast<double>(V);
    }
    EXPECT_LE(vote_excess / n, static_cast<double>(labels) * mean_excess / n + 1e-12);
    if (labels == 2) EXPECT_LE(vote_excess / n, 2.0 * mean_excess / n + 1e-12);
  }
}

// Three labels (M = 2), eta = (0.1, 0.45, 0.45), votes {0, 1, 2}: the vote
// picks 0 with excess 0.35 while M times the mean excess is only 0.2333.
TEST(SelectProperties, MajorityVoteExcessFactorMFailsBeyondBinary) {
  const std::vector<double> eta{0.1, 0.45, 0.45};
  const double votes[] = {0, 1, 2};
  const double vote = point_excess(eta, label_of(majority_vote(votes)));
  double mean = 0.0;
  for (double l : votes) mean += point_excess(eta, label_of(l)) / 3.0;
  EXPECT_NEAR(vote, 0.35, 1e-15);
  EXPECT_GT(vote, 2.0 * mean);
  EXPECT_LE(vote, 3.0 * mean + 1e-12);
}

TEST(SelectProperties, NeverShowsValidationDataToTheRules) {
  const Dataset d = regression_data(50, 16);
  std::mutex mu;
  std::vector<IndexSet> seen;
  const FunctionFamily fam(
      {"a", "b", "c"},
      [&](std::size_t m, const Dataset& t) {
        std::lock_guard lock(mu);
        seen.push_back(t.origin());
        return Predictor::constant(t.y().mean() + 0.1 * static_cast<double>(m), Task::regression);
      },
      LossSpec::absolute(), Task::regression);
  const auto plan = make_split_plan(50, 30, 5, 17);
  const auto agg = agghoo_fit(fam, d, plan);
  ASSERT_EQ(seen.size(), 15u);
  for (std::size_t k = 0; k < seen.size(); ++k) EXPECT_EQ(seen[k], plan.subsets[k / 3]);

  seen.clear();
  const Dataset c = class_data(50, 18);
  const FunctionFamily labels(
      {"zero", "one"},
      [&](std::size_t m, const Dataset& t) {
        std::lock_guard lock(mu);
        seen.push_back(t.origin());
        return Predictor::constant(static_cast<double>(m), Task::classification);
      },
      LossSpec::zero_one(), Task::classification);
  const auto vote = majhoo_fit(labels, c, plan);
  ASSERT_EQ(seen.size(), 10u);
  for (std::size_t k = 0; k < seen.size(); ++k) EXPECT_EQ(seen[k], plan.subsets[k / 2]);
}

TEST(SelectProperties, ArgminInvariantUnderAffineLossShift) {
  const Dataset d = class_data(64, 19);
  const KnnFamily fam({1, 3, 5, 7, 9, 11});
  const auto plan = make_split_plan(64, 48, 6, 20);
  for (const auto& ev : evaluate_plan(fam, d, plan)) {
    EXPECT_EQ(ev.chosen, argmin_lowest(ev.risks));
    for (std::size_t m = 0; m < ev.risks.size(); ++m) EXPECT_GE(ev.risks[m], ev.risks[ev.chosen]);
    for (std::size_t m = 0; m < ev.chosen; ++m) EXPECT_GT(ev.risks[m], ev.risks[ev.chosen]);
    for (double shift : {1.0, 7.0, 1024.0}) {
      for (double scale : {0.5, 4.0}) {
        std::vector<double> shifted;
        for (double r : ev.risks) shifted.push_back(scale * r + shift);
        EXPECT_EQ(argmin_lowest(shifted), ev.chosen);
      }
    }
  }
}

TEST(KernelFamilyTest, CostGridMapsToLambdaGrid) {
  const KernelFamily fam(KernelFamily::default_costs(), LossSpec::eps_insensitive(0.25), LossSpec::absolute(),
                         KernelSpec::gaussian(0.5));
  ASSERT_EQ(fam.size(), 18u);
  for (std::size_t j = 0; j < 18; ++j)
    EXPECT_NEAR(fam.lambda_for(j, 140), std::ldexp(1.0, static_cast<int>(j) - 1) / (500.0 * 140.0),
                1e-15 * fam.lambda_for(j, 140));
}

TEST(KernelFamilyTest, FitAllMatchesFit) {
  const Dataset d = regression_data(40, 21);
  const KernelFamily fam({50.0, 5.0, 0.5}, LossSpec::eps_insensitive(0.25), LossSpec::absolute(),
                         KernelSpec::gaussian(0.5));
  const RowMatrix q = regression_data(8, 22).x();
  const auto all = fam.fit_all(d, q);
  for (std::size_t m = 0; m < 3; ++m)
    EXPECT_LE((all.predictions.col(static_cast<Eigen::Index>(m)) - fam.fit(m, d).predict_rows(q)).cwiseAbs().maxCoeff(),
              1e-6);
}
