#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "histo/error.hpp"
#include "histo/eval.hpp"
#include "histo/rng.hpp"
#include "oracles.hpp"

using namespace histo;

namespace {

std::vector<int> labels_with(int tumor, int benign) {
  std::vector<int> y(static_cast<std::size_t>(tumor), 1);
  y.insert(y.end(), static_cast<std::size_t>(benign), 0);
  return y;
}

int count_label(const std::vector<int>& y, const std::vector<int>& idx, int label) {
  return static_cast<int>(std::count_if(idx.begin(), idx.end(), [&](int i) { return y[i] == label; }));
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(StratifiedSplit, ReproducesPublishedTestCounts) {
  const auto y = labels_with(4205, 1459);
  const auto s = stratified_split(y, 0.2, 42);
  EXPECT_EQ(count_label(y, s.test, 1), 841);
  EXPECT_EQ(count_label(y, s.test, 0), 292);
  EXPECT_EQ(s.test.size(), 1133u);
  EXPECT_EQ(count_label(y, s.train, 1), 3364);
  EXPECT_EQ(count_label(y, s.train, 0), 1167);
}

TEST(StratifiedSplit, PartitionsEveryIndexForManySeeds) {
  Rng rng(1);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::vector<int> y(static_cast<std::size_t>(rng.uniform_int(2, 60)));
    for (auto& v : y) v = rng.coin();
    y[0] = 0;
    y[1] = 1;
    const double frac = rng.uniform(0.0, 0.9);
    const auto s = stratified_split(y, frac, seed);
    std::vector<int> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], static_cast<int>(i));
    EXPECT_EQ(all.size(), y.size());
    EXPECT_TRUE(std::is_sorted(s.test.begin(), s.test.end()));
    for (int c : {0, 1}) {
      const int n_c = static_cast<int>(std::count(y.begin(), y.end(), c));
      EXPECT_EQ(count_label(y, s.test, c), static_cast<int>(std::floor(n_c * frac + 0.5)));
    }
  }
}

TEST(StratifiedSplit, EdgeCases) {
  const auto y = labels_with(5, 5);
  const auto none = stratified_split(y, 0.0, 1);
  EXPECT_TRUE(none.test.empty());
  EXPECT_EQ(none.train.size(), 10u);

  const auto single = labels_with(1, 9);
  const auto s = stratified_split(single, 0.2, 1);
  EXPECT_EQ(count_label(single, s.test, 1), 0);
  EXPECT_EQ(count_label(single, s.train, 1), 1);

  EXPECT_EQ(code_of([] { stratified_split(std::vector<int>(6, 1), 0.2, 1); }), ErrorCode::EmptyClass);
  EXPECT_EQ(stratified_split(y, 0.3, 9).test, stratified_split(y, 0.3, 9).test);
}

TEST(Kfold, PartitionsExactlyAcrossSeeds) {
  Rng rng(2);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int n = rng.uniform_int(2, 80);
    const int k = rng.uniform_int(2, n);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = rng.coin();
    const bool stratify = seed % 2 == 1;
    const auto folds = kfold(n, k, seed, stratify ? &y : nullptr);
    ASSERT_EQ(folds.size(), static_cast<std::size_t>(k));
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    std::size_t lo = folds[0].size(), hi = lo;
    for (const auto& f : folds) {
      for (int i : f) ++seen[i];
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    for (int c : seen) ASSERT_EQ(c, 1) << "seed " << seed;
    EXPECT_LE(hi - lo, 1u);
    if (stratify) {
      for (int c : {0, 1}) {
        int clo = n, chi = 0;
        for (const auto& f : folds) {
          clo = std::min(clo, count_label(y, f, c));
          chi = std::max(chi, count_label(y, f, c));
        }
        EXPECT_LE(chi - clo, 1) << "seed " << seed;
      }
    }
  }
}

TEST(Kfold, ExamplesAndErrors) {
  const auto five = kfold(10, 5, 3);
  for (const auto& f : five) EXPECT_EQ(f.size(), 2u);
  const auto loo = kfold(7, 7, 3);
  std::set<int> singles;
  for (const auto& f : loo) {
    ASSERT_EQ(f.size(), 1u);
    singles.insert(f[0]);
  }
  EXPECT_EQ(singles.size(), 7u);
  EXPECT_EQ(code_of([] { kfold(10, 1, 0); }), ErrorCode::KOutOfRange);
  EXPECT_EQ(code_of([] { kfold(3, 4, 0); }), ErrorCode::KOutOfRange);
}

TEST(Confusion, HandCaseAndMetrics) {
  std::vector<int> t, p;
  auto add = [&](int truth, int pred, int times) {
    for (int i = 0; i < times; ++i) t.push_back(truth), p.push_back(pred);
  };
  add(1, 1, 8);
  add(0, 1, 2);
  add(0, 0, 6);
  add(1, 0, 4);
  const ConfusionMatrix cm = confusion(t, p);
  EXPECT_EQ(cm, (ConfusionMatrix{8, 2, 6, 4}));
  EXPECT_DOUBLE_EQ(precision(cm), 0.8);
  EXPECT_NEAR(recall(cm), 0.6667, 5e-5);
  EXPECT_NEAR(f1(cm), 0.7273, 5e-5);
  EXPECT_DOUBLE_EQ(accuracy(cm), 0.7);

  const ConfusionMatrix perfect = confusion(t, t);
  EXPECT_EQ(perfect.fp + perfect.fn, 0);
  for (auto m : {precision, recall, f1, accuracy}) EXPECT_EQ(m(perfect), 1.0);

  const std::vector<int> half = {1, 0, 1, 0, 1, 0};
  const ConfusionMatrix ones = confusion(half, std::vector<int>(6, 1));
  EXPECT_EQ(ones.fp, 3);
  EXPECT_EQ(ones.fn, 0);
  EXPECT_EQ(code_of([] { confusion({1, 0}, {1}); }), ErrorCode::LengthMismatch);
}

TEST(Metrics, UndefinedIsNeverZero) {
  const ConfusionMatrix cm{0, 0, 5, 3};
  EXPECT_EQ(code_of([&] { precision(cm); }), ErrorCode::UndefinedMetric);
  EXPECT_FALSE(metric_or_null(precision, cm).has_value());
  EXPECT_EQ(recall(cm), 0.0);
  const MetricSet set = compute_metrics({0, 0, 1}, Vector::Constant(3, 0.1));
  EXPECT_FALSE(set.precision.has_value());
  EXPECT_TRUE(to_json(set)["precision"].is_null());
}

TEST(Metrics, AccuracyIdentityOverIntegerMatrices) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const ConfusionMatrix cm{rng.uniform_int(0, 50), rng.uniform_int(0, 50), rng.uniform_int(0, 50),
                             rng.uniform_int(0, 50) + 1};
    EXPECT_EQ(accuracy(cm), double(cm.tp + cm.tn) / double(cm.tp + cm.fp + cm.tn + cm.fn));
  }
}

TEST(Roc, MatchesBruteForceThresholdSweep) {
  const std::vector<int> y = {1, 0, 1, 1, 0, 0, 1, 0, 1, 0};
  Vector s(10);
  s << 0.9, 0.8, 0.8, 0.7, 0.5, 0.5, 0.4, 0.3, 0.3, 0.1;
  const RocCurve c = roc_curve(y, s);
  std::vector<double> distinct = to_std(s);
  std::sort(distinct.rbegin(), distinct.rend());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  ASSERT_EQ(c.points.size(), distinct.size() + 1);
  EXPECT_EQ(c.points.front().fpr, 0.0);
  EXPECT_EQ(c.points.front().tpr, 0.0);
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    long tp = 0, fp = 0;
    for (int j = 0; j < 10; ++j)
      if (s(j) >= distinct[i]) (y[j] ? tp : fp)++;
    const RocPoint& pt = c.points[i + 1];
    EXPECT_EQ(pt.threshold, distinct[i]);
    EXPECT_EQ(pt.tp, tp);
    EXPECT_EQ(pt.fp, fp);
    EXPECT_DOUBLE_EQ(pt.tpr, tp / 5.0);
    EXPECT_DOUBLE_EQ(pt.fpr, fp / 5.0);
  }
  EXPECT_EQ(c.points.back().fpr, 1.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
}

TEST(Roc, IdealSeparationAndTies) {
  Vector ideal(4);
  ideal << 0.9, 0.8, 0.2, 0.1;
  const RocCurve c = roc_curve({1, 1, 0, 0}, ideal);
  EXPECT_TRUE(std::any_of(c.points.begin(), c.points.end(), [](const RocPoint& p) { return p.fpr == 0 && p.tpr == 1; }));
  EXPECT_EQ(auc(c), 1.0);

  const RocCurve flat = roc_curve({1, 0, 1, 0}, Vector::Constant(4, 0.3));
  ASSERT_EQ(flat.points.size(), 2u);
  EXPECT_EQ(auc(flat), 0.5);

  EXPECT_EQ(code_of([] { roc_curve({1, 1}, Vector::Constant(2, 0.5)); }), ErrorCode::SingleClassInput);
}

TEST(Auc, MatchesAllPairsOracleWithTies) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<int> y(200);
    Vector s(200);
    for (int i = 0; i < 200; ++i) {
      y[i] = rng.coin();
      // Coarse grid on half the seeds so ties are common.
      s(i) = seed % 2 ? double(rng.uniform_int(0, 9)) / 10.0 : rng.uniform();
    }
    y[0] = 0;
    y[1] = 1;
    const RocCurve c = roc_curve(y, s);
    EXPECT_NEAR(auc(c), oracle::all_pairs_auc(y, to_std(s)), 1e-12);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
      EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
    }
    const Vector flipped = (1.0 - s.array()).matrix();
    EXPECT_EQ(auc(roc_curve(y, flipped)), 1.0 - auc(c));
  }
}

TEST(Auc, InvariantUnderStrictlyIncreasingTransform) {
  Rng rng(9);
  std::vector<int> y(100);
  Vector s(100);
  for (int i = 0; i < 100; ++i) {
    y[i] = i % 3 == 0;
    s(i) = double(rng.uniform_int(0, 30)) / 30.0;
  }
  const RocCurve base = roc_curve(y, s);
  const RocCurve cubed = roc_curve(y, (s.array().cube() * 5.0 + 2.0).matrix());
  ASSERT_EQ(base.points.size(), cubed.points.size());
  for (std::size_t i = 0; i < base.points.size(); ++i) {
    EXPECT_EQ(base.points[i].fpr, cubed.points[i].fpr);
    EXPECT_EQ(base.points[i].tpr, cubed.points[i].tpr);
  }
  EXPECT_EQ(auc(base), auc(cubed));
}

TEST(Metrics, ReportValuesInUnitInterval) {
  Rng rng(10);
  std::vector<int> y(50);
  Vector s(50);
  for (int i = 0; i < 50; ++i) y[i] = i % 2, s(i) = rng.uniform();
  const MetricSet m = compute_metrics(y, s);
  EXPECT_EQ(m.confusion.total(), 50);
  for (const auto& v : {m.precision, m.recall, m.f1, m.accuracy, m.auc}) {
    ASSERT_TRUE(v.has_value());
    EXPECT_GE(*v, 0.0);
    EXPECT_LE(*v, 1.0);
  }
}
