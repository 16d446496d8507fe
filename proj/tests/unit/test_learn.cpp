#include <gtest/gtest.h>

#include <cmath>

#include "histo/error.hpp"
#include "histo/eval.hpp"
#include "histo/model.hpp"
#include "histo/rng.hpp"
#include "oracles.hpp"

using namespace histo;

namespace {

struct Data {
  Matrix X;
  std::vector<int> y;
};

Data xor_data() {
  Data d{Matrix(4, 2), {0, 1, 1, 0}};
  d.X << 0, 0, 0, 1, 1, 0, 1, 1;
  return d;
}

// Two Gaussian blobs centered at -1.5 and +1.5 on every axis.
Data blobs(int n, int dims, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Matrix(n, dims), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    d.y[i] = i % 2;
    for (int j = 0; j < dims; ++j) d.X(i, j) = (d.y[i] ? 1.5 : -1.5) + rng.normal();
  }
  return d;
}

double accuracy_of(const std::vector<int>& pred, const std::vector<int>& y) {
  int ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += pred[i] == y[i];
  return double(ok) / double(y.size());
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST(Mlp, GradientMatchesCentralDifferences) {
  Rng rng(1);
  Matrix X(6, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  const std::vector<int> y = {0, 1, 1, 0, 1, 0};
  MlpModel m = init_mlp({3, 4, 1}, 7);
  for (auto& b : m.biases) b.setConstant(0.05);
  const MlpGradients g = mlp_gradients(m, X, y);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (Eigen::Index k = 0; k < m.weights[l].size(); ++k) {
      MlpModel plus = m, minus = m;
      plus.weights[l].data()[k] += h;
      minus.weights[l].data()[k] -= h;
      const double numeric = (mlp_loss(plus, X, y) - mlp_loss(minus, X, y)) / (2 * h);
      worst = std::max(worst, relative_error(g.weights[l].data()[k], numeric));
    }
    for (Eigen::Index k = 0; k < m.biases[l].size(); ++k) {
      MlpModel plus = m, minus = m;
      plus.biases[l](k) += h;
      minus.biases[l](k) -= h;
      const double numeric = (mlp_loss(plus, X, y) - mlp_loss(minus, X, y)) / (2 * h);
      worst = std::max(worst, relative_error(g.biases[l](k), numeric));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Mlp, LearnsXorForSomeSeed) {
  const Data d = xor_data();
  bool solved = false;
  for (std::uint64_t seed = 0; seed < 5 && !solved; ++seed) {
    const MlpModel m = train_mlp(d.X, d.y, {{8}, 5000, 0.5, 4, seed});
    const Vector p = mlp_predict_proba(m, d.X);
    std::vector<int> pred;
    for (Eigen::Index i = 0; i < p.size(); ++i) pred.push_back(p(i) >= 0.5);
    solved = accuracy_of(pred, d.y) == 1.0;
  }
  EXPECT_TRUE(solved);
}

TEST(Mlp, ConstantLabelsCollapse) {
  const Data d = blobs(20, 3, 2);
  const MlpModel m = train_mlp(d.X, std::vector<int>(20, 1), {{8}, 300, 0.1, 8, 3});
  EXPECT_GT(mlp_predict_proba(m, d.X).minCoeff(), 0.99);
  for (double loss : m.loss_history) EXPECT_TRUE(std::isfinite(loss));
  EXPECT_EQ(m.loss_history.size(), 300u);
}

TEST(Mlp, NonFiniteLossRaised) {
  Data d = blobs(10, 2, 4);
  d.X *= 1e200;
  try {
    train_mlp(d.X, d.y, {{4}, 5, 1e10, 5, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
  }
}

TEST(Forest, GiniSplitMatchesExhaustiveSearch) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix X(4, 1);
    std::vector<int> y(4);
    for (int i = 0; i < 4; ++i) {
      X(i, 0) = double(rng.uniform_int(0, 5));
      y[i] = rng.coin();
    }
    const std::vector<int> rows = {0, 1, 2, 3};
    const std::vector<int> features = {0};
    const SplitChoice got = best_gini_split(X, y, rows, features);
    const auto want = oracle::exhaustive_gini({X(0, 0), X(1, 0), X(2, 0), X(3, 0)}, y);
    if (want.gain <= 1e-12) {
      EXPECT_FALSE(got.valid() && got.gain > 1e-12) << "trial " << trial;
      continue;
    }
    ASSERT_TRUE(got.valid());
    EXPECT_NEAR(got.gain, want.gain, 1e-12) << "trial " << trial;
    std::vector<double> shifted;
    for (int i = 0; i < 4; ++i) shifted.push_back(X(i, 0) <= got.threshold ? 0.0 : 1.0);
    EXPECT_NEAR(oracle::exhaustive_gini(shifted, y).gain, want.gain, 1e-12) << "trial " << trial;
  }
}

TEST(Forest, SingleTreeFitsDistinctSamples) {
  const Data d = blobs(60, 4, 6);
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.seed = 1;
  const ForestModel m = train_forest(d.X, d.y, p);
  EXPECT_EQ(accuracy_of(predict(Classifier(m), d.X), d.y), 1.0);
  for (const auto& node : m.trees[0].nodes) {
    if (node.is_leaf()) {
      EXPECT_GE(node.class_counts[0] + node.class_counts[1], 1);
    } else {
      EXPECT_GE(node.left, 0);
      EXPECT_GE(node.right, 0);
    }
  }
}

TEST(Forest, RootSplitOfOneFeatureTreeIsExhaustiveOptimum) {
  Matrix X(4, 1);
  X << 1.0, 2.0, 4.0, 8.0;
  const std::vector<int> y = {0, 0, 1, 1};
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  const ForestModel m = train_forest(X, y, p);
  const auto want = oracle::exhaustive_gini({1, 2, 4, 8}, y);
  EXPECT_EQ(m.trees[0].nodes[0].feature, 0);
  EXPECT_EQ(m.trees[0].nodes[0].threshold, want.threshold);
}

TEST(Forest, SeparatedBlobsHeldOut) {
  const Data train = blobs(400, 4, 7);
  const Data test = blobs(400, 4, 8);
  ForestParams p;
  p.seed = 3;
  const ForestModel m = train_forest(train.X, train.y, p);
  EXPECT_GE(accuracy_of(predict(Classifier(m), test.X), test.y), 0.95);
}

TEST(Forest, VoteFractionAndMajority) {
  const Data d = blobs(80, 3, 9);
  ForestParams p;
  p.n_trees = 15;
  p.max_depth = 3;
  p.seed = 4;
  const ForestModel m = train_forest(d.X, d.y, p);
  const Vector score = forest_predict_proba(m, d.X);
  const auto pred = predict(Classifier(m), d.X);
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    int votes = 0;
    for (const auto& t : m.trees) votes += t.vote(d.X.row(i).data());
    EXPECT_DOUBLE_EQ(score(i), double(votes) / 15.0);
    EXPECT_EQ(pred[i], 2 * votes >= 15 ? 1 : 0);
    EXPECT_LE(m.trees[0].nodes.size(), 15u);
  }
}

TEST(Forest, UnanimousTrees) {
  Matrix X(4, 1);
  X << 0.0, 0.1, 5.0, 5.1;
  ForestParams p;
  p.bootstrap = false;
  const ForestModel m = train_forest(X, {0, 0, 1, 1}, p);
  const Vector s = forest_predict_proba(m, X);
  EXPECT_EQ(s(0), 0.0);
  EXPECT_EQ(s(3), 1.0);
}

TEST(Gbdt, ZeroRoundsGivesPrior) {
  const Data d = blobs(30, 2, 10);
  std::vector<int> y(30, 0);
  for (int i = 0; i < 9; ++i) y[i] = 1;
  GbdtParams p;
  p.n_rounds = 0;
  const GbdtModel m = train_gbdt(d.X, y, p);
  for (double v : gbdt_predict_proba(m, d.X)) EXPECT_NEAR(v, 0.3, 1e-12);
}

TEST(Gbdt, SingleLeafHandComputedWeight) {
  Matrix X(4, 1);
  X << 1, 2, 3, 4;
  const std::vector<int> y = {1, 1, 1, 0};
  GbdtParams p;
  p.n_rounds = 1;
  p.max_depth = 0;
  p.lr = 1.0;
  p.reg_lambda = 0.0;
  p.base_probability = 0.5;
  const GbdtModel m = train_gbdt(X, y, p);
  // G = sum(p - y) = 4 * 0.5 - 3 = -1, H = sum p(1 - p) = 4 * 0.25 = 1.
  const double G = -1.0, H = 1.0, lambda = 0.0;
  ASSERT_EQ(m.trees.size(), 1u);
  ASSERT_EQ(m.trees[0].nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(m.trees[0].nodes[0].weight, -G / (H + lambda));
  EXPECT_DOUBLE_EQ(gbdt_predict_proba(m, X)(0), 1.0 / (1.0 + std::exp(-1.0)));
}

TEST(Gbdt, TrainingLossNonIncreasingAndDepthBounded) {
  const Data d = blobs(120, 3, 11);
  GbdtParams p;
  p.n_rounds = 30;
  p.max_depth = 3;
  const GbdtModel m = train_gbdt(d.X, d.y, p);
  ASSERT_EQ(m.loss_history.size(), 31u);
  for (std::size_t i = 1; i < m.loss_history.size(); ++i) EXPECT_LE(m.loss_history[i], m.loss_history[i - 1] + 1e-12);
  for (const auto& t : m.trees) EXPECT_LE(t.depth(), 3);
}

TEST(Gbdt, ZeroLearningRatePredictsBaseRate) {
  const Data d = blobs(40, 2, 12);
  GbdtParams p;
  p.n_rounds = 5;
  p.lr = 0.0;
  const GbdtModel m = train_gbdt(d.X, d.y, p);
  for (double v : gbdt_predict_proba(m, d.X)) EXPECT_NEAR(v, 0.5, 1e-12);
}

TEST(Gbdt, SingleClassInput) {
  const Data d = blobs(10, 2, 13);
  try {
    train_gbdt(d.X, std::vector<int>(10, 1), GbdtParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassInput);
  }
}

TEST(Svm, SeparablePairBoundaryBetweenPoints) {
  Matrix X(2, 1);
  X << -1.0, 1.0;
  const SvmModel m = train_svm(X, {0, 1}, {Kernel::Linear, 1000.0, 0.0, 200, 1});
  const Vector f = svm_decision_function(m, X);
  EXPECT_LT(f(0), 0.0);
  EXPECT_GT(f(1), 0.0);
  const double boundary = -m.bias / m.w(0);
  EXPECT_GT(boundary, -1.0);
  EXPECT_LT(boundary, 1.0);
}

TEST(Svm, RbfSolvesXor) {
  const Data d = xor_data();
  const SvmModel m = train_svm(d.X, d.y, {Kernel::Rbf, 100.0, 1.0, 200, 2});
  EXPECT_EQ(accuracy_of(predict(Classifier(m), d.X), d.y), 1.0);
}

TEST(Svm, KernelProperties) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    double a[5], b[5];
    for (int k = 0; k < 5; ++k) a[k] = rng.normal(), b[k] = rng.normal();
    EXPECT_EQ(rbf_kernel(a, a, 5, 0.7), 1.0);
    EXPECT_EQ(rbf_kernel(a, b, 5, 0.7), rbf_kernel(b, a, 5, 0.7));
  }
}

TEST(Svm, SingleClassInput) {
  const Data d = blobs(10, 2, 15);
  EXPECT_THROW(train_svm(d.X, std::vector<int>(10, 0), SvmParams{}), Error);
}

TEST(Svm, AucSameForDecisionValuesAndScores) {
  const Data train = blobs(100, 3, 16);
  const Data test = blobs(60, 3, 17);
  const SvmModel m = train_svm(train.X, train.y, SvmParams{});
  const double raw = auc(roc_curve(test.y, svm_decision_function(m, test.X)));
  const double sig = auc(roc_curve(test.y, svm_predict_proba(m, test.X)));
  EXPECT_EQ(raw, sig);
}

TEST(PredictScore, RangeThresholdsAndDims) {
  const Data d = blobs(50, 3, 18);
  const std::vector<Classifier> models = {train_mlp(d.X, d.y, {{8}, 20, 0.05, 10, 1}),
                                          train_forest(d.X, d.y, ForestParams{10, std::nullopt, 2, true, 1}),
                                          train_gbdt(d.X, d.y, GbdtParams{}), train_svm(d.X, d.y, SvmParams{})};
  for (const auto& m : models) {
    const Vector s = predict_score(m, d.X);
    EXPECT_GE(s.minCoeff(), 0.0);
    EXPECT_LE(s.maxCoeff(), 1.0);
    const auto all = predict(m, d.X, 0.0);
    EXPECT_EQ(std::count(all.begin(), all.end(), 1), 50);
    const auto none = predict(m, d.X, 1.01);
    EXPECT_EQ(std::count(none.begin(), none.end(), 1), 0);
    try {
      predict_score(m, Matrix::Zero(2, 4));
      FAIL() << classifier_kind(m);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
    }
    const Classifier back = classifier_from_json(to_json(m));
    EXPECT_EQ(predict_score(back, d.X), s) << classifier_kind(m);
  }
  Vector half(1);
  half << 0.5;
  EXPECT_EQ(threshold_scores(half, 0.5), std::vector<int>{1});
}

TEST(Training, DeterministicGivenSeed) {
  const Data d = blobs(60, 3, 19);
  for (ClassifierKind kind : {ClassifierKind::Mlp, ClassifierKind::Forest, ClassifierKind::Gbdt, ClassifierKind::Svm}) {
    ClassifierSpec spec;
    spec.kind = kind;
    spec.mlp.epochs = 10;
    spec.forest.n_trees = 10;
    spec.gbdt.n_rounds = 10;
    EXPECT_EQ(to_json(train_classifier(spec, d.X, d.y)).dump(), to_json(train_classifier(spec, d.X, d.y)).dump());
  }
}

TEST(Pipeline, RequiresSingleTerminalClassifier) {
  for (const auto& stages : {std::vector<StageSpec>{ScalerStage{}}, std::vector<StageSpec>{},
                             std::vector<StageSpec>{ClassifierSpec{}, ScalerStage{}},
                             std::vector<StageSpec>{ClassifierSpec{}, ClassifierSpec{}}}) {
    try {
      Pipeline::make(stages);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::StageDimMismatch);
    }
  }
}

TEST(Pipeline, FullRankPcaMatchesPlainSvm) {
  const Data d = blobs(120, 5, 20);
  ClassifierSpec svm;
  const FittedPipeline plain = Pipeline::make({svm}).fit(d.X, d.y);
  const FittedPipeline rotated = Pipeline::make({PcaStage{5}, svm}).fit(d.X, d.y);
  EXPECT_NEAR(accuracy_of(plain.predict(d.X), d.y), accuracy_of(rotated.predict(d.X), d.y), 0.05);
}

TEST(Pipeline, ImmutableAndSerializable) {
  const Data d = blobs(80, 6, 21);
  ClassifierSpec spec;
  spec.kind = ClassifierKind::Gbdt;
  spec.gbdt.n_rounds = 10;
  const FittedPipeline fitted = Pipeline::make({ScalerStage{}, PcaStage{300}, spec}).fit(d.X, d.y);
  EXPECT_EQ(std::get<PcaModel>(fitted.transforms()[1]).k(), 6);  // clamped to min(n - 1, d)
  const Vector first = fitted.predict_score(d.X);
  EXPECT_EQ(fitted.predict_score(d.X), first);
  EXPECT_EQ(FittedPipeline::from_json(fitted.to_json()).predict_score(d.X), first);
}
