#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "histo/features.hpp"
#include "histo/forest.hpp"
#include "histo/gbdt.hpp"
#include "histo/mlp.hpp"
#include "histo/svm.hpp"

namespace histo {

using Classifier = std::variant<MlpModel, ForestModel, GbdtModel, SvmModel>;

/// Scores in [0, 1]: probabilities for MLP/GBDT, vote fraction for the
/// forest, logistic of the decision value for the SVM.
Vector predict_score(const Classifier& model, const Matrix& X);

/// label = score >= threshold.
std::vector<int> predict(const Classifier& model, const Matrix& X, double threshold = 0.5);
std::vector<int> threshold_scores(const Vector& scores, double threshold);

std::string classifier_kind(const Classifier& model);
nlohmann::json to_json(const Classifier& model);
Classifier classifier_from_json(const nlohmann::json& doc);

enum class ClassifierKind { Mlp, Forest, Gbdt, Svm };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::Svm;
  MlpParams mlp;
  ForestParams forest;
  GbdtParams gbdt;
  SvmParams svm;
};

Classifier train_classifier(const ClassifierSpec& spec, const Matrix& X, const std::vector<int>& y);

struct ScalerStage {};
struct PcaStage {
  int k = 300;
};
using StageSpec = std::variant<ScalerStage, PcaStage, ClassifierSpec>;

using FittedTransform = std::variant<Scaler, PcaModel>;

/// Transforms fitted on training data followed by the trained classifier.
/// Immutable once fitted.
class FittedPipeline {
 public:
  FittedPipeline(std::vector<FittedTransform> transforms, Classifier classifier);

  Matrix transform(const Matrix& X) const;
  Vector predict_score(const Matrix& X) const;
  std::vector<int> predict(const Matrix& X, double threshold = 0.5) const;

  const std::vector<FittedTransform>& transforms() const { return transforms_; }
  const Classifier& classifier() const { return classifier_; }

  nlohmann::json to_json() const;
  static FittedPipeline from_json(const nlohmann::json& doc);

 private:
  std::vector<FittedTransform> transforms_;
  Classifier classifier_;
};

/// Ordered stage list with exactly one classifier, placed last.
class Pipeline {
 public:
  /// Throws StageDimMismatch when the classifier is missing, repeated or not last.
  static Pipeline make(std::vector<StageSpec> stages);

  /// Fits every stage in order on the training rows only. PCA k is clamped
  /// to min(n - 1, d) with a warning.
  FittedPipeline fit(const Matrix& X, const std::vector<int>& y) const;

  const std::vector<StageSpec>& stages() const { return stages_; }

 private:
  explicit Pipeline(std::vector<StageSpec> stages) : stages_(std::move(stages)) {}
  std::vector<StageSpec> stages_;
};

}  // namespace histo
