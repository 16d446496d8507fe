#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "histo/features.hpp"

namespace histo {

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

/// Per class: round-half-up(n_c * test_frac) members go to test, chosen by a
/// seeded shuffle within the class. Both index lists come back sorted.
SplitIndices stratified_split(const std::vector<int>& labels, double test_frac, std::uint64_t seed);

/// k disjoint validation folds covering 0..n-1, sizes within one of each
/// other (also per class when labels are given).
std::vector<std::vector<int>> kfold(int n, int k, std::uint64_t seed, const std::vector<int>* stratify_labels = nullptr);

/// Positive class is 1 (tumor).
struct ConfusionMatrix {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred);

// These throw UndefinedMetric when their denominator is zero.
double precision(const ConfusionMatrix& cm);
double recall(const ConfusionMatrix& cm);
double f1(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

/// nullopt instead of UndefinedMetric.
std::optional<double> metric_or_null(double (*metric)(const ConfusionMatrix&), const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // +inf for the (0,0) sentinel
  long tp = 0;
  long fp = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  long positives = 0;
  long negatives = 0;
};

/// One point per distinct score (descending), ties flipped together,
/// starting at (0,0) and ending at (1,1). Throws SingleClassInput.
RocCurve roc_curve(const std::vector<int>& y_true, const Vector& scores);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

struct MetricSet {
  ConfusionMatrix confusion;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> accuracy;
  std::optional<double> auc;  // null when only one class is present
};

MetricSet compute_metrics(const std::vector<int>& y_true, const Vector& scores, double threshold = 0.5);

struct EvalReport {
  MetricSet test;
  RocCurve roc;
  std::vector<MetricSet> per_fold;
  std::string model_id;
  std::uint64_t seed = 0;
  std::string config_hash;
};

nlohmann::json to_json(const MetricSet& m);
MetricSet metric_set_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const EvalReport& report);
void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);

}  // namespace histo
