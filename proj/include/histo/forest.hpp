#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "histo/features.hpp"

namespace histo {

/// Internal nodes carry feature/threshold/children (x <= threshold goes left);
/// leaves have feature == -1 and their class counts.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<int, 2> class_counts{0, 0};

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(const double* row) const;
  /// Majority class of the leaf; ties go to the positive class.
  int vote(const double* row) const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_trees = 0;
  int feature_subsample = 0;
  int n_features = 0;
};

struct ForestParams {
  int n_trees = 100;
  std::optional<int> max_depth;
  int min_samples_split = 2;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // parent Gini minus weighted child Gini

  bool valid() const { return feature >= 0; }
};

double gini(int negatives, int positives);

/// Best midpoint split by Gini gain over `features` for the given rows.
/// Ties keep the earliest feature in `features`, then the smallest threshold.
SplitChoice best_gini_split(const Matrix& X, const std::vector<int>& y, std::span<const int> rows,
                            std::span<const int> features);

DecisionTree train_tree(const Matrix& X, const std::vector<int>& y, std::vector<int> rows, int feature_subsample,
                        const ForestParams& params, std::uint64_t tree_seed);

ForestModel train_forest(const Matrix& X, const std::vector<int>& y, const ForestParams& params);

/// Fraction of trees voting for the positive class.
Vector forest_predict_proba(const ForestModel& model, const Matrix& X);

nlohmann::json to_json(const ForestModel& m);
ForestModel forest_from_json(const nlohmann::json& doc);

}  // namespace histo
