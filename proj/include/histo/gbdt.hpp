#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "histo/features.hpp"

namespace histo {

struct RegressionNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf output, -G / (H + lambda)

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<RegressionNode> nodes;

  double predict(const double* row) const;
  int depth() const;
};

/// Newton-boosted trees for the logistic loss; logits are
/// base_score + learning_rate * sum of tree outputs.
struct GbdtModel {
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
  double learning_rate = 0.3;
  int max_depth = 6;
  int n_features = 0;
  std::vector<double> loss_history;  // training log-loss, initial value first
};

struct GbdtParams {
  int n_rounds = 100;
  int max_depth = 6;
  double lr = 0.3;
  double reg_lambda = 1.0;
  double min_child_weight = 1.0;
  /// Starting probability; defaults to the training positive rate.
  std::optional<double> base_probability;
  std::uint64_t seed = 0;
};

/// Greedy exact-split tree on gradients g and hessians h.
RegressionTree fit_newton_tree(const Matrix& X, const std::vector<double>& g, const std::vector<double>& h,
                               int max_depth, double reg_lambda, double min_child_weight);

GbdtModel train_gbdt(const Matrix& X, const std::vector<int>& y, const GbdtParams& params);

Vector gbdt_logits(const GbdtModel& model, const Matrix& X);
Vector gbdt_predict_proba(const GbdtModel& model, const Matrix& X);

double log_loss(const Vector& probabilities, const std::vector<int>& y);

nlohmann::json to_json(const GbdtModel& m);
GbdtModel gbdt_from_json(const nlohmann::json& doc);

}  // namespace histo
