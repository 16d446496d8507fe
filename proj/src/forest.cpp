#include "histo/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "histo/error.hpp"
#include "histo/rng.hpp"

namespace histo {

double gini(int negatives, int positives) {
  const double n = negatives + positives;
  if (n == 0) return 0.0;
  const double p0 = negatives / n;
  const double p1 = positives / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

const TreeNode& DecisionTree::leaf_for(const double* row) const {
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf()) node = &nodes[row[node->feature] <= node->threshold ? node->left : node->right];
  return *node;
}

int DecisionTree::vote(const double* row) const {
  const auto& counts = leaf_for(row).class_counts;
  return counts[1] >= counts[0] ? 1 : 0;
}

SplitChoice best_gini_split(const Matrix& X, const std::vector<int>& y, std::span<const int> rows,
                            std::span<const int> features) {
  SplitChoice best;
  const int n = static_cast<int>(rows.size());
  int total_pos = 0;
  for (int r : rows) total_pos += y[r];
  const double parent = gini(n - total_pos, total_pos);

  std::vector<std::pair<double, int>> column(rows.size());
  for (int f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {X(rows[i], f), y[rows[i]]};
    std::sort(column.begin(), column.end());
    int left_pos = 0;
    for (int i = 0; i + 1 < n; ++i) {
      left_pos += column[i].second;
      if (column[i].first == column[i + 1].first) continue;
      const int left_n = i + 1;
      const int right_n = n - left_n;
      const int right_pos = total_pos - left_pos;
      const double child =
          (left_n * gini(left_n - left_pos, left_pos) + right_n * gini(right_n - right_pos, right_pos)) / n;
      const double gain = parent - child;
      if (!best.valid() || gain > best.gain) {
        best.feature = f;
        best.threshold = 0.5 * (column[i].first + column[i + 1].first);
        // Midpoint of adjacent doubles can round up to the right value.
        if (best.threshold >= column[i + 1].first) best.threshold = column[i].first;
        best.gain = gain;
      }
    }
  }
  return best;
}

DecisionTree train_tree(const Matrix& X, const std::vector<int>& y, std::vector<int> rows, int feature_subsample,
                        const ForestParams& params, std::uint64_t tree_seed) {
  Rng rng(tree_seed);
  const int d = static_cast<int>(X.cols());
  std::vector<int> all_features(static_cast<std::size_t>(d));
  std::iota(all_features.begin(), all_features.end(), 0);

  DecisionTree tree;
  struct Work {
    int node;
    std::vector<int> rows;
    int depth;
  };
  tree.nodes.emplace_back();
  std::vector<Work> stack;
  stack.push_back({0, std::move(rows), 0});
  while (!stack.empty()) {
    Work work = std::move(stack.back());
    stack.pop_back();
    std::array<int, 2> counts{0, 0};
    for (int r : work.rows) ++counts[y[r]];
    tree.nodes[work.node].class_counts = counts;

    const bool pure = counts[0] == 0 || counts[1] == 0;
    const bool too_small = static_cast<int>(work.rows.size()) < params.min_samples_split;
    const bool too_deep = params.max_depth && work.depth >= *params.max_depth;
    if (pure || too_small || too_deep) continue;

    // Draw feature_subsample candidates; keep drawing past the budget only
    // while no valid partition exists (all drawn features constant).
    rng.shuffle(all_features.begin(), all_features.end());
    SplitChoice split;
    for (int start = 0; start < d && !split.valid(); start += feature_subsample) {
      const int count = std::min(feature_subsample, d - start);
      split = best_gini_split(X, y, work.rows, std::span<const int>(all_features).subspan(start, count));
    }
    if (!split.valid()) continue;

    std::vector<int> left_rows;
    std::vector<int> right_rows;
    for (int r : work.rows) (X(r, split.feature) <= split.threshold ? left_rows : right_rows).push_back(r);
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[work.node];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, std::move(right_rows), work.depth + 1});
    stack.push_back({left, std::move(left_rows), work.depth + 1});
  }
  return tree;
}

ForestModel train_forest(const Matrix& X, const std::vector<int>& y, const ForestParams& params) {
  if (X.rows() < 1) throw Error(ErrorCode::TooFewSamples, "forest needs at least one sample");
  if (static_cast<Eigen::Index>(y.size()) != X.rows()) throw Error(ErrorCode::LengthMismatch, "labels/rows differ");
  if (params.n_trees < 1 || params.min_samples_split < 2) {
    throw Error(ErrorCode::InvalidArgument, "invalid forest parameters");
  }
  ForestModel model;
  model.n_trees = params.n_trees;
  model.n_features = static_cast<int>(X.cols());
  model.feature_subsample = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(X.cols())))));
  const int n = static_cast<int>(X.rows());
  for (int t = 0; t < params.n_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(params.seed, {static_cast<std::uint64_t>(t)});
    std::vector<int> rows(static_cast<std::size_t>(n));
    if (params.bootstrap) {
      Rng rng(derive_seed(tree_seed, {hash_string("bootstrap")}));
      for (int& r : rows) r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    model.trees.push_back(train_tree(X, y, std::move(rows), model.feature_subsample, params, tree_seed));
  }
  return model;
}

Vector forest_predict_proba(const ForestModel& model, const Matrix& X) {
  if (X.cols() != model.n_features) throw Error(ErrorCode::DimMismatch, "forest input dimension mismatch");
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int votes = 0;
    for (const auto& tree : model.trees) votes += tree.vote(X.row(i).data());
    out(i) = static_cast<double>(votes) / static_cast<double>(model.trees.size());
  }
  return out;
}

nlohmann::json to_json(const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) {
        nodes.push_back({{"leaf", true}, {"class_counts", node.class_counts}});
      } else {
        nodes.push_back({{"feature", node.feature}, {"threshold", node.threshold}, {"left", node.left},
                         {"right", node.right}, {"class_counts", node.class_counts}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  return {{"n_trees", m.n_trees}, {"feature_subsample", m.feature_subsample}, {"n_features", m.n_features},
          {"trees", trees}};
}

ForestModel forest_from_json(const nlohmann::json& doc) {
  ForestModel m;
  m.n_trees = doc.at("n_trees").get<int>();
  m.feature_subsample = doc.at("feature_subsample").get<int>();
  m.n_features = doc.at("n_features").get<int>();
  for (const auto& nodes : doc.at("trees")) {
    DecisionTree tree;
    for (const auto& j : nodes) {
      TreeNode node;
      node.class_counts = j.at("class_counts").get<std::array<int, 2>>();
      if (!j.value("leaf", false)) {
        node.feature = j.at("feature").get<int>();
        node.threshold = j.at("threshold").get<double>();
        node.left = j.at("left").get<int>();
        node.right = j.at("right").get<int>();
      }
      tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) throw Error(ErrorCode::ParseError, "empty tree in forest model");
    m.trees.push_back(std::move(tree));
  }
  return m;
}

}  // namespace histo
