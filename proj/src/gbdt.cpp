#include "histo/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "histo/error.hpp"

namespace histo {

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double leaf_score(double G, double H, double lambda) { return H + lambda > 0 ? G * G / (H + lambda) : 0.0; }
double leaf_weight(double G, double H, double lambda) { return H + lambda > 0 ? -G / (H + lambda) : 0.0; }

struct NodeStats {
  double G = 0.0;
  double H = 0.0;
  int depth = 0;
};

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

}  // namespace

double RegressionTree::predict(const double* row) const {
  const RegressionNode* node = &nodes.front();
  while (!node->is_leaf()) node = &nodes[row[node->feature] <= node->threshold ? node->left : node->right];
  return node->weight;
}

int RegressionTree::depth() const {
  std::vector<int> depth(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    depth[nodes[i].left] = depth[nodes[i].right] = depth[i] + 1;
    best = std::max(best, depth[i] + 1);
  }
  return best;
}

namespace {

// Feature-wise sorted row order; independent of the gradients, so computed
// once per boosting run.
std::vector<std::vector<int>> sort_columns(const Matrix& X) {
  std::vector<std::vector<int>> sorted(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& order = sorted[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
  }
  return sorted;
}

RegressionTree fit_sorted(const Matrix& X, const std::vector<std::vector<int>>& sorted, const std::vector<double>& g,
                          const std::vector<double>& h, int max_depth, double reg_lambda, double min_child_weight) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());

  RegressionTree tree;
  std::vector<NodeStats> stats(1);
  for (int i = 0; i < n; ++i) {
    stats[0].G += g[i];
    stats[0].H += h[i];
  }
  tree.nodes.emplace_back();
  std::vector<int> node_of(static_cast<std::size_t>(n), 0);
  std::vector<int> frontier{0};

  for (int depth = 0; depth < max_depth && !frontier.empty(); ++depth) {
    const std::size_t total = tree.nodes.size();
    std::vector<int> slot(total, -1);
    for (std::size_t k = 0; k < frontier.size(); ++k) slot[frontier[k]] = static_cast<int>(k);
    std::vector<Candidate> best(frontier.size());

    std::vector<double> GL(frontier.size());
    std::vector<double> HL(frontier.size());
    std::vector<double> last(frontier.size());
    std::vector<char> seen(frontier.size());
    for (int f = 0; f < d; ++f) {
      std::fill(GL.begin(), GL.end(), 0.0);
      std::fill(HL.begin(), HL.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      for (int r : sorted[f]) {
        const int node = node_of[r];
        const int k = node >= 0 ? slot[node] : -1;
        if (k < 0) continue;
        const double v = X(r, f);
        if (seen[k] && v > last[k]) {
          const NodeStats& s = stats[node];
          const double GR = s.G - GL[k];
          const double HR = s.H - HL[k];
          if (HL[k] >= min_child_weight && HR >= min_child_weight) {
            const double gain =
                0.5 * (leaf_score(GL[k], HL[k], reg_lambda) + leaf_score(GR, HR, reg_lambda) -
                       leaf_score(s.G, s.H, reg_lambda));
            if (gain > best[k].gain) {
              double threshold = 0.5 * (last[k] + v);
              if (threshold >= v) threshold = last[k];
              best[k] = {gain, f, threshold};
            }
          }
        }
        GL[k] += g[r];
        HL[k] += h[r];
        last[k] = v;
        seen[k] = 1;
      }
    }

    std::vector<int> next;
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      const int node = frontier[k];
      if (best[k].feature < 0) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stats.resize(tree.nodes.size());
      stats[left].depth = stats[left + 1].depth = depth + 1;
      tree.nodes[node].feature = best[k].feature;
      tree.nodes[node].threshold = best[k].threshold;
      tree.nodes[node].left = left;
      tree.nodes[node].right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    for (int r = 0; r < n; ++r) {
      const int node = node_of[r];
      if (node < 0 || tree.nodes[node].is_leaf()) {
        node_of[r] = -1;
        continue;
      }
      const RegressionNode& split = tree.nodes[node];
      const int child = X(r, split.feature) <= split.threshold ? split.left : split.right;
      node_of[r] = child;
      stats[child].G += g[r];
      stats[child].H += h[r];
    }
    frontier = std::move(next);
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (tree.nodes[i].is_leaf()) tree.nodes[i].weight = leaf_weight(stats[i].G, stats[i].H, reg_lambda);
  }
  return tree;
}

}  // namespace

RegressionTree fit_newton_tree(const Matrix& X, const std::vector<double>& g, const std::vector<double>& h,
                               int max_depth, double reg_lambda, double min_child_weight) {
  return fit_sorted(X, sort_columns(X), g, h, max_depth, reg_lambda, min_child_weight);
}

double log_loss(const Vector& probabilities, const std::vector<int>& y) {
  constexpr double kClip = 1e-15;
  double total = 0.0;
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities(i), kClip, 1.0 - kClip);
    total -= y[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(probabilities.size());
}

GbdtModel train_gbdt(const Matrix& X, const std::vector<int>& y, const GbdtParams& params) {
  if (static_cast<Eigen::Index>(y.size()) != X.rows()) throw Error(ErrorCode::LengthMismatch, "labels/rows differ");
  if (params.n_rounds < 0 || params.max_depth < 0 || params.reg_lambda < 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid boosting parameters");
  }
  GbdtModel model;
  model.learning_rate = params.lr;
  model.max_depth = params.max_depth;
  model.n_features = static_cast<int>(X.cols());
  double prior;
  if (params.base_probability) {
    prior = *params.base_probability;
  } else {
    const double positives = std::accumulate(y.begin(), y.end(), 0.0);
    prior = y.empty() ? 0.0 : positives / static_cast<double>(y.size());
  }
  if (!(prior > 0.0 && prior < 1.0)) {
    throw Error(ErrorCode::SingleClassInput, "base score needs both classes present");
  }
  model.base_score = std::log(prior / (1.0 - prior));

  const std::size_t n = y.size();
  std::vector<double> logits(n, model.base_score);
  std::vector<double> g(n);
  std::vector<double> h(n);
  auto current_loss = [&] {
    Vector p(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) p(static_cast<Eigen::Index>(i)) = sigmoid(logits[i]);
    return log_loss(p, y);
  };
  model.loss_history.push_back(current_loss());
  const auto sorted = sort_columns(X);
  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(logits[i]);
      g[i] = p - y[i];
      h[i] = p * (1.0 - p);
    }
    RegressionTree tree = fit_sorted(X, sorted, g, h, params.max_depth, params.reg_lambda, params.min_child_weight);
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] += params.lr * tree.predict(X.row(static_cast<Eigen::Index>(i)).data());
    }
    model.trees.push_back(std::move(tree));
    model.loss_history.push_back(current_loss());
  }
  return model;
}

Vector gbdt_logits(const GbdtModel& model, const Matrix& X) {
  if (X.cols() != model.n_features) throw Error(ErrorCode::DimMismatch, "GBDT input dimension mismatch");
  Vector z = Vector::Constant(X.rows(), model.base_score);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.predict(X.row(i).data());
    z(i) += model.learning_rate * sum;
  }
  return z;
}

Vector gbdt_predict_proba(const GbdtModel& model, const Matrix& X) {
  return gbdt_logits(model, X).unaryExpr([](double z) { return sigmoid(z); });
}

nlohmann::json to_json(const GbdtModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) {
        nodes.push_back({{"leaf", true}, {"weight", node.weight}});
      } else {
        nodes.push_back(
            {{"feature", node.feature}, {"threshold", node.threshold}, {"left", node.left}, {"right", node.right}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  return {{"base_score", m.base_score}, {"learning_rate", m.learning_rate}, {"max_depth", m.max_depth},
          {"n_features", m.n_features}, {"trees", trees}, {"loss_history", m.loss_history}};
}

GbdtModel gbdt_from_json(const nlohmann::json& doc) {
  GbdtModel m;
  m.base_score = doc.at("base_score").get<double>();
  m.learning_rate = doc.at("learning_rate").get<double>();
  m.max_depth = doc.at("max_depth").get<int>();
  m.n_features = doc.at("n_features").get<int>();
  for (const auto& nodes : doc.at("trees")) {
    RegressionTree tree;
    for (const auto& j : nodes) {
      RegressionNode node;
      if (j.value("leaf", false)) {
        node.weight = j.at("weight").get<double>();
      } else {
        node.feature = j.at("feature").get<int>();
        node.threshold = j.at("threshold").get<double>();
        node.left = j.at("left").get<int>();
        node.right = j.at("right").get<int>();
      }
      tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) throw Error(ErrorCode::ParseError, "empty tree in boosting model");
    m.trees.push_back(std::move(tree));
  }
  m.loss_history = doc.value("loss_history", std::vector<double>{});
  return m;
}

}  // namespace histo
