#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "histo/features.hpp"

namespace histo {

/// Fully connected net: ReLU hidden layers, one sigmoid output unit.
struct MlpModel {
  std::vector<int> layer_sizes;          // input, hidden..., 1
  std::vector<Eigen::MatrixXd> weights;  // layer l: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  std::vector<double> loss_history;      // mean training BCE after each epoch
};

struct MlpParams {
  std::vector<int> hidden = {64, 32};
  int epochs = 100;
  double lr = 0.01;
  int batch = 32;
  std::uint64_t seed = 0;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// He-normal weights, zero biases.
MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

/// Output-layer pre-activations (logits), one per row.
Vector mlp_logits(const MlpModel& model, const Matrix& X);
Vector mlp_predict_proba(const MlpModel& model, const Matrix& X);

/// Mean binary cross-entropy.
double mlp_loss(const MlpModel& model, const Matrix& X, const std::vector<int>& y);

/// Backpropagated gradient of mlp_loss.
MlpGradients mlp_gradients(const MlpModel& model, const Matrix& X, const std::vector<int>& y);

/// Mini-batch gradient descent on mean BCE. Throws NonFiniteLoss.
MlpModel train_mlp(const Matrix& X, const std::vector<int>& y, const MlpParams& params);

nlohmann::json to_json(const MlpModel& m);
MlpModel mlp_from_json(const nlohmann::json& doc);

}  // namespace histo
