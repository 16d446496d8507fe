#include "histo/mlp.hpp"

#include <cmath>
#include <numeric>

#include "histo/error.hpp"
#include "histo/rng.hpp"

namespace histo {

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// Activations per layer, samples as columns. acts[0] is the input.
std::vector<Eigen::MatrixXd> forward(const MlpModel& m, const Matrix& X) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(m.weights.size() + 1);
  acts.emplace_back(X.transpose());
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    Eigen::MatrixXd z = (m.weights[l] * acts.back()).colwise() + m.biases[l];
    if (l + 1 < m.weights.size()) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  return acts;  // last entry holds logits
}

void check_inputs(const MlpModel& m, const Matrix& X, const std::vector<int>* y) {
  if (m.layer_sizes.empty() || X.cols() != m.layer_sizes.front()) {
    throw Error(ErrorCode::DimMismatch, "MLP input dimension mismatch");
  }
  if (y && static_cast<Eigen::Index>(y->size()) != X.rows()) {
    throw Error(ErrorCode::LengthMismatch, "labels length differs from rows");
  }
}

}  // namespace

MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2 || layer_sizes.back() != 1) {
    throw Error(ErrorCode::InvalidArgument, "MLP needs input and a single output unit");
  }
  Rng rng(derive_seed(seed, {hash_string("mlp-init")}));
  MlpModel m;
  m.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    if (in < 1 || out < 1) throw Error(ErrorCode::InvalidArgument, "layer sizes must be positive");
    const double scale = std::sqrt(2.0 / in);
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.normal();
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return m;
}

Vector mlp_logits(const MlpModel& model, const Matrix& X) {
  check_inputs(model, X, nullptr);
  return forward(model, X).back().row(0).transpose();
}

Vector mlp_predict_proba(const MlpModel& model, const Matrix& X) {
  return mlp_logits(model, X).unaryExpr([](double z) { return sigmoid(z); });
}

double mlp_loss(const MlpModel& model, const Matrix& X, const std::vector<int>& y) {
  check_inputs(model, X, &y);
  const Vector z = mlp_logits(model, X);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z(i)) - y[i] * z(i);
  return total / static_cast<double>(z.size());
}

MlpGradients mlp_gradients(const MlpModel& model, const Matrix& X, const std::vector<int>& y) {
  check_inputs(model, X, &y);
  const auto acts = forward(model, X);
  const std::size_t L = model.weights.size();
  const double inv_n = 1.0 / static_cast<double>(X.rows());

  MlpGradients g;
  g.weights.resize(L);
  g.biases.resize(L);
  // dLoss/dlogit = sigmoid(z) - y, averaged over the batch.
  Eigen::MatrixXd delta(1, X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) delta(0, i) = (sigmoid(acts[L](0, i)) - y[i]) * inv_n;
  for (std::size_t l = L; l-- > 0;) {
    g.weights[l] = delta * acts[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (model.weights[l].transpose() * delta).cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

MlpModel train_mlp(const Matrix& X, const std::vector<int>& y, const MlpParams& params) {
  if (X.rows() < 1) throw Error(ErrorCode::TooFewSamples, "MLP needs at least one sample");
  if (params.batch < 1 || params.epochs < 0) throw Error(ErrorCode::InvalidArgument, "invalid MLP schedule");
  std::vector<int> sizes{static_cast<int>(X.cols())};
  sizes.insert(sizes.end(), params.hidden.begin(), params.hidden.end());
  sizes.push_back(1);
  MlpModel model = init_mlp(sizes, params.seed);
  check_inputs(model, X, &y);

  Rng rng(derive_seed(params.seed, {hash_string("mlp-batches")}));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(params.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(params.batch));
      Matrix xb(static_cast<Eigen::Index>(end - start), X.cols());
      std::vector<int> yb(end - start);
      for (std::size_t k = start; k < end; ++k) {
        xb.row(static_cast<Eigen::Index>(k - start)) = X.row(order[k]);
        yb[k - start] = y[static_cast<std::size_t>(order[k])];
      }
      const MlpGradients g = mlp_gradients(model, xb, yb);
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        model.weights[l] -= params.lr * g.weights[l];
        model.biases[l] -= params.lr * g.biases[l];
      }
    }
    const double loss = mlp_loss(model, X, y);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch + 1) +
                                                "; lower the learning rate");
    }
    model.loss_history.push_back(loss);
  }
  return model;
}

nlohmann::json to_json(const MlpModel& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    // Weights stored row-major (out x in).
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(m.weights[l].size()));
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) w.push_back(m.weights[l](r, c));
    }
    layers.push_back({{"weights", w}, {"biases", std::vector<double>(m.biases[l].data(), m.biases[l].data() + m.biases[l].size())}});
  }
  return {{"layer_sizes", m.layer_sizes}, {"layers", layers}, {"loss_history", m.loss_history}};
}

MlpModel mlp_from_json(const nlohmann::json& doc) {
  MlpModel m;
  m.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
  const auto& layers = doc.at("layers");
  if (layers.size() + 1 != m.layer_sizes.size()) throw Error(ErrorCode::ParseError, "MLP layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int in = m.layer_sizes[l];
    const int out = m.layer_sizes[l + 1];
    const auto w = layers[l].at("weights").get<std::vector<double>>();
    const auto b = layers[l].at("biases").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(in) * out || b.size() != static_cast<std::size_t>(out)) {
      throw Error(ErrorCode::ParseError, "MLP layer shape mismatch");
    }
    Eigen::MatrixXd wm(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) wm(r, c) = w[static_cast<std::size_t>(r) * in + c];
    }
    m.weights.push_back(std::move(wm));
    m.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), out));
  }
  m.loss_history = doc.value("loss_history", std::vector<double>{});
  return m;
}

}  // namespace histo
