#include "histo/svm.hpp"

#include <cmath>
#include <numeric>

#include "histo/error.hpp"
#include "histo/rng.hpp"

namespace histo {

namespace {

constexpr Eigen::Index kMaxCachedGram = 4096;

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

std::vector<double> signed_labels(const std::vector<int>& y) {
  std::vector<double> s(y.size());
  bool pos = false;
  bool neg = false;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s[i] = y[i] ? 1.0 : -1.0;
    (y[i] ? pos : neg) = true;
  }
  if (!pos || !neg) throw Error(ErrorCode::SingleClassInput, "SVM needs both classes");
  return s;
}

SvmModel train_linear(const Matrix& X, const std::vector<double>& s, const SvmParams& params, double lambda) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  Vector w = Vector::Zero(d);
  double b = 0.0;
  const double radius = 1.0 / std::sqrt(lambda);

  Rng rng(derive_seed(params.seed, {hash_string("svm-linear")}));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  // The returned weights average the iterates of the second half of training.
  const long total = static_cast<long>(params.epochs) * n;
  Vector w_avg = Vector::Zero(d);
  double b_avg = 0.0;
  long averaged = 0;
  long t = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (Eigen::Index i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double margin = s[i] * (X.row(i).dot(w) + b);
      const double shrink = 1.0 - eta * lambda;
      w *= shrink;
      b *= shrink;
      if (margin < 1.0) {
        w += (eta * s[i]) * X.row(i).transpose();
        b += eta * s[i];
      }
      // Projection onto the ball that contains the optimum.
      const double norm = std::sqrt(w.squaredNorm() + b * b);
      if (norm > radius) {
        w *= radius / norm;
        b *= radius / norm;
      }
      if (2 * t > total) {
        w_avg += w;
        b_avg += b;
        ++averaged;
      }
    }
  }
  SvmModel model;
  model.kernel = Kernel::Linear;
  model.w = averaged > 0 ? Vector(w_avg / static_cast<double>(averaged)) : w;
  model.bias = averaged > 0 ? b_avg / static_cast<double>(averaged) : b;
  return model;
}

SvmModel train_rbf(const Matrix& X, const std::vector<double>& s, const SvmParams& params, double lambda) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const double gamma = params.gamma > 0 ? params.gamma : 1.0 / static_cast<double>(d);

  // Augmented kernel K + 1 carries the bias.
  const bool cached = n <= kMaxCachedGram;
  Eigen::MatrixXd gram;
  if (cached) {
    gram.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      gram(i, i) = 2.0;
      for (Eigen::Index j = 0; j < i; ++j) gram(i, j) = gram(j, i) = rbf_kernel(X.row(i).data(), X.row(j).data(), d, gamma) + 1.0;
    }
  }
  auto kernel = [&](Eigen::Index i, Eigen::Index j) {
    return cached ? gram(i, j) : rbf_kernel(X.row(i).data(), X.row(j).data(), d, gamma) + 1.0;
  };

  std::vector<long> alpha(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> active;
  Rng rng(derive_seed(params.seed, {hash_string("svm-rbf")}));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  long t = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (Eigen::Index i : order) {
      ++t;
      double sum = 0.0;
      for (Eigen::Index j : active) sum += static_cast<double>(alpha[j]) * s[j] * kernel(j, i);
      const double decision = sum / (lambda * static_cast<double>(t));
      if (s[i] * decision < 1.0) {
        if (alpha[i]++ == 0) active.push_back(i);
      }
    }
  }

  std::sort(active.begin(), active.end());
  SvmModel model;
  model.kernel = Kernel::Rbf;
  model.gamma = gamma;
  model.support_vectors.resize(static_cast<Eigen::Index>(active.size()), d);
  model.dual_coef.resize(static_cast<Eigen::Index>(active.size()));
  const double scale = t > 0 ? 1.0 / (lambda * static_cast<double>(t)) : 0.0;
  double bias = 0.0;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const Eigen::Index j = active[k];
    model.support_vectors.row(static_cast<Eigen::Index>(k)) = X.row(j);
    model.dual_coef(static_cast<Eigen::Index>(k)) = scale * static_cast<double>(alpha[j]) * s[j];
    bias += model.dual_coef(static_cast<Eigen::Index>(k));
  }
  model.bias = bias;
  return model;
}

}  // namespace

std::string_view to_string(Kernel k) { return k == Kernel::Linear ? "linear" : "rbf"; }

Kernel parse_kernel(std::string_view text) {
  if (text == "linear") return Kernel::Linear;
  if (text == "rbf") return Kernel::Rbf;
  throw Error(ErrorCode::ParseError, "unknown kernel '" + std::string(text) + "'");
}

double rbf_kernel(const double* a, const double* b, Eigen::Index d, double gamma) {
  double dist = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    dist += diff * diff;
  }
  return std::exp(-gamma * dist);
}

SvmModel train_svm(const Matrix& X, const std::vector<int>& y, const SvmParams& params) {
  if (static_cast<Eigen::Index>(y.size()) != X.rows()) throw Error(ErrorCode::LengthMismatch, "labels/rows differ");
  if (!(params.C > 0) || params.epochs < 1) throw Error(ErrorCode::InvalidArgument, "SVM needs C > 0, epochs >= 1");
  const auto s = signed_labels(y);
  const double lambda = 1.0 / (params.C * static_cast<double>(X.rows()));
  return params.kernel == Kernel::Linear ? train_linear(X, s, params, lambda) : train_rbf(X, s, params, lambda);
}

Vector svm_decision_function(const SvmModel& model, const Matrix& X) {
  if (model.kernel == Kernel::Linear) {
    if (X.cols() != model.w.size()) throw Error(ErrorCode::DimMismatch, "SVM input dimension mismatch");
    return (X * model.w).array() + model.bias;
  }
  if (X.cols() != model.support_vectors.cols()) throw Error(ErrorCode::DimMismatch, "SVM input dimension mismatch");
  Vector f(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double sum = model.bias;
    for (Eigen::Index j = 0; j < model.support_vectors.rows(); ++j) {
      sum += model.dual_coef(j) * rbf_kernel(model.support_vectors.row(j).data(), X.row(i).data(), X.cols(), model.gamma);
    }
    f(i) = sum;
  }
  return f;
}

Vector svm_predict_proba(const SvmModel& model, const Matrix& X) {
  return svm_decision_function(model, X).unaryExpr([](double z) { return sigmoid(z); });
}

nlohmann::json to_json(const SvmModel& m) {
  nlohmann::json doc{{"kernel", to_string(m.kernel)}, {"bias", m.bias}};
  if (m.kernel == Kernel::Linear) {
    doc["w"] = std::vector<double>(m.w.data(), m.w.data() + m.w.size());
  } else {
    doc["gamma"] = m.gamma;
    doc["n_support"] = m.support_vectors.rows();
    doc["d"] = m.support_vectors.cols();
    doc["support_vectors"] =
        std::vector<double>(m.support_vectors.data(), m.support_vectors.data() + m.support_vectors.size());
    doc["dual_coef"] = std::vector<double>(m.dual_coef.data(), m.dual_coef.data() + m.dual_coef.size());
  }
  return doc;
}

SvmModel svm_from_json(const nlohmann::json& doc) {
  SvmModel m;
  m.kernel = parse_kernel(doc.at("kernel").get<std::string>());
  m.bias = doc.at("bias").get<double>();
  if (m.kernel == Kernel::Linear) {
    const auto w = doc.at("w").get<std::vector<double>>();
    m.w = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  } else {
    m.gamma = doc.at("gamma").get<double>();
    const auto n = doc.at("n_support").get<Eigen::Index>();
    const auto d = doc.at("d").get<Eigen::Index>();
    const auto sv = doc.at("support_vectors").get<std::vector<double>>();
    const auto coef = doc.at("dual_coef").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(sv.size()) != n * d || static_cast<Eigen::Index>(coef.size()) != n) {
      throw Error(ErrorCode::ParseError, "SVM support vector shape mismatch");
    }
    m.support_vectors = Eigen::Map<const Matrix>(sv.data(), n, d);
    m.dual_coef = Eigen::Map<const Vector>(coef.data(), n);
  }
  return m;
}

}  // namespace histo
