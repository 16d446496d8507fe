#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "histo/features.hpp"

namespace histo {

enum class Kernel { Linear, Rbf };

std::string_view to_string(Kernel k);
Kernel parse_kernel(std::string_view text);

/// Linear: f(x) = w.x + b. RBF: f(x) = sum_j coef_j K(sv_j, x) + b, where
/// coef_j already folds in alpha_j * y_j.
struct SvmModel {
  Kernel kernel = Kernel::Linear;
  Vector w;
  double bias = 0.0;
  Matrix support_vectors;
  Vector dual_coef;
  double gamma = 0.0;
};

struct SvmParams {
  Kernel kernel = Kernel::Linear;
  double C = 1.0;
  double gamma = 0.0;  // <= 0 selects 1 / d
  int epochs = 20;
  std::uint64_t seed = 0;
};

double rbf_kernel(const double* a, const double* b, Eigen::Index d, double gamma);

/// Stochastic subgradient descent on the L2-regularized hinge loss with
/// lambda = 1 / (C n) and step 1 / (lambda t). The bias is learned as the
/// weight of a constant feature (for RBF: a constant added to the kernel).
SvmModel train_svm(const Matrix& X, const std::vector<int>& y, const SvmParams& params);

Vector svm_decision_function(const SvmModel& model, const Matrix& X);
/// Logistic of the decision value.
Vector svm_predict_proba(const SvmModel& model, const Matrix& X);

nlohmann::json to_json(const SvmModel& m);
SvmModel svm_from_json(const nlohmann::json& doc);

}  // namespace histo
