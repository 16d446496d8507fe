#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "histo/tile.hpp"

namespace histo {

/// Samples are rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct FeatureMatrix {
  Matrix values;
  std::vector<int> labels;  // empty when unlabeled; otherwise 0 benign, 1 tumor

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index d() const { return values.cols(); }
};

/// Channel-interleaved row-major flatten scaled to [0,1]; d = 3 * size^2.
Vector patch_to_features(const Patch& p);
Vector image_to_features(const RgbImage& img);
/// Inverse of image_to_features for a square patch.
RgbImage features_to_image(std::span<const double> features, int size_px);

/// Throws DegenerateData on NaN/Inf and LengthMismatch when labels do not match the rows.
void validate(const FeatureMatrix& X);

struct Scaler {
  Vector mean;
  Vector std;  // population std, floored at 1e-8
};

Scaler fit_scaler(const Matrix& X);
Matrix apply_scaler(const Matrix& X, const Scaler& scaler);

struct PcaModel {
  Vector mean;
  Matrix components;  // k x d, orthonormal rows
  Vector explained_variance;

  int k() const { return static_cast<int>(components.rows()); }
  int d() const { return static_cast<int>(components.cols()); }
};

/// Exact thin SVD of the centered data. Each component's largest-magnitude
/// entry is made positive so the result is sign-deterministic.
PcaModel fit_pca(const Matrix& X, int k);
Matrix transform(const PcaModel& m, const Matrix& X);
Matrix inverse_transform(const PcaModel& m, const Matrix& Y);

nlohmann::json to_json(const Scaler& s);
Scaler scaler_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PcaModel& m);
PcaModel pca_from_json(const nlohmann::json& doc);

}  // namespace histo
