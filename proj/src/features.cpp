#include "histo/features.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "histo/error.hpp"

namespace histo {

namespace {

constexpr double kStdFloor = 1e-8;

Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Vector image_to_features(const RgbImage& img) {
  Vector f(static_cast<Eigen::Index>(img.data.size()));
  for (std::size_t i = 0; i < img.data.size(); ++i) f(static_cast<Eigen::Index>(i)) = img.data[i] / 255.0;
  return f;
}

Vector patch_to_features(const Patch& p) { return image_to_features(p.pixels); }

RgbImage features_to_image(std::span<const double> features, int size_px) {
  if (features.size() != static_cast<std::size_t>(3) * size_px * size_px) {
    throw Error(ErrorCode::DimMismatch, "feature length does not match patch size");
  }
  RgbImage img(size_px, size_px);
  for (std::size_t i = 0; i < features.size(); ++i) {
    img.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(features[i] * 255.0), 0L, 255L));
  }
  return img;
}

void validate(const FeatureMatrix& X) {
  if (!X.values.allFinite()) throw Error(ErrorCode::DegenerateData, "feature matrix contains NaN or Inf");
  if (!X.labels.empty() && static_cast<Eigen::Index>(X.labels.size()) != X.n()) {
    throw Error(ErrorCode::LengthMismatch, "labels length differs from row count");
  }
}

Scaler fit_scaler(const Matrix& X) {
  if (X.rows() < 2) throw Error(ErrorCode::TooFewSamples, "scaler needs at least 2 rows");
  Scaler s;
  s.mean = X.colwise().mean().transpose();
  const Matrix centered = X.rowwise() - s.mean.transpose();
  s.std = (centered.colwise().squaredNorm() / static_cast<double>(X.rows())).cwiseSqrt().transpose();
  s.std = s.std.cwiseMax(kStdFloor);
  return s;
}

Matrix apply_scaler(const Matrix& X, const Scaler& scaler) {
  if (X.cols() != scaler.mean.size()) throw Error(ErrorCode::DimMismatch, "scaler dimension mismatch");
  return (X.rowwise() - scaler.mean.transpose()).array().rowwise() / scaler.std.transpose().array();
}

PcaModel fit_pca(const Matrix& X, int k) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (k < 1 || n < 2 || k > std::min(n - 1, d)) {
    throw Error(ErrorCode::KTooLarge,
                "k=" + std::to_string(k) + " outside [1, min(n-1, d)] for n=" + std::to_string(n) +
                    ", d=" + std::to_string(d));
  }
  PcaModel m;
  m.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - m.mean.transpose();
  if (!(centered.squaredNorm() > 0)) throw Error(ErrorCode::DegenerateData, "data has zero total variance");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  m.components = svd.matrixV().leftCols(k).transpose();
  m.explained_variance = sigma.head(k).array().square() / static_cast<double>(n - 1);
  for (int i = 0; i < k; ++i) {
    Eigen::Index arg;
    m.components.row(i).cwiseAbs().maxCoeff(&arg);
    if (m.components(i, arg) < 0) m.components.row(i) *= -1.0;
  }
  return m;
}

Matrix transform(const PcaModel& m, const Matrix& X) {
  if (X.cols() != m.d()) throw Error(ErrorCode::DimMismatch, "PCA input dimension mismatch");
  return (X.rowwise() - m.mean.transpose()) * m.components.transpose();
}

Matrix inverse_transform(const PcaModel& m, const Matrix& Y) {
  if (Y.cols() != m.k()) throw Error(ErrorCode::DimMismatch, "PCA score dimension mismatch");
  return (Y * m.components).rowwise() + m.mean.transpose();
}

nlohmann::json to_json(const Scaler& s) { return {{"mean", to_std_vector(s.mean)}, {"std", to_std_vector(s.std)}}; }

Scaler scaler_from_json(const nlohmann::json& doc) {
  Scaler s;
  s.mean = vector_from_json(doc.at("mean"));
  s.std = vector_from_json(doc.at("std"));
  return s;
}

nlohmann::json to_json(const PcaModel& m) {
  std::vector<double> comps(m.components.data(), m.components.data() + m.components.size());  // row-major
  return {{"k", m.k()},
          {"d", m.d()},
          {"mean", to_std_vector(m.mean)},
          {"components", comps},
          {"explained_variance", to_std_vector(m.explained_variance)}};
}

PcaModel pca_from_json(const nlohmann::json& doc) {
  PcaModel m;
  const int k = doc.at("k").get<int>();
  const int d = doc.at("d").get<int>();
  m.mean = vector_from_json(doc.at("mean"));
  const auto comps = doc.at("components").get<std::vector<double>>();
  if (comps.size() != static_cast<std::size_t>(k) * d || m.mean.size() != d) {
    throw Error(ErrorCode::ParseError, "PCA model has inconsistent shape");
  }
  m.components = Eigen::Map<const Matrix>(comps.data(), k, d);
  m.explained_variance = vector_from_json(doc.at("explained_variance"));
  return m;
}

}  // namespace histo
