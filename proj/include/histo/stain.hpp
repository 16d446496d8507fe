#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "histo/image.hpp"

namespace histo {

/// Per-pixel optical density, 3 channels interleaved like RgbImage.
struct OdImage {
  int width = 0;
  int height = 0;
  std::vector<double> od;
};

/// Columns are the OD signatures of the two stains (hematoxylin first).
using StainMatrix = Eigen::Matrix<double, 3, 2>;

struct StainFitMeta {
  double lambda = 0.0;
  int iters_run = 0;
  bool converged = false;
  std::size_t pixels_used = 0;
  /// Objective after every H-step, starting with the initial one.
  std::vector<double> objective_trace;
};

struct StainModel {
  StainMatrix W = StainMatrix::Zero();
  Eigen::Vector2d max_c = Eigen::Vector2d::Zero();
  StainFitMeta meta;
};

struct StainFitParams {
  double lambda = 0.1;
  int iters = 200;
  double tol = 1e-6;
  double bg_od_threshold = 0.15;
  std::size_t max_pixels = 50000;
  std::uint64_t seed = 0;
};

/// -ln((I + 1) / 256); 255 maps to exactly 0.
double byte_to_od(std::uint8_t intensity);
/// clamp(round(256 exp(-od) - 1), 0, 255).
std::uint8_t od_to_byte(double od);

OdImage rgb_to_od(const RgbImage& raster);
RgbImage od_to_rgb(const OdImage& od);

/// Reference H&E signatures, unit-normalized.
StainMatrix reference_stain_matrix();

/// Nonnegative lasso for one pixel by cyclic coordinate descent:
/// argmin_{h >= 0} ||od - W h||^2 + lambda * sum(h), warm-started at `start`.
Eigen::Vector2d solve_concentration(const Eigen::Vector3d& od, const StainMatrix& W, double lambda,
                                    Eigen::Vector2d start = Eigen::Vector2d::Zero());

/// ||V - W H||_F^2 + lambda * sum(H).
double stain_objective(const Eigen::Matrix3Xd& V, const StainMatrix& W, const Eigen::Matrix2Xd& H, double lambda);

/// Sparse NMF on a 3 x N matrix of foreground optical densities.
StainModel fit_stain_model(const Eigen::Matrix3Xd& V, const StainFitParams& params);

/// Excludes background (OD norm < bg_od_threshold), subsamples with the
/// seed and fits. Throws InsufficientTissue below 100 foreground pixels.
StainModel fit_stain_model(const RgbImage& raster, const StainFitParams& params);

/// 2 x N concentrations, pixels in raster order.
Eigen::Matrix2Xd concentrations(const RgbImage& raster, const StainMatrix& W, double lambda);

/// Re-expresses `raster` under the target stains with per-stain
/// 99th-percentile concentration matching.
RgbImage normalize_stain(const RgbImage& raster, const StainModel& source, const StainModel& target, double lambda);

/// Linear interpolation between order statistics at rank p/100 * (n - 1).
double percentile(std::span<const double> values, double p);

/// Angle in radians between two column directions.
double column_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

nlohmann::json to_json(const StainModel& model);
StainModel stain_model_from_json(const nlohmann::json& doc);

}  // namespace histo
