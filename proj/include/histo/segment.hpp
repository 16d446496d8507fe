#pragma once

#include <filesystem>
#include <vector>

#include "histo/image.hpp"

namespace histo {

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// 8-connected region with its outer boundary traced along pixel corners.
/// The contour is closed: front() == back().
struct Component {
  int label = 0;
  long area_px = 0;
  BoundingBox bounding_box;
  std::vector<Point> contour;
  double contour_area = 0.0;
};

struct Labeling {
  std::vector<int> labels;  // 0 == background, otherwise Component::label
  std::vector<Component> components;
};

struct SegmentParams {
  double sigma = 2.0;
  long min_area_px = 0;
  bool tissue_is_dark = true;
};

struct SegmentResult {
  BinaryMask mask;
  std::vector<Component> components;
  int threshold = 0;
};

/// Rec. 601 luma, rounded.
GrayImage to_grayscale(const RgbImage& raster);

/// Separable Gaussian, radius ceil(3 sigma), reflect-101 borders.
GrayImage gaussian_blur(const GrayImage& g, double sigma);

/// Normalized 1-D Gaussian taps of radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Otsu's threshold: class 0 is gray < t. Ties go to the smallest t.
int otsu_threshold(const GrayImage& g);

BinaryMask binarize(const GrayImage& g, int t, bool tissue_is_dark);

Labeling label_components(const BinaryMask& m);
std::vector<Component> connected_components(const BinaryMask& m);

/// Closed outer boundary of the pixels carrying `label`, starting at the
/// top-left corner of its first pixel in raster order.
std::vector<Point> trace_contour(const std::vector<int>& labels, int width, int height, int label, Point start);

double shoelace_area(const std::vector<Point>& polygon);

std::vector<Component> filter_components(const std::vector<Component>& cs, long min_area_px);

/// grayscale -> blur -> Otsu -> binarize -> components -> area filter -> mask.
SegmentResult build_mask(const RgbImage& raster, const SegmentParams& params);

void write_components_csv(const std::filesystem::path& path, const std::vector<Component>& cs);

}  // namespace histo
