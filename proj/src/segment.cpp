#include "histo/segment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "histo/error.hpp"

namespace histo {

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

constexpr std::array<Point, 4> kDirs = {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};  // E S W N

}  // namespace

GrayImage to_grayscale(const RgbImage& raster) {
  if (raster.empty()) throw Error(ErrorCode::EmptyImage, "to_grayscale on empty raster");
  GrayImage g(raster.width, raster.height);
  for (std::size_t i = 0; i < raster.pixel_count(); ++i) {
    const std::uint8_t* p = raster.data.data() + 3 * i;
    const double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    g.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(luma), 0L, 255L));
  }
  return g;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  if (sigma == 0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

GrayImage gaussian_blur(const GrayImage& g, double sigma) {
  if (sigma < 0) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  if (sigma == 0 || g.pixels.empty()) return g;
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = g.width;
  const int h = g.height;

  std::vector<double> horiz(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * g.at(reflect101(x + k, w), y);
      horiz[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * horiz[static_cast<std::size_t>(reflect101(y + k, h)) * w + x];
      }
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
    }
  }
  return out;
}

int otsu_threshold(const GrayImage& g) {
  std::array<std::int64_t, 256> hist{};
  for (std::uint8_t v : g.pixels) ++hist[v];
  const auto distinct = std::count_if(hist.begin(), hist.end(), [](std::int64_t c) { return c > 0; });
  if (distinct < 2) throw Error(ErrorCode::DegenerateHistogram, "image has fewer than two gray levels");

  const std::int64_t total = static_cast<std::int64_t>(g.pixels.size());
  std::int64_t total_sum = 0;
  for (int v = 0; v < 256; ++v) total_sum += v * hist[v];

  // Between-class variance up to the constant factor 1/N^2:
  // (N*S0 - n0*S)^2 / (n0*n1), where class 0 holds gray values < t.
  int best_t = 0;
  double best = -1.0;
  std::int64_t n0 = 0;
  std::int64_t s0 = 0;
  for (int t = 0; t < 256; ++t) {
    const std::int64_t n1 = total - n0;
    double score = 0.0;
    if (n0 > 0 && n1 > 0) {
      const double diff = static_cast<double>(total * s0 - n0 * total_sum);
      score = diff * diff / (static_cast<double>(n0) * static_cast<double>(n1));
    }
    if (score > best) {
      best = score;
      best_t = t;
    }
    n0 += hist[t];
    s0 += static_cast<std::int64_t>(t) * hist[t];
  }
  return best_t;
}

BinaryMask binarize(const GrayImage& g, int t, bool tissue_is_dark) {
  if (t < 0 || t > 255) throw Error(ErrorCode::InvalidArgument, "threshold outside [0,255]");
  BinaryMask m(g.width, g.height);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    m.bits[i] = (tissue_is_dark ? g.pixels[i] < t : g.pixels[i] >= t) ? 1 : 0;
  }
  return m;
}

std::vector<Point> trace_contour(const std::vector<int>& labels, int width, int height, int label, Point start) {
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < width && y < height && labels[static_cast<std::size_t>(y) * width + x] == label;
  };
  // Ahead-left / ahead-right pixel offsets from a vertex, per direction.
  // Interior stays on the right; a set ahead-left pixel turns left, which
  // joins diagonal neighbours into one outline (8-connectivity).
  static constexpr std::array<Point, 4> kLeft = {{{0, -1}, {0, 0}, {-1, 0}, {-1, -1}}};
  static constexpr std::array<Point, 4> kRight = {{{0, 0}, {-1, 0}, {-1, -1}, {0, -1}}};

  std::vector<Point> contour{start};
  Point v = start;
  int dir = 0;
  while (true) {
    v.x += kDirs[dir].x;
    v.y += kDirs[dir].y;
    int next;
    if (inside(v.x + kLeft[dir].x, v.y + kLeft[dir].y)) {
      next = (dir + 3) % 4;
    } else if (inside(v.x + kRight[dir].x, v.y + kRight[dir].y)) {
      next = dir;
    } else {
      next = (dir + 1) % 4;
    }
    if (v == start && next == 0) break;
    if (next != dir) contour.push_back(v);
    dir = next;
  }
  contour.push_back(start);
  return contour;
}

double shoelace_area(const std::vector<Point>& polygon) {
  double twice = 0.0;
  for (std::size_t i = 0; i + 1 < polygon.size(); ++i) {
    twice += static_cast<double>(polygon[i].x) * polygon[i + 1].y - static_cast<double>(polygon[i + 1].x) * polygon[i].y;
  }
  return std::abs(twice) / 2.0;
}

Labeling label_components(const BinaryMask& m) {
  Labeling out;
  out.labels.assign(m.bits.size(), 0);
  const int w = m.width;
  const int h = m.height;
  std::vector<int> stack;
  int next_label = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!m.bits[idx] || out.labels[idx] != 0) continue;
      Component c;
      c.label = ++next_label;
      int min_x = x, max_x = x, min_y = y, max_y = y;
      out.labels[idx] = c.label;
      stack.assign(1, static_cast<int>(idx));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        ++c.area_px;
        const int cx = cur % w;
        const int cy = cur / w;
        min_x = std::min(min_x, cx);
        max_x = std::max(max_x, cx);
        min_y = std::min(min_y, cy);
        max_y = std::max(max_y, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx;
            const int ny = cy + dy;
            if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
            if (m.bits[n] && out.labels[n] == 0) {
              out.labels[n] = c.label;
              stack.push_back(static_cast<int>(n));
            }
          }
        }
      }
      c.bounding_box = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
      c.contour = trace_contour(out.labels, w, h, c.label, {x, y});
      c.contour_area = shoelace_area(c.contour);
      out.components.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<Component> connected_components(const BinaryMask& m) { return label_components(m).components; }

std::vector<Component> filter_components(const std::vector<Component>& cs, long min_area_px) {
  if (min_area_px < 0) throw Error(ErrorCode::InvalidArgument, "min_area_px must be >= 0");
  std::vector<Component> kept;
  std::copy_if(cs.begin(), cs.end(), std::back_inserter(kept),
               [&](const Component& c) { return c.area_px >= min_area_px; });
  return kept;
}

SegmentResult build_mask(const RgbImage& raster, const SegmentParams& params) {
  const GrayImage blurred = gaussian_blur(to_grayscale(raster), params.sigma);
  SegmentResult result;
  result.threshold = otsu_threshold(blurred);
  const BinaryMask raw = binarize(blurred, result.threshold, params.tissue_is_dark);
  Labeling labeling = label_components(raw);
  result.components = filter_components(labeling.components, params.min_area_px);

  std::unordered_set<int> keep;
  for (const auto& c : result.components) keep.insert(c.label);
  result.mask = BinaryMask(raster.width, raster.height);
  for (std::size_t i = 0; i < labeling.labels.size(); ++i) {
    result.mask.bits[i] = labeling.labels[i] != 0 && keep.contains(labeling.labels[i]) ? 1 : 0;
  }
  return result;
}

void write_components_csv(const std::filesystem::path& path, const std::vector<Component>& cs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "label,area_px,bbox_x,bbox_y,bbox_w,bbox_h,contour_area\n";
  char buf[64];
  for (const auto& c : cs) {
    std::snprintf(buf, sizeof buf, "%.1f", c.contour_area);
    out << c.label << ',' << c.area_px << ',' << c.bounding_box.x << ',' << c.bounding_box.y << ','
        << c.bounding_box.w << ',' << c.bounding_box.h << ',' << buf << '\n';
  }
}

}  // namespace histo
