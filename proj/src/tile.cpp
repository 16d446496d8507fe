#include "histo/tile.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "histo/error.hpp"
#include "histo/rng.hpp"

namespace histo {

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

void require_square(const RgbImage& img) {
  if (img.width != img.height) throw Error(ErrorCode::DimMismatch, "transform expects a square patch");
}

}  // namespace

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Benign: return "benign";
    case Label::Tumor: return "tumor";
    case Label::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label parse_label(std::string_view text) {
  if (text == "benign" || text == "0") return Label::Benign;
  if (text == "tumor" || text == "1") return Label::Tumor;
  if (text == "unlabeled") return Label::Unlabeled;
  throw Error(ErrorCode::ParseError, "unknown label '" + std::string(text) + "'");
}

double coverage(const BinaryMask& mask, int x, int y, int size_px) {
  if (size_px < 1 || x < 0 || y < 0 || x + size_px > mask.width || y + size_px > mask.height) {
    throw Error(ErrorCode::RectOutOfBounds, "coverage window outside mask");
  }
  long count = 0;
  for (int row = y; row < y + size_px; ++row) {
    for (int col = x; col < x + size_px; ++col) count += mask.at(col, row) ? 1 : 0;
  }
  return static_cast<double>(count) / (static_cast<double>(size_px) * size_px);
}

std::vector<Patch> extract_patches(const RgbImage& raster, const BinaryMask& mask, int size_px, int stride_px,
                                   double min_coverage) {
  if (raster.width != mask.width || raster.height != mask.height) {
    throw Error(ErrorCode::DimMismatch, "raster and mask dimensions differ");
  }
  if (size_px < 1 || stride_px < 1 || min_coverage < 0.0 || min_coverage > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "invalid tiling parameters");
  }
  // Summed-area table of mask pixels.
  const int w = mask.width;
  const int h = mask.height;
  std::vector<long> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto s = [&](int x, int y) -> long& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    long row = 0;
    for (int x = 0; x < w; ++x) {
      row += mask.at(x, y) ? 1 : 0;
      s(x + 1, y + 1) = s(x + 1, y) + row;
    }
  }

  std::vector<Patch> patches;
  const double area = static_cast<double>(size_px) * size_px;
  for (int y = 0; y + size_px <= h; y += stride_px) {
    for (int x = 0; x + size_px <= w; x += stride_px) {
      const long count = s(x + size_px, y + size_px) - s(x, y + size_px) - s(x + size_px, y) + s(x, y);
      const double cov = static_cast<double>(count) / area;
      if (cov < min_coverage) continue;
      Patch p;
      p.x = x;
      p.y = y;
      p.size_px = size_px;
      p.coverage = cov;
      p.pixels = crop(raster, x, y, size_px, size_px);
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

RgbImage rotate90(const RgbImage& img) {
  require_square(img);
  const int n = img.width;
  RgbImage out(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const std::uint8_t* src = img.at(y, n - 1 - x);
      std::copy(src, src + 3, out.at(x, y));
    }
  }
  return out;
}

RgbImage flip_horizontal(const RgbImage& img) {
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t* src = img.at(img.width - 1 - x, y);
      std::copy(src, src + 3, out.at(x, y));
    }
  }
  return out;
}

RgbImage flip_vertical(const RgbImage& img) {
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    const std::uint8_t* src = img.at(0, img.height - 1 - y);
    std::copy(src, src + 3 * static_cast<std::size_t>(img.width), out.at(0, y));
  }
  return out;
}

RgbImage shift_reflect(const RgbImage& img, int dx, int dy) {
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    const int sy = reflect101(y - dy, img.height);
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t* src = img.at(reflect101(x - dx, img.width), sy);
      std::copy(src, src + 3, out.at(x, y));
    }
  }
  return out;
}

AugmentDraw draw_augmentation(const AugmentSpec& spec, const Patch& p, std::uint64_t draw_index) {
  if (spec.max_shift_px < 0 || (p.size_px > 0 && spec.max_shift_px >= p.size_px)) {
    throw Error(ErrorCode::InvalidArgument, "max_shift_px must be in [0, size_px)");
  }
  Rng rng(derive_seed(spec.seed, {hash_string(p.slide_id), static_cast<std::uint64_t>(p.x),
                                  static_cast<std::uint64_t>(p.y), draw_index}));
  AugmentDraw d;
  if (spec.allow_rot90) d.quarter_turns = static_cast<int>(rng.below(4));
  if (spec.allow_hflip) d.hflip = rng.coin();
  if (spec.allow_vflip) d.vflip = rng.coin();
  if (spec.max_shift_px > 0) {
    d.shift_x = rng.uniform_int(-spec.max_shift_px, spec.max_shift_px);
    d.shift_y = rng.uniform_int(-spec.max_shift_px, spec.max_shift_px);
  }
  return d;
}

RgbImage apply_augmentation(const RgbImage& img, const AugmentDraw& draw) {
  RgbImage out = img;
  for (int i = 0; i < draw.quarter_turns; ++i) out = rotate90(out);
  if (draw.hflip) out = flip_horizontal(out);
  if (draw.vflip) out = flip_vertical(out);
  if (draw.shift_x != 0 || draw.shift_y != 0) out = shift_reflect(out, draw.shift_x, draw.shift_y);
  return out;
}

Patch augment(const Patch& p, const AugmentSpec& spec, std::uint64_t draw_index) {
  Patch out = p;
  out.pixels = apply_augmentation(p.pixels, draw_augmentation(spec, p, draw_index));
  return out;
}

std::string patch_file_name(const Patch& p) {
  return p.slide_id + "_" + std::to_string(p.x) + "_" + std::to_string(p.y) + ".png";
}

void write_dataset_manifest(const std::filesystem::path& path, const std::vector<DatasetRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "path,slide_id,x,y,coverage,label\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.coverage);
    out << r.patch_path << ',' << r.slide_id << ',' << r.x << ',' << r.y << ',' << buf << ',' << to_string(r.label)
        << '\n';
  }
}

std::vector<DatasetRow> read_dataset_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingInput, "dataset manifest not found: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("path,slide_id,x,y,coverage,label", 0) != 0) {
    throw Error(ErrorCode::ParseError, path.string() + ": missing header row");
  }
  std::vector<DatasetRow> rows;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) throw Error(ErrorCode::ParseError, path.string() + ": bad row '" + line + "'");
    DatasetRow r;
    r.patch_path = fields[0];
    r.slide_id = fields[1];
    try {
      r.x = std::stoi(fields[2]);
      r.y = std::stoi(fields[3]);
      r.coverage = std::stod(fields[4]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, path.string() + ": bad number in '" + line + "'");
    }
    r.label = parse_label(fields[5]);
    if (r.label == Label::Unlabeled) {
      throw Error(ErrorCode::ParseError, path.string() + ": label must be benign or tumor in '" + line + "'");
    }
    if (!seen.insert(r.patch_path).second) {
      throw Error(ErrorCode::ParseError, path.string() + ": duplicate path " + r.patch_path);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace histo
