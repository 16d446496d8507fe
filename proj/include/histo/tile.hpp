#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "histo/image.hpp"

namespace histo {

enum class Label { Benign = 0, Tumor = 1, Unlabeled = 2 };

std::string_view to_string(Label label);
/// Accepts "benign", "tumor", "unlabeled" (and "0"/"1").
Label parse_label(std::string_view text);

/// Square RGB tile cut from one pyramid level.
struct Patch {
  std::string slide_id;
  int x = 0;
  int y = 0;
  int size_px = 0;
  RgbImage pixels;
  double coverage = 0.0;
  Label label = Label::Unlabeled;
};

struct AugmentSpec {
  bool allow_rot90 = false;
  bool allow_hflip = false;
  bool allow_vflip = false;
  int max_shift_px = 0;
  std::uint64_t seed = 0;
};

/// Random choices made by one augmentation draw.
struct AugmentDraw {
  int quarter_turns = 0;
  bool hflip = false;
  bool vflip = false;
  int shift_x = 0;
  int shift_y = 0;
};

double coverage(const BinaryMask& mask, int x, int y, int size_px);

/// Row-major grid scan; windows overhanging the edge are skipped and only
/// windows with coverage >= min_coverage are returned.
std::vector<Patch> extract_patches(const RgbImage& raster, const BinaryMask& mask, int size_px, int stride_px,
                                   double min_coverage);

// Lossless transform kernels on square images.
RgbImage rotate90(const RgbImage& img);  // clockwise
RgbImage flip_horizontal(const RgbImage& img);
RgbImage flip_vertical(const RgbImage& img);
/// out(x, y) = in(x - dx, y - dy) with reflect-101 padding.
RgbImage shift_reflect(const RgbImage& img, int dx, int dy);

/// Choices are a pure function of (seed, slide_id, x, y, draw_index).
AugmentDraw draw_augmentation(const AugmentSpec& spec, const Patch& p, std::uint64_t draw_index);
RgbImage apply_augmentation(const RgbImage& img, const AugmentDraw& draw);
Patch augment(const Patch& p, const AugmentSpec& spec, std::uint64_t draw_index);

/// One row of the patch dataset manifest CSV.
struct DatasetRow {
  std::string patch_path;
  std::string slide_id;
  int x = 0;
  int y = 0;
  double coverage = 0.0;
  Label label = Label::Unlabeled;
};

std::string patch_file_name(const Patch& p);
void write_dataset_manifest(const std::filesystem::path& path, const std::vector<DatasetRow>& rows);
std::vector<DatasetRow> read_dataset_manifest(const std::filesystem::path& path);

}  // namespace histo
