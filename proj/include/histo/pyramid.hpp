#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "histo/image.hpp"

namespace histo {

struct PyramidLevel {
  int index = 0;
  int width_px = 0;
  int height_px = 0;
  double downsample = 1.0;
  RgbImage raster;
};

/// Multi-resolution slide. Immutable once loaded; level 0 is full resolution
/// and downsample factors increase strictly with the level index.
struct PyramidImage {
  std::string slide_id;
  std::vector<PyramidLevel> levels;

  int level_count() const { return static_cast<int>(levels.size()); }
};

/// Manifest entry as stored on disk (file is relative to the manifest).
struct LevelEntry {
  int index = 0;
  std::string file;
  int width = 0;
  int height = 0;
  double downsample = 1.0;

  friend bool operator==(const LevelEntry&, const LevelEntry&) = default;
};

struct PyramidManifest {
  std::string slide_id;
  std::vector<LevelEntry> levels;

  friend bool operator==(const PyramidManifest&, const PyramidManifest&) = default;
};

PyramidManifest parse_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path, const PyramidManifest& manifest);

/// Loads and validates a manifest plus its PNG levels.
/// Throws MissingLevelFile, DimensionMismatch or NonMonotonicDownsample.
PyramidImage load_pyramid(const std::filesystem::path& manifest_path);

const RgbImage& read_level(const PyramidImage& pyramid, int level);

/// Level 2 when present, otherwise the coarsest level available.
int default_working_level(const PyramidImage& pyramid);

/// Average of each factor x factor block; trailing partial blocks are dropped.
RgbImage box_downsample(const RgbImage& src, int factor);

/// Builds a pyramid from a full-resolution raster with integer downsample factors
/// (the first factor must be 1).
PyramidImage build_pyramid(std::string slide_id, const RgbImage& base, const std::vector<int>& factors);

/// Writes level PNGs named {slide_id}_L{index}.png next to the manifest and
/// returns the manifest that was written.
PyramidManifest save_pyramid(const PyramidImage& pyramid, const std::filesystem::path& manifest_path);

}  // namespace histo
