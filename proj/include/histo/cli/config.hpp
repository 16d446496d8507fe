#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "histo/model.hpp"
#include "histo/segment.hpp"
#include "histo/stain.hpp"
#include "histo/tile.hpp"

namespace histo::cli {

struct KeySpec {
  std::string_view key;
  std::string_view default_value;  // empty == no default
  std::string_view help;
};

/// Every recognised config key; CLI flags mirror these as --<key>.
const std::vector<KeySpec>& config_keys();

/// Flat `section.key -> value` map read from the TOML-like config text:
/// `[section]` headers, `key = value` lines, `#` comments, optional quotes.
using ConfigValues = std::map<std::string, std::string>;

ConfigValues parse_config_text(std::string_view text);
ConfigValues parse_config_file(const std::filesystem::path& path);

struct PipelineConfig {
  std::uint64_t seed = 0;

  std::filesystem::path corpus;
  std::optional<std::filesystem::path> template_image;  // nullopt == first benign slide
  std::filesystem::path out_dir;

  std::optional<int> level;
  SegmentParams segment;
  std::optional<long> min_area_px;
  double min_area_frac = 0.005;

  int tile_size = 256;
  int tile_stride = 256;
  double min_coverage = 0.8;

  bool stain_enabled = true;
  StainFitParams stain;

  bool standardize = true;
  bool pca = false;
  int pca_k = 300;

  int augment_copies = 0;
  AugmentSpec augment;

  ClassifierSpec classifier;
  std::string model_id;

  double test_frac = 0.2;
  int k_folds = 5;
  double threshold = 0.5;

  /// Effective values for every key, defaults included.
  ConfigValues effective;

  /// SHA-256 of the canonical key=value text, excluding paths.out.
  std::string hash() const;
  std::string canonical_text() const;
  std::vector<StageSpec> pipeline_stages() const;
};

/// Merges `overrides` over `file_values`, applies defaults and validates.
/// Relative paths resolve against `base_dir`. Throws ConfigInvalid.
PipelineConfig resolve_config(const ConfigValues& file_values, const ConfigValues& overrides,
                              const std::filesystem::path& base_dir);

PipelineConfig load_config(const std::filesystem::path& path, const ConfigValues& overrides = {});

std::string sha256_hex(std::string_view data);

}  // namespace histo::cli
