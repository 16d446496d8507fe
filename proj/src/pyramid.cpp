#include "histo/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "histo/error.hpp"
#include "histo/png_io.hpp"

namespace histo {

using nlohmann::json;

PyramidManifest parse_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::MissingInput, "pyramid manifest not found: " + manifest_path.string());
  PyramidManifest m;
  try {
    json doc = json::parse(in);
    m.slide_id = doc.at("slide_id").get<std::string>();
    for (const auto& entry : doc.at("levels")) {
      LevelEntry e;
      e.index = entry.at("index").get<int>();
      e.file = entry.at("file").get<std::string>();
      e.width = entry.at("width").get<int>();
      e.height = entry.at("height").get<int>();
      e.downsample = entry.at("downsample").get<double>();
      m.levels.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, manifest_path.string() + ": " + e.what());
  }
  if (m.levels.empty()) throw Error(ErrorCode::MissingLevelFile, "manifest lists no levels");
  return m;
}

void write_manifest(const std::filesystem::path& manifest_path, const PyramidManifest& manifest) {
  json doc;
  doc["slide_id"] = manifest.slide_id;
  doc["levels"] = json::array();
  for (const auto& e : manifest.levels) {
    doc["levels"].push_back(
        {{"index", e.index}, {"file", e.file}, {"width", e.width}, {"height", e.height}, {"downsample", e.downsample}});
  }
  std::ofstream out(manifest_path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + manifest_path.string());
  out << doc.dump(2) << '\n';
}

PyramidImage load_pyramid(const std::filesystem::path& manifest_path) {
  PyramidManifest manifest = parse_manifest(manifest_path);
  std::sort(manifest.levels.begin(), manifest.levels.end(),
            [](const LevelEntry& a, const LevelEntry& b) { return a.index < b.index; });

  if (manifest.levels.front().downsample != 1.0) {
    throw Error(ErrorCode::NonMonotonicDownsample, "level 0 must have downsample 1.0");
  }
  for (std::size_t i = 1; i < manifest.levels.size(); ++i) {
    if (!(manifest.levels[i].downsample > manifest.levels[i - 1].downsample)) {
      throw Error(ErrorCode::NonMonotonicDownsample,
                  "downsample must strictly increase at level " + std::to_string(manifest.levels[i].index));
    }
  }

  const auto base_dir = manifest_path.parent_path();
  PyramidImage pyramid;
  pyramid.slide_id = manifest.slide_id;
  for (std::size_t i = 0; i < manifest.levels.size(); ++i) {
    const LevelEntry& e = manifest.levels[i];
    const auto file = base_dir / e.file;
    if (!std::filesystem::exists(file)) throw Error(ErrorCode::MissingLevelFile, file.string());
    PyramidLevel level;
    level.index = static_cast<int>(i);
    level.width_px = e.width;
    level.height_px = e.height;
    level.downsample = e.downsample;
    level.raster = read_png(file);
    if (level.raster.width != e.width || level.raster.height != e.height) {
      throw Error(ErrorCode::DimensionMismatch,
                  file.string() + " declared " + std::to_string(e.width) + "x" + std::to_string(e.height) +
                      ", decoded " + std::to_string(level.raster.width) + "x" + std::to_string(level.raster.height));
    }
    if (i > 0) {
      const auto& base = pyramid.levels.front();
      const double ew = std::round(base.width_px / e.downsample);
      const double eh = std::round(base.height_px / e.downsample);
      if (std::abs(e.width - ew) > 1.0 || std::abs(e.height - eh) > 1.0) {
        throw Error(ErrorCode::DimensionMismatch,
                    "level " + std::to_string(i) + " dims inconsistent with downsample " + std::to_string(e.downsample));
      }
    }
    pyramid.levels.push_back(std::move(level));
  }
  return pyramid;
}

const RgbImage& read_level(const PyramidImage& pyramid, int level) {
  if (level < 0 || level >= pyramid.level_count()) {
    throw Error(ErrorCode::LevelOutOfRange,
                "level " + std::to_string(level) + " of " + std::to_string(pyramid.level_count()));
  }
  return pyramid.levels[level].raster;
}

int default_working_level(const PyramidImage& pyramid) {
  return pyramid.level_count() > 2 ? 2 : pyramid.level_count() - 1;
}

RgbImage box_downsample(const RgbImage& src, int factor) {
  if (factor < 1) throw Error(ErrorCode::InvalidArgument, "downsample factor must be >= 1");
  if (factor == 1) return src;
  const int w = src.width / factor;
  const int h = src.height / factor;
  RgbImage out(w, h);
  const int area = factor * factor;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sum[3] = {0, 0, 0};
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const std::uint8_t* p = src.at(x * factor + dx, y * factor + dy);
          sum[0] += p[0];
          sum[1] += p[1];
          sum[2] += p[2];
        }
      }
      std::uint8_t* q = out.at(x, y);
      for (int c = 0; c < 3; ++c) q[c] = static_cast<std::uint8_t>((sum[c] + area / 2) / area);
    }
  }
  return out;
}

PyramidImage build_pyramid(std::string slide_id, const RgbImage& base, const std::vector<int>& factors) {
  if (factors.empty() || factors.front() != 1) {
    throw Error(ErrorCode::NonMonotonicDownsample, "first downsample factor must be 1");
  }
  PyramidImage p;
  p.slide_id = std::move(slide_id);
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i > 0 && factors[i] <= factors[i - 1]) {
      throw Error(ErrorCode::NonMonotonicDownsample, "factors must strictly increase");
    }
    PyramidLevel level;
    level.index = static_cast<int>(i);
    level.downsample = factors[i];
    level.raster = box_downsample(base, factors[i]);
    level.width_px = level.raster.width;
    level.height_px = level.raster.height;
    p.levels.push_back(std::move(level));
  }
  return p;
}

PyramidManifest save_pyramid(const PyramidImage& pyramid, const std::filesystem::path& manifest_path) {
  const auto dir = manifest_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  PyramidManifest m;
  m.slide_id = pyramid.slide_id;
  for (const auto& level : pyramid.levels) {
    LevelEntry e;
    e.index = level.index;
    e.file = pyramid.slide_id + "_L" + std::to_string(level.index) + ".png";
    e.width = level.width_px;
    e.height = level.height_px;
    e.downsample = level.downsample;
    write_png(dir / e.file, level.raster);
    m.levels.push_back(e);
  }
  write_manifest(manifest_path, m);
  return m;
}

}  // namespace histo
