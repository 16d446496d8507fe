#include <gtest/gtest.h>

#include <numeric>

#include "histo/error.hpp"
#include "histo/png_io.hpp"
#include "histo/pyramid.hpp"
#include "histo/rng.hpp"
#include "oracles.hpp"

using namespace histo;
namespace fs = std::filesystem;

namespace {

RgbImage random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img(w, h);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

// Block average computed independently of box_downsample.
std::uint8_t block_mean(const RgbImage& src, int bx, int by, int f, int c) {
  double sum = 0.0;
  for (int y = by * f; y < (by + 1) * f; ++y)
    for (int x = bx * f; x < (bx + 1) * f; ++x) sum += src.at(x, y)[c];
  return static_cast<std::uint8_t>(std::floor(sum / (f * f) + 0.5));
}

double mean_intensity(const RgbImage& img) {
  return std::accumulate(img.data.begin(), img.data.end(), 0.0) / static_cast<double>(img.data.size());
}

}  // namespace

TEST(Pyramid, SingleLevelRoundTrip) {
  const auto dir = oracle::scratch_dir("pyr_single");
  const RgbImage base = random_image(64, 64, 1);
  save_pyramid(build_pyramid("s", base, {1}), dir / "s.json");
  const PyramidImage p = load_pyramid(dir / "s.json");
  ASSERT_EQ(p.level_count(), 1);
  EXPECT_EQ(p.levels[0].width_px, 64);
  EXPECT_EQ(read_level(p, 0), base);
}

TEST(Pyramid, FourLevelDerivedMatchesBoxOracle) {
  const auto dir = oracle::scratch_dir("pyr_four");
  const RgbImage base = random_image(256, 256, 2);
  save_pyramid(build_pyramid("s", base, {1, 4, 16, 64}), dir / "s.json");
  const PyramidImage p = load_pyramid(dir / "s.json");
  ASSERT_EQ(p.level_count(), 4);
  EXPECT_EQ(p.levels[2].downsample, 16.0);
  const RgbImage& l2 = read_level(p, 2);
  ASSERT_EQ(l2.width, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) ASSERT_EQ(l2.at(x, y)[c], block_mean(base, x, y, 16, c));
}

TEST(Pyramid, LevelMeansTrackBase) {
  const RgbImage base = random_image(128, 96, 3);
  const PyramidImage p = build_pyramid("s", base, {1, 2, 4, 8});
  for (const auto& level : p.levels) EXPECT_NEAR(mean_intensity(level.raster), mean_intensity(base), 1.0);
}

TEST(Pyramid, ManifestRoundTrip) {
  const auto dir = oracle::scratch_dir("pyr_manifest");
  const PyramidManifest written = save_pyramid(build_pyramid("abc", random_image(40, 40, 4), {1, 2}), dir / "m.json");
  EXPECT_EQ(parse_manifest(dir / "m.json"), written);
  write_manifest(dir / "copy.json", written);
  EXPECT_EQ(parse_manifest(dir / "copy.json"), written);
}

TEST(Pyramid, DeclaredSizeMismatch) {
  const auto dir = oracle::scratch_dir("pyr_mismatch");
  write_png(dir / "l0.png", random_image(50, 50, 5));
  write_manifest(dir / "m.json", {"s", {{0, "l0.png", 100, 100, 1.0}}});
  try {
    load_pyramid(dir / "m.json");
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Pyramid, MissingLevelFile) {
  const auto dir = oracle::scratch_dir("pyr_missing");
  write_manifest(dir / "m.json", {"s", {{0, "nope.png", 8, 8, 1.0}}});
  try {
    load_pyramid(dir / "m.json");
    FAIL() << "expected MissingLevelFile";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingLevelFile);
  }
}

TEST(Pyramid, NonMonotonicDownsample) {
  const auto dir = oracle::scratch_dir("pyr_nonmono");
  write_png(dir / "a.png", random_image(32, 32, 6));
  write_png(dir / "b.png", random_image(16, 16, 7));
  write_manifest(dir / "m.json", {"s", {{0, "a.png", 32, 32, 1.0}, {1, "b.png", 16, 16, 1.0}}});
  try {
    load_pyramid(dir / "m.json");
    FAIL() << "expected NonMonotonicDownsample";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonMonotonicDownsample);
  }
}

TEST(Pyramid, LevelOutOfRange) {
  const PyramidImage p = build_pyramid("s", random_image(16, 16, 8), {1, 2, 4});
  try {
    read_level(p, 7);
    FAIL() << "expected LevelOutOfRange";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LevelOutOfRange);
  }
}

TEST(Pyramid, DefaultWorkingLevel) {
  EXPECT_EQ(default_working_level(build_pyramid("s", random_image(16, 16, 9), {1, 2, 4, 8})), 2);
  EXPECT_EQ(default_working_level(build_pyramid("s", random_image(16, 16, 9), {1, 2})), 1);
}
