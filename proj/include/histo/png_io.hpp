#pragma once

#include <filesystem>

#include "histo/image.hpp"

namespace histo {

/// Decodes any PNG (gray, palette, 16-bit, alpha) into 8-bit RGB.
RgbImage read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& image);

/// Writes a 1-bit grayscale PNG (white == tissue).
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

/// Reads a mask PNG; any nonzero gray value is tissue.
BinaryMask read_mask_png(const std::filesystem::path& path);

}  // namespace histo
