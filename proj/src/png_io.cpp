#include "histo/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "histo/error.hpp"

namespace histo {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw Error(mode[0] == 'r' ? ErrorCode::MissingInput : ErrorCode::IoError,
                "cannot open " + path.string());
  }
  return f;
}

// Decodes to 8-bit with `channels` channels (1 = gray, 3 = RGB).
std::vector<std::uint8_t> decode(const std::filesystem::path& path, int channels, int& width, int& height) {
  FilePtr file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "libpng init failed");
  }
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::ParseError, "invalid PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if ((color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (channels == 3 && (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)) {
    png_set_gray_to_rgb(png);
  }
  if (channels == 1 && (color & PNG_COLOR_MASK_COLOR)) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(width) * channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::ParseError, "unexpected PNG layout in " + path.string());
  }
  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return buffer;
}

void encode(const std::filesystem::path& path, const std::uint8_t* data, int width, int height, int color_type,
            int bit_depth, std::size_t rowbytes) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng init failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(data + rowbytes * y);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RgbImage read_png(const std::filesystem::path& path) {
  RgbImage img;
  img.data = decode(path, 3, img.width, img.height);
  return img;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  encode(path, image.data.data(), image.width, image.height, PNG_COLOR_TYPE_RGB, 8,
         static_cast<std::size_t>(image.width) * 3);
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  const std::size_t rowbytes = (static_cast<std::size_t>(mask.width) + 7) / 8;
  std::vector<std::uint8_t> packed(rowbytes * mask.height, 0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) packed[rowbytes * y + x / 8] |= static_cast<std::uint8_t>(0x80 >> (x % 8));
    }
  }
  encode(path, packed.data(), mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 1, rowbytes);
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  BinaryMask mask;
  auto gray = decode(path, 1, mask.width, mask.height);
  mask.bits.resize(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) mask.bits[i] = gray[i] != 0 ? 1 : 0;
  return mask;
}

}  // namespace histo
