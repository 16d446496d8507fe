#include "histo/image.hpp"

#include <algorithm>
#include <cstring>

#include "histo/error.hpp"

namespace histo {

RgbImage::RgbImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

BinaryMask::BinaryMask(int w, int h, bool fill)
    : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

RgbImage crop(const RgbImage& src, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > src.width || y + h > src.height) {
    throw Error(ErrorCode::RectOutOfBounds, "crop window outside image");
  }
  RgbImage out(w, h);
  for (int row = 0; row < h; ++row) {
    std::memcpy(out.at(0, row), src.at(x, y + row), static_cast<std::size_t>(w) * 3);
  }
  return out;
}

}  // namespace histo
