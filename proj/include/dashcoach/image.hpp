#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dashcoach/error.hpp"

namespace dashcoach::media {

struct FrameSize {
  int width = 0;
  int height = 0;

  bool operator==(const FrameSize&) const = default;
};

/// Packed 8-bit RGB raster, row-major, no padding between rows.
class RgbImage {
 public:
  static constexpr int kChannels = 3;

  RgbImage() = default;
  RgbImage(int width, int height, std::uint8_t fill = 0);
  RgbImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  FrameSize size() const { return {width_, height_}; }
  bool empty() const { return pixels_.empty(); }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }
  std::span<const std::uint8_t> row(int y) const;
  std::span<std::uint8_t> row(int y);

  bool operator==(const RgbImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

class ImageError : public Error {
 public:
  using Error::Error;
};

RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

/// PNG bytes at a fixed compression level, so identical rasters encode identically.
std::string encode_png(const RgbImage& image);
RgbImage decode_png(std::string_view bytes);

/// Bilinear resample (OpenCV INTER_LINEAR).
RgbImage resize_bilinear(const RgbImage& image, FrameSize target);

}  // namespace dashcoach::media
