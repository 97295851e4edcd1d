#include "dashcoach/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <fstream>
#include <iterator>

namespace dashcoach::media {

namespace {

constexpr int kPngCompression = 6;

std::size_t byte_count(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * RgbImage::kChannels;
}

// Borrowed view of the raster as an OpenCV matrix; OpenCV treats it as RGB only
// because every conversion below says so explicitly.
cv::Mat as_mat(const RgbImage& image) {
  return cv::Mat(image.height(), image.width(), CV_8UC3,
                 const_cast<std::uint8_t*>(image.pixels().data()));
}

RgbImage from_bgr(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (!rgb.isContinuous()) rgb = rgb.clone();
  std::vector<std::uint8_t> pixels(rgb.datastart, rgb.dataend);
  return RgbImage(rgb.cols, rgb.rows, std::move(pixels));
}

cv::Mat to_bgr(const RgbImage& image) {
  cv::Mat bgr;
  cv::cvtColor(as_mat(image), bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

}  // namespace

RgbImage::RgbImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height), pixels_(byte_count(width, height), fill) {
  if (width < 0 || height < 0) throw ImageError("negative image dimensions");
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 0 || height < 0) throw ImageError("negative image dimensions");
  if (pixels_.size() != byte_count(width, height)) {
    throw ImageError("pixel buffer size does not match " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

std::span<const std::uint8_t> RgbImage::row(int y) const {
  const auto stride = static_cast<std::size_t>(width_) * kChannels;
  return std::span<const std::uint8_t>(pixels_).subspan(static_cast<std::size_t>(y) * stride, stride);
}

std::span<std::uint8_t> RgbImage::row(int y) {
  const auto stride = static_cast<std::size_t>(width_) * kChannels;
  return std::span<std::uint8_t>(pixels_).subspan(static_cast<std::size_t>(y) * stride, stride);
}

RgbImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image " + path.string());
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_png(bytes);
  } catch (const ImageError& e) {
    throw ImageError(path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  const std::string bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("cannot write image " + path.string());
}

std::string encode_png(const RgbImage& image) {
  if (image.empty()) throw ImageError("cannot encode an empty image");
  std::vector<uchar> buffer;
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, kPngCompression};
  if (!cv::imencode(".png", to_bgr(image), buffer, params)) throw ImageError("PNG encoding failed");
  return std::string(buffer.begin(), buffer.end());
}

RgbImage decode_png(std::string_view bytes) {
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<char*>(bytes.data()));
  cv::Mat decoded = cv::imdecode(raw, cv::IMREAD_COLOR);
  if (decoded.empty()) throw ImageError("not a decodable image");
  return from_bgr(decoded);
}

RgbImage resize_bilinear(const RgbImage& image, FrameSize target) {
  if (image.empty()) throw ImageError("cannot resize an empty image");
  if (image.size() == target) return image;
  cv::Mat resized;
  cv::resize(as_mat(image), resized, cv::Size(target.width, target.height), 0, 0, cv::INTER_LINEAR);
  std::vector<std::uint8_t> pixels(resized.datastart, resized.dataend);
  return RgbImage(resized.cols, resized.rows, std::move(pixels));
}

}  // namespace dashcoach::media
