#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "dashcoach/media.hpp"
#include "json.hpp"

namespace dashcoach::media {

namespace {

constexpr char kRasterIndex[] = "frames.json";

std::size_t frame_index_at(double t_s, double fps) {
  // Nudge so a timestamp sitting exactly on a frame boundary lands on that frame.
  return static_cast<std::size_t>(std::floor(t_s * fps + 1e-9));
}

/// PNG raster sequence: `<dir>/frames.json` = {"fps": f, "frames": ["a.png", ...]}.
class RasterSequenceSource final : public VideoSource {
 public:
  explicit RasterSequenceSource(const std::filesystem::path& dir) : dir_(dir) {
    std::ifstream in(dir / kRasterIndex);
    if (!in) throw MediaError("cannot read raster index in " + dir.string());
    nlohmann::json index;
    try {
      index = nlohmann::json::parse(in);
      fps_ = index.at("fps").get<double>();
      frames_ = index.at("frames").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw MediaError("malformed raster index in " + dir.string() + ": " + e.what());
    }
    if (!(fps_ > 0.0)) throw MediaError("raster index fps must be > 0 in " + dir.string());
  }

  RgbImage decode_at(double t_s) override {
    if (frames_.empty()) throw MediaError("raster sequence has no frames: " + dir_.string());
    if (t_s < 0.0) throw MediaError("negative timestamp");
    const auto index = std::min(frame_index_at(t_s, fps_), frames_.size() - 1);
    return read_png(dir_ / frames_[index]);
  }

 private:
  std::filesystem::path dir_;
  double fps_ = 0.0;
  std::vector<std::string> frames_;
};

class OpenCvVideoSource final : public VideoSource {
 public:
  explicit OpenCvVideoSource(const std::filesystem::path& path) : path_(path) {
    if (!capture_.open(path.string())) throw MediaError("cannot open video " + path.string());
    fps_ = capture_.get(cv::CAP_PROP_FPS);
    frame_count_ = capture_.get(cv::CAP_PROP_FRAME_COUNT);
    if (!(fps_ > 0.0)) throw MediaError("video reports no frame rate: " + path.string());
  }

  RgbImage decode_at(double t_s) override {
    if (t_s < 0.0) throw MediaError("negative timestamp");
    auto index = frame_index_at(t_s, fps_);
    if (frame_count_ >= 1.0) index = std::min(index, static_cast<std::size_t>(frame_count_) - 1);

    cv::Mat frame;
    capture_.set(cv::CAP_PROP_POS_FRAMES, static_cast<double>(index));
    if (!capture_.read(frame) || frame.empty()) frame = read_sequentially(index);
    if (frame.empty()) {
      throw MediaError("no decodable frame at t=" + std::to_string(t_s) + "s in " + path_.string());
    }

    cv::Mat rgb;
    cv::cvtColor(frame, rgb, cv::COLOR_BGR2RGB);
    if (!rgb.isContinuous()) rgb = rgb.clone();
    return RgbImage(rgb.cols, rgb.rows, std::vector<std::uint8_t>(rgb.datastart, rgb.dataend));
  }

 private:
  // Fallback for containers that cannot seek: decode from the start and keep
  // the last good frame at or before the target index.
  cv::Mat read_sequentially(std::size_t index) {
    capture_.release();
    if (!capture_.open(path_.string())) return {};
    cv::Mat frame;
    cv::Mat last;
    for (std::size_t i = 0; i <= index && capture_.read(frame); ++i) last = frame.clone();
    return last;
  }

  std::filesystem::path path_;
  cv::VideoCapture capture_;
  double fps_ = 0.0;
  double frame_count_ = 0.0;
};

}  // namespace

std::unique_ptr<VideoSource> open_video(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    if (!std::filesystem::exists(path / kRasterIndex)) {
      throw MediaError("directory has no " + std::string(kRasterIndex) + ": " + path.string());
    }
    return std::make_unique<RasterSequenceSource>(path);
  }
  if (!std::filesystem::exists(path)) throw MediaError("video not found: " + path.string());
  return std::make_unique<OpenCvVideoSource>(path);
}

}  // namespace dashcoach::media
