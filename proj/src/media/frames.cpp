#include <algorithm>
#include <fstream>
#include <sstream>

#include "dashcoach/media.hpp"
#include "json.hpp"

namespace dashcoach::media {

std::string_view to_string(Layout layout) {
  return layout == Layout::road_left ? "road_left" : "road_right";
}

std::optional<Layout> parse_layout(std::string_view text) {
  if (text == "road_left") return Layout::road_left;
  if (text == "road_right") return Layout::road_right;
  return std::nullopt;
}

std::string_view to_string(Camera camera) { return camera == Camera::road ? "road" : "driver"; }

DecodeError::DecodeError(Camera camera, const std::string& what)
    : MediaError(std::string(to_string(camera)) + " camera: " + what), camera_(camera) {}

void MergePolicy::validate() const {
  if (sample_count < 1) throw MediaError("sample_count must be >= 1");
  if (per_camera.width < 16 || per_camera.height < 16) {
    throw MediaError("per-camera size must be at least 16x16, got " + std::to_string(per_camera.width) +
                     "x" + std::to_string(per_camera.height));
  }
}

std::string MergePolicy::canonical() const {
  std::ostringstream out;
  out << "k=" << sample_count << ";w=" << per_camera.width << ";h=" << per_camera.height
      << ";layout=" << to_string(layout);
  return out.str();
}

MergePolicy parse_policy(std::string_view json_text) {
  MergePolicy policy;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    policy.sample_count = doc.value("sample_count", policy.sample_count);
    policy.per_camera.width = doc.value("width", policy.per_camera.width);
    policy.per_camera.height = doc.value("height", policy.per_camera.height);
    const auto layout = doc.value("layout", std::string(to_string(policy.layout)));
    auto parsed = parse_layout(layout);
    if (!parsed) throw MediaError("unknown layout \"" + layout + "\"");
    policy.layout = *parsed;
  } catch (const nlohmann::json::exception& e) {
    throw MediaError(std::string("malformed merge policy: ") + e.what());
  }
  policy.validate();
  return policy;
}

MergePolicy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MediaError("policy file not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_policy(buffer.str());
}

std::vector<double> sample_timestamps(double duration_s, int sample_count) {
  if (!(duration_s > 0.0)) throw MediaError("clip duration must be > 0");
  if (sample_count < 1) throw MediaError("sample_count must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(sample_count));
  for (int i = 0; i < sample_count; ++i) {
    out.push_back((i + 0.5) * duration_s / sample_count);
  }
  return out;
}

namespace {

FrameSet extract_camera(const ClipPair& clip, Camera camera, const std::filesystem::path& path,
                        const std::vector<double>& timestamps, const MergePolicy& policy,
                        const VideoOpener& opener) {
  FrameSet out;
  out.clip_id = clip.id;
  out.timestamps = timestamps;
  out.width = policy.per_camera.width;
  out.height = policy.per_camera.height;
  try {
    auto source = opener(path);
    for (double t : timestamps) {
      out.frames.push_back(resize_bilinear(source->decode_at(t), policy.per_camera));
    }
  } catch (const DecodeError&) {
    throw;
  } catch (const Error& e) {
    throw DecodeError(camera, e.what());
  }
  return out;
}

void check_frame_set(const FrameSet& set, Camera camera, const MergePolicy& policy) {
  if (set.frames.size() != static_cast<std::size_t>(policy.sample_count) ||
      set.timestamps.size() != set.frames.size()) {
    throw MediaError(std::string(to_string(camera)) + " frame set has " + std::to_string(set.frames.size()) +
                     " frames, policy expects " + std::to_string(policy.sample_count));
  }
  for (const auto& frame : set.frames) {
    if (frame.size() != policy.per_camera) {
      throw MediaError(std::string(to_string(camera)) + " frame is " + std::to_string(frame.width()) + "x" +
                       std::to_string(frame.height()) + ", policy expects " +
                       std::to_string(policy.per_camera.width) + "x" + std::to_string(policy.per_camera.height));
    }
  }
}

}  // namespace

CameraFrames extract_frames(const ClipPair& clip, const MergePolicy& policy, const VideoOpener& opener) {
  policy.validate();
  const auto timestamps = sample_timestamps(clip.duration_s, policy.sample_count);
  return CameraFrames{
      extract_camera(clip, Camera::road, clip.road_video, timestamps, policy, opener),
      extract_camera(clip, Camera::driver, clip.driver_video, timestamps, policy, opener),
  };
}

MergedFrameSet merge_side_by_side(const FrameSet& road, const FrameSet& driver, const MergePolicy& policy) {
  policy.validate();
  if (road.frames.size() != driver.frames.size()) {
    throw MediaError("frame count mismatch: road has " + std::to_string(road.frames.size()) +
                     ", driver has " + std::to_string(driver.frames.size()));
  }
  check_frame_set(road, Camera::road, policy);
  check_frame_set(driver, Camera::driver, policy);

  const int w = policy.per_camera.width;
  const int h = policy.per_camera.height;
  const auto half_stride = static_cast<std::size_t>(w) * RgbImage::kChannels;

  MergedFrameSet out;
  out.clip_id = road.clip_id;
  out.timestamps = road.timestamps;
  out.width = 2 * w;
  out.height = h;
  out.frames.reserve(road.frames.size());

  for (std::size_t i = 0; i < road.frames.size(); ++i) {
    const RgbImage& left = policy.layout == Layout::road_left ? road.frames[i] : driver.frames[i];
    const RgbImage& right = policy.layout == Layout::road_left ? driver.frames[i] : road.frames[i];
    RgbImage composite(2 * w, h);
    for (int y = 0; y < h; ++y) {
      auto dst = composite.row(y);
      std::ranges::copy(left.row(y), dst.begin());
      std::ranges::copy(right.row(y), dst.begin() + static_cast<std::ptrdiff_t>(half_stride));
    }
    out.frames.push_back(std::move(composite));
  }
  return out;
}

}  // namespace dashcoach::media
