#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dashcoach/error.hpp"
#include "dashcoach/image.hpp"

namespace dashcoach::media {

enum class Split { train, valid, test };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

/// One synchronized road-facing + driver-facing recording.
struct ClipPair {
  std::string id;
  std::filesystem::path road_video;
  std::filesystem::path driver_video;
  std::optional<std::filesystem::path> audio;
  double duration_s = 0.0;
  Split split = Split::test;
  /// Key into the gold-record file; defaults to the clip id when absent.
  std::optional<std::string> gold;

  std::string gold_key() const { return gold.value_or(id); }

  bool operator==(const ClipPair&) const = default;
};

class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<ClipPair> clips);

  const std::vector<ClipPair>& clips() const { return clips_; }
  const ClipPair* find(std::string_view id) const;
  std::vector<const ClipPair*> in_split(Split split) const;
  std::size_t count(Split split) const;

  bool operator==(const Manifest& other) const { return clips_ == other.clips_; }

 private:
  std::vector<ClipPair> clips_;
  std::map<Split, std::vector<std::size_t>> split_index_;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

/// Video paths in the file are resolved against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);
std::string serialize_manifest(const Manifest& manifest);

enum class Layout { road_left, road_right };

std::string_view to_string(Layout layout);
std::optional<Layout> parse_layout(std::string_view text);

struct MergePolicy {
  int sample_count = 8;
  FrameSize per_camera{640, 480};
  Layout layout = Layout::road_left;

  /// Throws MediaError when K < 1 or either dimension is below 16 px.
  void validate() const;
  /// Stable textual form, the input to the cache key.
  std::string canonical() const;

  bool operator==(const MergePolicy&) const = default;
};

MergePolicy load_policy(const std::filesystem::path& path);
MergePolicy parse_policy(std::string_view json_text);

struct FrameSet {
  std::string clip_id;
  std::vector<RgbImage> frames;
  std::vector<double> timestamps;
  int width = 0;
  int height = 0;
};

struct MergedFrameSet {
  std::string clip_id;
  std::vector<RgbImage> frames;
  std::vector<double> timestamps;
  int width = 0;
  int height = 0;

  bool operator==(const MergedFrameSet&) const = default;
};

enum class Camera { road, driver };
std::string_view to_string(Camera camera);

class MediaError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public MediaError {
 public:
  DecodeError(Camera camera, const std::string& what);
  Camera camera() const { return camera_; }

 private:
  Camera camera_;
};

/// The single seam between the pipeline and any video decoder.
class VideoSource {
 public:
  virtual ~VideoSource() = default;
  /// Frame displayed at t seconds. Throws MediaError if nothing decodes there.
  virtual RgbImage decode_at(double t_s) = 0;
};

using VideoOpener = std::function<std::unique_ptr<VideoSource>(const std::filesystem::path&)>;

/// Directories holding a `frames.json` index are read as PNG raster
/// sequences; anything else goes through OpenCV's video backend.
std::unique_ptr<VideoSource> open_video(const std::filesystem::path& path);

/// Midpoint-uniform sample times t_i = (i + 0.5) * D / K.
std::vector<double> sample_timestamps(double duration_s, int sample_count);

struct CameraFrames {
  FrameSet road;
  FrameSet driver;
};

CameraFrames extract_frames(const ClipPair& clip, const MergePolicy& policy,
                            const VideoOpener& opener = open_video);

MergedFrameSet merge_side_by_side(const FrameSet& road, const FrameSet& driver,
                                  const MergePolicy& policy);

}  // namespace dashcoach::media
