#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dashcoach/media.hpp"
#include "json.hpp"

namespace dashcoach::media {

using nlohmann::json;

namespace {

// nlohmann reports byte offsets; people want line numbers.
std::size_t line_of(std::string_view text, std::size_t byte_offset) {
  const auto end = std::min(byte_offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(end), '\n'));
}

std::string clip_context(std::size_t index, const json& clip) {
  std::string where = "clips[" + std::to_string(index) + "]";
  if (clip.is_object() && clip.contains("id") && clip["id"].is_string()) {
    where += " (id \"" + clip["id"].get<std::string>() + "\")";
  }
  return where;
}

const json& require(const json& clip, const char* field, std::size_t index) {
  if (!clip.contains(field)) {
    throw ManifestError(clip_context(index, clip) + ": missing field '" + field + "'");
  }
  return clip[field];
}

std::string require_string(const json& clip, const char* field, std::size_t index) {
  const json& value = require(clip, field, index);
  if (!value.is_string() || value.get<std::string>().empty()) {
    throw ManifestError(clip_context(index, clip) + ": field '" + field + "' must be a non-empty string");
  }
  return value.get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return std::filesystem::absolute(path).lexically_normal();
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "test";
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "valid") return Split::valid;
  if (text == "test") return Split::test;
  return std::nullopt;
}

Manifest::Manifest(std::vector<ClipPair> clips) : clips_(std::move(clips)) {
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 0; i < clips_.size(); ++i) {
    if (!seen.insert(clips_[i].id).second) {
      throw ManifestError("duplicate clip id \"" + clips_[i].id + "\"");
    }
    split_index_[clips_[i].split].push_back(i);
  }
}

const ClipPair* Manifest::find(std::string_view id) const {
  for (const auto& clip : clips_) {
    if (clip.id == id) return &clip;
  }
  return nullptr;
}

std::vector<const ClipPair*> Manifest::in_split(Split split) const {
  std::vector<const ClipPair*> out;
  if (auto it = split_index_.find(split); it != split_index_.end()) {
    for (auto index : it->second) out.push_back(&clips_[index]);
  }
  return out;
}

std::size_t Manifest::count(Split split) const {
  auto it = split_index_.find(split);
  return it == split_index_.end() ? 0 : it->second.size();
}

Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ManifestError("manifest parse error at line " + std::to_string(line_of(text, e.byte)) +
                        ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("clips") || !doc["clips"].is_array()) {
    throw ManifestError("manifest parse error: top-level object needs a \"clips\" array");
  }

  std::vector<ClipPair> clips;
  const json& entries = doc["clips"];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& entry = entries[i];
    if (!entry.is_object()) throw ManifestError(clip_context(i, entry) + ": expected an object");

    ClipPair clip;
    clip.id = require_string(entry, "id", i);
    clip.road_video = resolve(base_dir, require_string(entry, "road_video", i));
    clip.driver_video = resolve(base_dir, require_string(entry, "driver_video", i));
    if (entry.contains("audio") && !entry["audio"].is_null()) {
      clip.audio = resolve(base_dir, require_string(entry, "audio", i));
    }

    const json& duration = require(entry, "duration_s", i);
    if (!duration.is_number() || !(duration.get<double>() > 0.0)) {
      throw ManifestError(clip_context(i, entry) + ": field 'duration_s' must be a number > 0");
    }
    clip.duration_s = duration.get<double>();

    const std::string split = require_string(entry, "split", i);
    auto parsed = parse_split(split);
    if (!parsed) {
      throw ManifestError(clip_context(i, entry) + ": field 'split' must be train, valid or test, got \"" +
                          split + "\"");
    }
    clip.split = *parsed;

    if (entry.contains("gold") && !entry["gold"].is_null()) clip.gold = require_string(entry, "gold", i);

    for (const auto* path : {&clip.road_video, &clip.driver_video}) {
      if (!std::filesystem::exists(*path)) {
        throw ManifestError(clip_context(i, entry) + ": video path does not exist: " + path->string());
      }
    }
    clips.push_back(std::move(clip));
  }
  return Manifest(std::move(clips));
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("manifest not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

std::string serialize_manifest(const Manifest& manifest) {
  json clips = json::array();
  for (const auto& clip : manifest.clips()) {
    json entry{{"id", clip.id},
               {"road_video", clip.road_video.string()},
               {"driver_video", clip.driver_video.string()},
               {"duration_s", clip.duration_s},
               {"split", std::string(to_string(clip.split))}};
    if (clip.audio) entry["audio"] = clip.audio->string();
    if (clip.gold) entry["gold"] = *clip.gold;
    clips.push_back(std::move(entry));
  }
  return json{{"clips", clips}}.dump(2) + "\n";
}

}  // namespace dashcoach::media
