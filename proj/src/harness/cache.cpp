#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dashcoach/digest.hpp"
#include "dashcoach/harness.hpp"
#include "json.hpp"

namespace dashcoach::harness {

namespace fs = std::filesystem;
using nlohmann::json;

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t n = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (n == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::jthread> pool;
  pool.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          failed = true;
        }
      }
    });
  }
  pool.clear();
  if (first) std::rethrow_exception(first);
}

FrameCache::FrameCache(fs::path root) : root_(std::move(root)) {}

std::string FrameCache::key(std::string_view clip_id, const media::MergePolicy& policy) {
  return sha256_hex(std::string(clip_id) + "\n" + policy.canonical());
}

fs::path FrameCache::entry_dir(std::string_view clip_id, const media::MergePolicy& policy) const {
  return root_ / key(clip_id, policy);
}

namespace {

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03zu.png", i);
  return buf;
}

}  // namespace

std::optional<media::MergedFrameSet> FrameCache::load(std::string_view clip_id,
                                                      const media::MergePolicy& policy) const {
  const auto dir = entry_dir(clip_id, policy);
  std::ifstream in(dir / "meta.json");
  if (!in) return std::nullopt;
  try {
    const auto meta = json::parse(in);
    if (meta.at("clip_id") != clip_id || meta.at("policy") != policy.canonical()) return std::nullopt;
    media::MergedFrameSet set;
    set.clip_id = std::string(clip_id);
    set.width = meta.at("width").get<int>();
    set.height = meta.at("height").get<int>();
    set.timestamps = meta.at("timestamps").get<std::vector<double>>();
    for (std::size_t i = 0; i < set.timestamps.size(); ++i) {
      set.frames.push_back(media::read_png(dir / frame_name(i)));
    }
    return set;
  } catch (const std::exception&) {
    // Half-written or foreign entry: treat as a miss and let store() replace it.
    return std::nullopt;
  }
}

void FrameCache::store(const media::MergedFrameSet& frames, const media::MergePolicy& policy) const {
  const auto dir = entry_dir(frames.clip_id, policy);
  std::ostringstream suffix;
  suffix << ".tmp-" << std::this_thread::get_id();
  const fs::path tmp = dir.string() + suffix.str();
  fs::create_directories(tmp);
  for (std::size_t i = 0; i < frames.frames.size(); ++i) media::write_png(tmp / frame_name(i), frames.frames[i]);
  json meta{{"clip_id", frames.clip_id},
            {"policy", policy.canonical()},
            {"width", frames.width},
            {"height", frames.height},
            {"timestamps", frames.timestamps}};
  {
    std::ofstream out(tmp / "meta.json");
    out << meta.dump(2) << "\n";
    if (!out) throw HarnessError("cannot write frame cache entry " + tmp.string());
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) fs::remove_all(tmp, ec);  // another worker won the race
}

media::MergedFrameSet obtain_frames(const media::ClipPair& clip, const media::MergePolicy& policy,
                                    const FrameCache* cache, bool* cache_hit, const media::VideoOpener& opener) {
  if (cache) {
    if (auto hit = cache->load(clip.id, policy)) {
      if (cache_hit) *cache_hit = true;
      return std::move(*hit);
    }
  }
  if (cache_hit) *cache_hit = false;
  auto cams = media::extract_frames(clip, policy, opener);
  auto merged = media::merge_side_by_side(cams.road, cams.driver, policy);
  if (cache) cache->store(merged, policy);
  return merged;
}

IngestResult ingest(const media::Manifest& manifest, const media::MergePolicy& policy, const FrameCache& cache,
                    int concurrency, const media::VideoOpener& opener) {
  policy.validate();
  const auto& clips = manifest.clips();
  std::vector<int> outcome(clips.size(), 0);  // 1 extracted, 2 hit, 3 failed
  std::vector<std::string> messages(clips.size());
  parallel_for(clips.size(), concurrency, [&](std::size_t i) {
    try {
      bool hit = false;
      obtain_frames(clips[i], policy, &cache, &hit, opener);
      outcome[i] = hit ? 2 : 1;
    } catch (const Error& e) {
      outcome[i] = 3;
      messages[i] = e.what();
    }
  });
  IngestResult result;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (outcome[i] == 1) ++result.extracted;
    if (outcome[i] == 2) ++result.cache_hits;
    if (outcome[i] == 3) result.failures.emplace_back(clips[i].id, messages[i]);
  }
  return result;
}

}  // namespace dashcoach::harness
