#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dashcoach/catalog.hpp"
#include "dashcoach/coaching.hpp"
#include "dashcoach/error.hpp"
#include "dashcoach/gateway.hpp"
#include "dashcoach/media.hpp"
#include "dashcoach/metrics.hpp"
#include "dashcoach/response_parser.hpp"

namespace dashcoach::harness {

/// Fatal configuration or data problem; the CLI exits 1.
class HarnessError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Gold records (JSON lines)

struct GoldRecord {
  std::string clip_id;
  std::map<std::string, parser::ParsedAnswer> er_gold;
  std::map<std::string, std::string> oq_gold;
};

using GoldSet = std::map<std::string, GoldRecord, std::less<>>;

GoldSet parse_gold(std::string_view jsonl, const catalog::Catalog& catalog);
GoldSet load_gold(const std::filesystem::path& path, const catalog::Catalog& catalog);

/// Every test clip needs a record covering all scored ER items and every OQ item.
void check_gold_coverage(const GoldSet& gold, const media::Manifest& manifest, const catalog::Catalog& catalog);

// ---------------------------------------------------------------------------
// Frame cache

/// Directory of merged frame sets keyed by sha256(clip id, policy).
class FrameCache {
 public:
  explicit FrameCache(std::filesystem::path root);

  static std::string key(std::string_view clip_id, const media::MergePolicy& policy);
  std::filesystem::path entry_dir(std::string_view clip_id, const media::MergePolicy& policy) const;

  std::optional<media::MergedFrameSet> load(std::string_view clip_id, const media::MergePolicy& policy) const;
  void store(const media::MergedFrameSet& frames, const media::MergePolicy& policy) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

/// Extract + merge, or reuse a cached set. `cache_hit` reports which.
media::MergedFrameSet obtain_frames(const media::ClipPair& clip, const media::MergePolicy& policy,
                                    const FrameCache* cache, bool* cache_hit = nullptr,
                                    const media::VideoOpener& opener = media::open_video);

struct IngestResult {
  std::size_t extracted = 0;
  std::size_t cache_hits = 0;
  /// (clip id, message)
  std::vector<std::pair<std::string, std::string>> failures;
};

IngestResult ingest(const media::Manifest& manifest, const media::MergePolicy& policy, const FrameCache& cache,
                    int concurrency = 4, const media::VideoOpener& opener = media::open_video);

/// Runs fn(0..count-1) on at most `workers` threads. The first exception is rethrown.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Evaluation

struct ItemRecord {
  std::string model;
  std::string clip_id;
  int turn_index = 0;
  std::string template_id;
  bool open_question = false;
  std::string gold;
  std::string predicted;
  std::optional<bool> is_true_event;   // ER only
  std::optional<double> bleu;          // OQ only, sentence level
  std::optional<metrics::BertScoreResult> bertscore;  // OQ only
  std::optional<std::string> error;
};

struct ModelSummary {
  std::string name;
  metrics::ARResult ar;
  metrics::BleuResult bleu;
  metrics::BertScoreResult bertscore;
  std::size_t er_items = 0;
  std::size_t oq_items = 0;
  std::size_t failures = 0;
};

struct EvalReport {
  std::string catalog_version;
  std::string rules_version;
  std::int64_t seed = 0;
  std::string policy;
  std::size_t clip_count = 0;
  std::vector<ModelSummary> models;  ///< ordered by name
  std::vector<ItemRecord> items;     ///< ordered by (model, clip_id, turn_index)

  std::size_t failure_count() const;
};

struct NamedBackend {
  std::string name;
  const gateway::ModelBackend* backend = nullptr;
};

struct EvaluationInputs {
  const media::Manifest* manifest = nullptr;
  const catalog::Catalog* catalog = nullptr;
  const parser::NormalizationRuleSet* rules = nullptr;
  const GoldSet* gold = nullptr;
  std::vector<NamedBackend> models;
  /// Embeds OQ hypotheses and references for BERTScore.
  const gateway::ModelBackend* embedder = nullptr;
  media::MergePolicy policy;
  const FrameCache* cache = nullptr;
  int concurrency = 4;
  bool include_history = true;
  /// When false, Unparseable ER answers are left out of AR instead of counting as false events.
  bool unparseable_is_false = true;
  gateway::GenerationParams params;
  media::VideoOpener opener = media::open_video;
};

EvalReport run_evaluation(const EvaluationInputs& inputs);

std::string report_to_json(const EvalReport& report);
std::string items_to_csv(const EvalReport& report);
std::string report_tables(const EvalReport& report);

/// AR per model recomputed from the per-item records of a report.json.
std::map<std::string, metrics::ARResult> recompute_ar(std::string_view report_json);

// ---------------------------------------------------------------------------
// Commands

struct Endpoint {
  std::string name;
  std::string url;
};

/// "NAME=URL"; a bare URL gets the name "model".
Endpoint parse_endpoint(std::string_view spec);

struct EvaluateConfig {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> catalog;
  std::optional<std::filesystem::path> rules;
  std::filesystem::path gold;
  std::vector<Endpoint> endpoints;
  std::optional<std::string> embed_endpoint;
  std::filesystem::path out_dir;
  std::int64_t seed = 42;
  media::MergePolicy policy;
  std::optional<std::filesystem::path> cache_dir;
  int concurrency = 4;
  bool include_history = true;
  bool unparseable_is_false = true;
  gateway::RetryPolicy retry;
};

/// Writes report.json, items.csv, tables.txt and run_info.json. Returns the exit code (0 or 2).
int cmd_evaluate(const EvaluateConfig& config);

struct IngestConfig {
  std::filesystem::path manifest;
  media::MergePolicy policy;
  std::filesystem::path cache_dir;
  int concurrency = 4;
};

int cmd_ingest(const IngestConfig& config, IngestResult* result = nullptr);

struct CoachConfig {
  std::filesystem::path manifest;
  std::string clip_id;
  std::optional<std::filesystem::path> db;
  std::optional<std::filesystem::path> catalog;
  std::optional<std::filesystem::path> rules;
  std::string endpoint;
  bool llm_compose = false;
  std::filesystem::path out_dir;
  std::int64_t seed = 42;
  media::MergePolicy policy;
  std::optional<std::filesystem::path> cache_dir;
  gateway::RetryPolicy retry;
};

struct CoachOutcome {
  gateway::DialogueTranscript transcript;
  coaching::SituationRecord record;
  coaching::CoachingReport report;
};

CoachOutcome coach_clip(const gateway::ModelBackend& backend, const catalog::Catalog& catalog,
                        const parser::NormalizationRuleSet& rules, const coaching::CoachingDB& db,
                        const media::MergedFrameSet& frames, std::string_view clip_id,
                        const gateway::GenerationParams& params, bool llm_compose,
                        const std::optional<std::filesystem::path>& audio = {});

/// Writes <clip>.coaching.json and <clip>.coaching.txt. Returns the exit code.
int cmd_coach(const CoachConfig& config);

}  // namespace dashcoach::harness
