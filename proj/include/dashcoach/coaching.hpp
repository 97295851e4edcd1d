#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dashcoach/catalog.hpp"
#include "dashcoach/error.hpp"
#include "dashcoach/gateway.hpp"

namespace dashcoach::coaching {

enum class Severity { info, warn, critical };

std::string_view to_string(Severity severity);
std::optional<Severity> parse_severity(std::string_view text);

struct CoachingEntry {
  std::string event_label;
  Severity severity = Severity::info;
  std::string driver_guidance;
  std::string manager_guidance;

  bool operator==(const CoachingEntry&) const = default;
};

class CoachingError : public Error {
 public:
  using Error::Error;
};

class CoachingDB {
 public:
  CoachingDB() = default;
  CoachingDB(std::string version, std::vector<CoachingEntry> entries);

  static CoachingDB parse(std::string_view json_text);
  static CoachingDB load(const std::filesystem::path& path);
  static const CoachingDB& builtin();

  const std::string& version() const { return version_; }
  const std::vector<CoachingEntry>& entries() const { return entries_; }
  const CoachingEntry* find(std::string_view event_label) const;

 private:
  std::string version_;
  std::vector<CoachingEntry> entries_;
};

std::string_view builtin_coaching_db_json();

struct DetectedEvent {
  std::string event_label;
  gateway::TranscriptEntry evidence;
};

struct SituationRecord {
  std::string clip_id;
  std::vector<DetectedEvent> detected_events;
  /// categorical template id -> chosen label
  std::map<std::string, std::string> context_labels;
  /// open-question template id -> explanation text
  std::map<std::string, std::string> open_answers;
};

/// Throws CoachingError if the transcript names a template the catalog lacks.
SituationRecord detect_events(const gateway::DialogueTranscript& transcript, const catalog::Catalog& catalog);

struct Alignment {
  /// Critical first, then warn, then info; ties by label.
  std::vector<CoachingEntry> entries;
  /// Detected, but the database has no guidance for them.
  std::vector<std::string> uncoached;
};

Alignment align_with_db(const SituationRecord& record, const CoachingDB& db);

struct ReportEvent {
  std::string event_label;
  Severity severity = Severity::info;
  std::string guidance_excerpt;

  bool operator==(const ReportEvent&) const = default;
};

enum class Composer { templated, llm_composed };

struct CoachingReport {
  std::string clip_id;
  std::string driver_text;
  std::string manager_text;
  std::vector<ReportEvent> events;
  std::vector<std::string> uncoached_events;
  Composer generated_by = Composer::templated;
  std::string db_version;

  bool operator==(const CoachingReport&) const = default;
};

/// Optional LLM pass over the templated notes.
struct LlmComposer {
  const gateway::ModelBackend* backend = nullptr;
  gateway::MediaBundle media;
  gateway::GenerationParams params;
  const parser::NormalizationRuleSet* rules = nullptr;
};

inline constexpr std::string_view kNoEventsPhrase = "No risky events detected";

/// Templated unless `llm` is given and answers; any LLM failure falls back to the template.
CoachingReport compose_report(const SituationRecord& record, const Alignment& alignment, const CoachingDB& db,
                              const LlmComposer* llm = nullptr);

std::string report_to_json(const CoachingReport& report);
std::string report_to_text(const CoachingReport& report);

}  // namespace dashcoach::coaching
