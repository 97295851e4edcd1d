#include "dashcoach/coaching.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dashcoach::coaching {

using nlohmann::json;
using parser::ParsedAnswer;

std::string_view to_string(Severity severity) {
  switch (severity) {
    case Severity::info: return "info";
    case Severity::warn: return "warn";
    case Severity::critical: return "critical";
  }
  return "info";
}

std::optional<Severity> parse_severity(std::string_view text) {
  if (text == "info") return Severity::info;
  if (text == "warn") return Severity::warn;
  if (text == "critical") return Severity::critical;
  return std::nullopt;
}

CoachingDB::CoachingDB(std::string version, std::vector<CoachingEntry> entries)
    : version_(std::move(version)), entries_(std::move(entries)) {
  std::set<std::string, std::less<>> labels;
  for (const auto& entry : entries_) {
    if (entry.event_label.empty()) throw CoachingError("coaching entry with empty event_label");
    if (!labels.insert(entry.event_label).second) {
      throw CoachingError("duplicate coaching entry for \"" + entry.event_label + "\"");
    }
    if (entry.driver_guidance.empty() || entry.manager_guidance.empty()) {
      throw CoachingError("coaching entry \"" + entry.event_label + "\" has empty guidance");
    }
  }
}

CoachingDB CoachingDB::parse(std::string_view json_text) {
  std::vector<CoachingEntry> entries;
  std::string version;
  try {
    const auto doc = json::parse(json_text);
    version = doc.value("version", std::string("unversioned"));
    for (const auto& e : doc.at("entries")) {
      CoachingEntry entry;
      entry.event_label = e.at("event_label").get<std::string>();
      const auto severity = e.at("severity").get<std::string>();
      auto parsed = parse_severity(severity);
      if (!parsed) throw CoachingError("unknown severity \"" + severity + "\" for \"" + entry.event_label + "\"");
      entry.severity = *parsed;
      entry.driver_guidance = e.at("driver_guidance").get<std::string>();
      entry.manager_guidance = e.at("manager_guidance").get<std::string>();
      entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw CoachingError(std::string("malformed coaching database: ") + e.what());
  }
  return CoachingDB(std::move(version), std::move(entries));
}

CoachingDB CoachingDB::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CoachingError("coaching database not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const CoachingDB& CoachingDB::builtin() {
  static const CoachingDB db = parse(builtin_coaching_db_json());
  return db;
}

const CoachingEntry* CoachingDB::find(std::string_view event_label) const {
  auto it = std::ranges::find(entries_, event_label, &CoachingEntry::event_label);
  return it == entries_.end() ? nullptr : &*it;
}

SituationRecord detect_events(const gateway::DialogueTranscript& transcript, const catalog::Catalog& catalog) {
  SituationRecord record;
  record.clip_id = transcript.clip_id;
  for (const auto& entry : transcript.entries) {
    const auto* instruction = catalog.find(entry.instance.template_id);
    if (!instruction) {
      throw CoachingError("transcript names template \"" + entry.instance.template_id +
                          "\" which is not in catalog " + catalog.version());
    }
    const auto& parsed = entry.parsed;
    switch (parsed.variant()) {
      case ParsedAnswer::Variant::affirmative:
        if (instruction->event &&
            std::ranges::none_of(record.detected_events,
                                 [&](const DetectedEvent& d) { return d.event_label == *instruction->event; })) {
          record.detected_events.push_back({*instruction->event, entry});
        }
        break;
      case ParsedAnswer::Variant::choice: record.context_labels.emplace(instruction->id, parsed.value()); break;
      case ParsedAnswer::Variant::explanation: record.open_answers.emplace(instruction->id, parsed.value()); break;
      case ParsedAnswer::Variant::negative:
      case ParsedAnswer::Variant::unparseable: break;
    }
  }
  return record;
}

Alignment align_with_db(const SituationRecord& record, const CoachingDB& db) {
  Alignment out;
  for (const auto& event : record.detected_events) {
    if (const auto* entry = db.find(event.event_label)) {
      out.entries.push_back(*entry);
    } else {
      out.uncoached.push_back(event.event_label);
    }
  }
  std::ranges::sort(out.entries, [](const CoachingEntry& a, const CoachingEntry& b) {
    if (a.severity != b.severity) return a.severity > b.severity;
    return a.event_label < b.event_label;
  });
  std::ranges::sort(out.uncoached);
  return out;
}

namespace {

std::string upper(std::string_view text) {
  std::string out(text);
  std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string conditions_line(const SituationRecord& record) {
  if (record.context_labels.empty()) return {};
  std::string line = "Conditions:";
  bool first = true;
  for (const auto& [id, label] : record.context_labels) {
    line += (first ? " " : ", ") + id + " " + label;
    first = false;
  }
  return line + ".\n";
}

const DetectedEvent* evidence_for(const SituationRecord& record, std::string_view label) {
  auto it = std::ranges::find(record.detected_events, label, &DetectedEvent::event_label);
  return it == record.detected_events.end() ? nullptr : &*it;
}

std::string templated_driver_text(const SituationRecord& record, const Alignment& alignment) {
  std::ostringstream out;
  out << "Coaching notes for clip " << record.clip_id << "\n";
  out << conditions_line(record);
  if (alignment.entries.empty() && alignment.uncoached.empty()) {
    out << kNoEventsPhrase << " in this clip. Keep up the safe driving.\n";
  } else {
    out << "Things to work on:\n";
    for (const auto& entry : alignment.entries) {
      out << "- " << entry.event_label << ": " << entry.driver_guidance << "\n";
    }
    for (const auto& label : alignment.uncoached) out << "- " << label << ": talk this one through with your manager.\n";
  }
  if (auto it = record.open_answers.find("recommended_action"); it != record.open_answers.end()) {
    out << "Suggested next time: " << it->second << "\n";
  }
  return out.str();
}

std::string templated_manager_text(const SituationRecord& record, const Alignment& alignment) {
  std::ostringstream out;
  out << "Manager summary for clip " << record.clip_id << "\n";
  out << conditions_line(record);
  if (alignment.entries.empty() && alignment.uncoached.empty()) {
    out << kNoEventsPhrase << ". No coaching action required.\n";
  } else {
    for (const auto& entry : alignment.entries) {
      out << "- [" << upper(to_string(entry.severity)) << "] " << entry.event_label << ": " << entry.manager_guidance;
      if (const auto* ev = evidence_for(record, entry.event_label)) {
        out << " Evidence: turn " << ev->evidence.instance.turn_index << " (" << ev->evidence.instance.template_id
            << ") answered \"" << ev->evidence.raw_response << "\".";
      }
      out << "\n";
    }
    for (const auto& label : alignment.uncoached) {
      out << "- [UNCOACHED] " << label << ": detected, but the coaching database has no entry for it.\n";
    }
  }
  for (const auto& [id, text] : record.open_answers) out << "Model notes (" << id << "): " << text << "\n";
  return out.str();
}

std::string evidence_block(const SituationRecord& record) {
  std::ostringstream out;
  for (const auto& event : record.detected_events) {
    out << "- " << event.event_label << ": " << event.evidence.instance.template_id << " -> \""
        << event.evidence.raw_response << "\"\n";
  }
  for (const auto& [id, text] : record.open_answers) out << "- " << id << ": " << text << "\n";
  return out.str();
}

std::optional<std::string> ask_llm(const LlmComposer& llm, const std::string& prompt) {
  gateway::InferenceRequest request;
  request.media = llm.media.media;
  request.audio = llm.media.audio;
  request.params = llm.params;
  request.turns.push_back({gateway::ChatTurn::Role::user, prompt});
  try {
    request.validate(llm.media.expected_frames);
    std::string text = llm.backend->infer(request);
    if (llm.rules) text = parser::normalize(text, *llm.rules);
    if (text.empty()) return std::nullopt;
    return text;
  } catch (const gateway::GatewayError&) {
    return std::nullopt;
  }
}

}  // namespace

CoachingReport compose_report(const SituationRecord& record, const Alignment& alignment, const CoachingDB& db,
                              const LlmComposer* llm) {
  CoachingReport report;
  report.clip_id = record.clip_id;
  report.db_version = db.version();
  report.uncoached_events = alignment.uncoached;
  for (const auto& entry : alignment.entries) {
    report.events.push_back({entry.event_label, entry.severity, entry.driver_guidance});
  }
  report.driver_text = templated_driver_text(record, alignment);
  report.manager_text = templated_manager_text(record, alignment);

  if (llm && llm->backend) {
    const std::string evidence = evidence_block(record);
    auto driver = ask_llm(*llm,
                          "You are a fleet safety coach. Rewrite these coaching notes as a short, supportive message "
                          "to the driver. Keep every listed event and do not add new ones.\n\n" +
                              report.driver_text + "\nEvidence:\n" + evidence);
    auto manager = ask_llm(*llm,
                           "You are a fleet safety coach. Rewrite these notes as a concise briefing for the driver's "
                           "manager, with the evidence for each event. Do not add events.\n\n" +
                               report.manager_text + "\nEvidence:\n" + evidence);
    if (driver && manager) {
      report.driver_text = *driver + "\n";
      report.manager_text = *manager + "\n";
      report.generated_by = Composer::llm_composed;
    }
  }
  return report;
}

std::string report_to_json(const CoachingReport& report) {
  json events = json::array();
  for (const auto& e : report.events) {
    events.push_back({{"event_label", e.event_label},
                      {"severity", std::string(to_string(e.severity))},
                      {"guidance", e.guidance_excerpt}});
  }
  json doc{{"clip_id", report.clip_id},
           {"generated_by", report.generated_by == Composer::templated ? "templated" : "llm_composed"},
           {"db_version", report.db_version},
           {"events", events},
           {"uncoached_events", report.uncoached_events},
           {"driver_text", report.driver_text},
           {"manager_text", report.manager_text}};
  return doc.dump(2) + "\n";
}

std::string report_to_text(const CoachingReport& report) {
  std::ostringstream out;
  out << "=== Driver ===\n" << report.driver_text << "\n=== Manager ===\n" << report.manager_text;
  return out.str();
}

}  // namespace dashcoach::coaching
