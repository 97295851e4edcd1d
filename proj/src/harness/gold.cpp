#include <fstream>
#include <sstream>

#include "dashcoach/harness.hpp"
#include "json.hpp"

namespace dashcoach::harness {

using nlohmann::json;

GoldSet parse_gold(std::string_view jsonl, const catalog::Catalog& catalog) {
  GoldSet out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "gold line " + std::to_string(line_no);
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw HarnessError(where + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("clip_id") || !doc["clip_id"].is_string()) {
      throw HarnessError(where + ": missing string field \"clip_id\"");
    }
    GoldRecord record;
    record.clip_id = doc["clip_id"].get<std::string>();
    const std::string who = where + " (clip \"" + record.clip_id + "\")";

    if (doc.contains("er")) {
      if (!doc["er"].is_object()) throw HarnessError(who + ": \"er\" must be an object");
      for (const auto& [id, value] : doc["er"].items()) {
        const auto* instruction = catalog.find(id);
        if (!instruction || !instruction->is_event_recognition()) {
          throw HarnessError(who + ": \"" + id + "\" is not an event-recognition template");
        }
        if (!value.is_string()) throw HarnessError(who + ": gold for \"" + id + "\" must be a string");
        auto parsed = parser::parse_gold_label(value.get<std::string>(), *instruction);
        if (!parsed) {
          throw HarnessError(who + ": \"" + value.get<std::string>() + "\" is not a valid answer to \"" + id + "\"");
        }
        record.er_gold.emplace(id, std::move(*parsed));
      }
    }
    if (doc.contains("oq")) {
      if (!doc["oq"].is_object()) throw HarnessError(who + ": \"oq\" must be an object");
      for (const auto& [id, value] : doc["oq"].items()) {
        const auto* instruction = catalog.find(id);
        if (!instruction || instruction->kind != catalog::TemplateKind::open) {
          throw HarnessError(who + ": \"" + id + "\" is not an open-question template");
        }
        if (!value.is_string() || value.get<std::string>().empty()) {
          throw HarnessError(who + ": reference for \"" + id + "\" must be a non-empty string");
        }
        record.oq_gold.emplace(id, value.get<std::string>());
      }
    }
    const std::string key = record.clip_id;
    if (!out.emplace(key, std::move(record)).second) throw HarnessError(who + ": duplicate gold record");
  }
  return out;
}

GoldSet load_gold(const std::filesystem::path& path, const catalog::Catalog& catalog) {
  std::ifstream in(path);
  if (!in) throw HarnessError("gold file not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_gold(buffer.str(), catalog);
}

void check_gold_coverage(const GoldSet& gold, const media::Manifest& manifest, const catalog::Catalog& catalog) {
  for (const auto* clip : manifest.in_split(media::Split::test)) {
    auto it = gold.find(clip->gold_key());
    if (it == gold.end()) throw HarnessError("no gold record for test clip \"" + clip->id + "\"");
    for (const auto& t : catalog.templates()) {
      if (t.is_scored_er() && !it->second.er_gold.contains(t.id)) {
        throw HarnessError("gold for clip \"" + clip->id + "\" lacks event-recognition item \"" + t.id + "\"");
      }
      if (t.kind == catalog::TemplateKind::open && !it->second.oq_gold.contains(t.id)) {
        throw HarnessError("gold for clip \"" + clip->id + "\" lacks open question \"" + t.id + "\"");
      }
    }
  }
}

}  // namespace dashcoach::harness
