#include "dashcoach/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dashcoach::catalog {

using nlohmann::json;

namespace {

std::string fold(std::string_view text) {
  std::string out(text);
  std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<TemplateKind> parse_kind(std::string_view text) {
  if (text == "binary") return TemplateKind::binary;
  if (text == "categorical") return TemplateKind::categorical;
  if (text == "open") return TemplateKind::open;
  return std::nullopt;
}

InstructionTemplate parse_template(const json& entry, std::size_t index) {
  const std::string where = "templates[" + std::to_string(index) + "]";
  if (!entry.is_object()) throw CatalogError(where + ": expected an object");

  InstructionTemplate t;
  try {
    t.id = entry.at("id").get<std::string>();
    const auto kind = entry.at("kind").get<std::string>();
    auto parsed = parse_kind(kind);
    if (!parsed) throw CatalogError(where + ": unknown kind \"" + kind + "\"");
    t.kind = *parsed;
    t.text = entry.at("text").get<std::string>();
    if (entry.contains("choices")) t.choices = entry["choices"].get<std::vector<std::string>>();
    if (entry.contains("aliases")) {
      for (const auto& [alias, label] : entry["aliases"].items()) t.aliases[fold(alias)] = label.get<std::string>();
    }
    if (entry.contains("followups")) {
      for (const auto& rule : entry["followups"]) t.followups.push_back({rule.at("target").get<std::string>()});
    }
    if (entry.contains("event")) t.event = entry["event"].get<std::string>();
    t.free_text = entry.value("free_text", false);
  } catch (const json::exception& e) {
    throw CatalogError(where + ": " + e.what());
  }
  if (t.id.empty()) throw CatalogError(where + ": empty id");
  return t;
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::binary: return "binary";
    case TemplateKind::categorical: return "categorical";
    case TemplateKind::open: return "open";
  }
  return "binary";
}

std::optional<std::string> InstructionTemplate::canonical_choice(std::string_view label) const {
  const auto folded = fold(label);
  for (const auto& choice : choices) {
    if (fold(choice) == folded) return choice;
  }
  if (auto it = aliases.find(folded); it != aliases.end()) return it->second;
  return std::nullopt;
}

Catalog::Catalog(std::string version, std::vector<InstructionTemplate> templates)
    : version_(std::move(version)), templates_(std::move(templates)) {
  std::set<std::string, std::less<>> ids;
  for (const auto& t : templates_) {
    if (!ids.insert(t.id).second) throw CatalogError("duplicate template id \"" + t.id + "\"");
  }

  for (auto& t : templates_) {
    if (t.kind == TemplateKind::categorical) {
      std::set<std::string> distinct;
      for (const auto& c : t.choices) distinct.insert(fold(c));
      if (distinct.size() < 2 || distinct.size() != t.choices.size()) {
        throw CatalogError("categorical template \"" + t.id + "\" needs at least 2 distinct choices");
      }
      for (const auto& [alias, label] : t.aliases) {
        if (std::ranges::find(t.choices, label) == t.choices.end()) {
          throw CatalogError("alias \"" + alias + "\" of \"" + t.id + "\" maps to unknown choice \"" + label + "\"");
        }
      }
    } else if (!t.choices.empty() || !t.aliases.empty()) {
      throw CatalogError("template \"" + t.id + "\" is not categorical but lists choices");
    }
    if (!t.followups.empty() && t.kind != TemplateKind::binary) {
      throw CatalogError("template \"" + t.id + "\" has follow-ups but is not a yes/no item");
    }
    if (t.event && t.kind != TemplateKind::binary) {
      throw CatalogError("template \"" + t.id + "\" raises an event but is not a yes/no item");
    }
  }

  for (const auto& t : templates_) {
    for (const auto& rule : t.followups) {
      auto it = std::ranges::find(templates_, rule.target, &InstructionTemplate::id);
      if (it == templates_.end()) {
        throw CatalogError("follow-up of \"" + t.id + "\" references unknown template \"" + rule.target + "\"");
      }
      if (it->kind == TemplateKind::categorical) {
        throw CatalogError("follow-up target \"" + rule.target + "\" must be a yes/no or open item");
      }
      if (!it->followups.empty()) {
        throw CatalogError("follow-up target \"" + rule.target + "\" cannot have follow-ups of its own");
      }
      if (it->parent && *it->parent != t.id) {
        throw CatalogError("template \"" + rule.target + "\" is a follow-up of both \"" + *it->parent +
                           "\" and \"" + t.id + "\"");
      }
      it->parent = t.id;
    }
  }
}

Catalog Catalog::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw CatalogError(std::string("catalog parse error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("templates") || !doc["templates"].is_array()) {
    throw CatalogError("catalog needs a \"templates\" array");
  }
  std::vector<InstructionTemplate> templates;
  for (std::size_t i = 0; i < doc["templates"].size(); ++i) {
    templates.push_back(parse_template(doc["templates"][i], i));
  }
  return Catalog(doc.value("version", std::string("unversioned")), std::move(templates));
}

Catalog Catalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError("catalog not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const Catalog& Catalog::builtin() {
  static const Catalog catalog = parse(builtin_catalog_json());
  return catalog;
}

const InstructionTemplate* Catalog::find(std::string_view id) const {
  auto it = std::ranges::find(templates_, id, &InstructionTemplate::id);
  return it == templates_.end() ? nullptr : &*it;
}

const InstructionTemplate& Catalog::at(std::string_view id) const {
  if (const auto* t = find(id)) return *t;
  throw CatalogError("unknown template id \"" + std::string(id) + "\"");
}

std::size_t Catalog::event_recognition_count() const {
  return static_cast<std::size_t>(std::ranges::count_if(templates_, &InstructionTemplate::is_event_recognition));
}

std::size_t Catalog::open_question_count() const { return templates_.size() - event_recognition_count(); }

std::string Catalog::to_json() const {
  json templates = json::array();
  for (const auto& t : templates_) {
    json entry{{"id", t.id}, {"kind", std::string(to_string(t.kind))}, {"text", t.text}};
    if (!t.choices.empty()) entry["choices"] = t.choices;
    if (!t.aliases.empty()) entry["aliases"] = t.aliases;
    if (!t.followups.empty()) {
      json rules = json::array();
      for (const auto& rule : t.followups) rules.push_back({{"target", rule.target}});
      entry["followups"] = rules;
    }
    if (t.event) entry["event"] = *t.event;
    if (t.free_text) entry["free_text"] = true;
    templates.push_back(std::move(entry));
  }
  return json{{"version", version_}, {"templates", templates}}.dump(2) + "\n";
}

std::vector<InstructionInstance> expand_for_clip(const Catalog& catalog, std::string_view clip_id,
                                                 ExpansionMode mode) {
  std::vector<InstructionInstance> out;
  auto emit = [&](const InstructionTemplate& t, std::optional<int> parent_turn) {
    InstructionInstance instance;
    instance.clip_id = std::string(clip_id);
    instance.template_id = t.id;
    instance.turn_index = static_cast<int>(out.size());
    instance.parent_turn = parent_turn;
    instance.conditional = parent_turn.has_value() && mode == ExpansionMode::conditional;
    out.push_back(std::move(instance));
    return out.back().turn_index;
  };

  for (const auto& t : catalog.templates()) {
    if (t.parent) continue;
    const int parent_turn = emit(t, std::nullopt);
    for (const auto& rule : t.followups) emit(catalog.at(rule.target), parent_turn);
  }
  return out;
}

}  // namespace dashcoach::catalog
