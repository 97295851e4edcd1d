#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dashcoach/error.hpp"

namespace dashcoach::catalog {

enum class TemplateKind { binary, categorical, open };

std::string_view to_string(TemplateKind kind);

/// Ask `target` only after the parent was answered affirmatively.
struct FollowUpRule {
  std::string target;

  bool operator==(const FollowUpRule&) const = default;
};

struct InstructionTemplate {
  std::string id;
  TemplateKind kind = TemplateKind::binary;
  std::string text;
  /// Canonical labels, in catalog order. Empty unless categorical.
  std::vector<std::string> choices;
  /// Case-folded alternate spelling -> canonical label.
  std::map<std::string, std::string> aliases;
  std::vector<FollowUpRule> followups;
  /// Set on follow-up templates: the template whose answer gates this one.
  std::optional<std::string> parent;
  /// Event label raised when this binary item is answered affirmatively.
  std::optional<std::string> event;
  /// Binary items whose answer is really prose ("Why ...?"): asked, but left out of AR.
  bool free_text = false;

  bool is_event_recognition() const { return kind != TemplateKind::open; }
  bool is_scored_er() const { return is_event_recognition() && !free_text; }

  /// Canonical label for a case-insensitive label or alias, if any.
  std::optional<std::string> canonical_choice(std::string_view label) const;

  bool operator==(const InstructionTemplate&) const = default;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

class Catalog {
 public:
  Catalog() = default;
  /// Validates referential integrity; throws CatalogError.
  Catalog(std::string version, std::vector<InstructionTemplate> templates);

  static Catalog parse(std::string_view json_text);
  static Catalog load(const std::filesystem::path& path);
  /// The built-in instruction set compiled into the binary.
  static const Catalog& builtin();

  const std::string& version() const { return version_; }
  std::span<const InstructionTemplate> templates() const { return templates_; }
  const InstructionTemplate* find(std::string_view id) const;
  const InstructionTemplate& at(std::string_view id) const;

  std::size_t event_recognition_count() const;
  std::size_t open_question_count() const;

  std::string to_json() const;

 private:
  std::string version_;
  std::vector<InstructionTemplate> templates_;
};

/// Raw text of the built-in catalog, as exported by the CLI.
std::string_view builtin_catalog_json();

enum class ExpansionMode { exhaustive, conditional };

struct InstructionInstance {
  std::string clip_id;
  std::string template_id;
  int turn_index = 0;
  /// Position of the gating parent within the same expansion.
  std::optional<int> parent_turn;
  /// Conditional-mode follow-up that is only asked if the parent is affirmative.
  bool conditional = false;

  bool operator==(const InstructionInstance&) const = default;
};

/// Catalog order, each follow-up immediately after its parent.
std::vector<InstructionInstance> expand_for_clip(const Catalog& catalog, std::string_view clip_id,
                                                 ExpansionMode mode);

}  // namespace dashcoach::catalog
