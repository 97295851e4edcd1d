#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dashcoach/catalog.hpp"
#include "dashcoach/error.hpp"

namespace dashcoach::parser {

class ParsedAnswer {
 public:
  enum class Variant { affirmative, negative, choice, explanation, unparseable };

  static ParsedAnswer affirmative() { return ParsedAnswer(Variant::affirmative, {}); }
  static ParsedAnswer negative() { return ParsedAnswer(Variant::negative, {}); }
  static ParsedAnswer choice(std::string label) { return ParsedAnswer(Variant::choice, std::move(label)); }
  static ParsedAnswer explanation(std::string text) { return ParsedAnswer(Variant::explanation, std::move(text)); }
  static ParsedAnswer unparseable(std::string raw) { return ParsedAnswer(Variant::unparseable, std::move(raw)); }

  Variant variant() const { return variant_; }
  bool is(Variant v) const { return variant_ == v; }
  /// Choice label, explanation text, or the raw text that failed to parse.
  const std::string& value() const { return value_; }

  /// "yes", "no", the choice label, "explanation" or "unparseable".
  std::string label() const;

  bool operator==(const ParsedAnswer&) const = default;

 private:
  ParsedAnswer(Variant variant, std::string value) : variant_(variant), value_(std::move(value)) {}

  Variant variant_;
  std::string value_;
};

class RuleError : public Error {
 public:
  using Error::Error;
};

/// Boilerplate stripped from the front of model output before classification.
/// Patterns are case-insensitive ECMAScript regexes anchored at the start of the text.
class NormalizationRuleSet {
 public:
  NormalizationRuleSet(std::vector<std::string> greeting_patterns, std::vector<std::string> role_prefixes,
                       std::string version = "custom");

  static NormalizationRuleSet parse(std::string_view json_text);
  static NormalizationRuleSet load(const std::filesystem::path& path);
  static const NormalizationRuleSet& builtin();

  const std::vector<std::string>& greeting_patterns() const { return greeting_patterns_; }
  const std::vector<std::string>& role_prefixes() const { return role_prefixes_; }
  const std::string& version() const { return version_; }

  /// Length of the leading boilerplate match at the start of `text`, or 0.
  std::size_t leading_greeting(std::string_view text) const;
  std::size_t leading_role_prefix(std::string_view text) const;

 private:
  std::vector<std::string> greeting_patterns_;
  std::vector<std::string> role_prefixes_;
  std::string version_;
  std::shared_ptr<const std::vector<std::regex>> compiled_;
};

std::string_view builtin_rules_json();

/// Strip role prefixes and greeting sentences until none fire; collapse whitespace.
/// Idempotent by construction.
std::string normalize(std::string_view raw, const NormalizationRuleSet& rules);

ParsedAnswer classify_binary(std::string_view text);

/// Case-insensitive whole-word match. Earliest occurrence wins; at the same
/// position the longer label wins, then catalog order.
ParsedAnswer classify_choice(std::string_view text, std::span<const std::string> choices);
/// Same, but aliases declared on the template also resolve to their label.
ParsedAnswer classify_choice(std::string_view text, const catalog::InstructionTemplate& instruction);

ParsedAnswer classify_explanation(std::string_view text);

/// normalize + the classifier matching the template kind.
ParsedAnswer parse_response(std::string_view raw, const catalog::InstructionTemplate& instruction,
                            const NormalizationRuleSet& rules);

/// Gold-file spelling: "yes"/"no" for binary items, a label (or alias) for categorical ones.
std::optional<ParsedAnswer> parse_gold_label(std::string_view text, const catalog::InstructionTemplate& instruction);

}  // namespace dashcoach::parser
