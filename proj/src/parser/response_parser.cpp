#include "dashcoach/response_parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace dashcoach::parser {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string fold(std::string_view text) {
  std::string out(text);
  std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string_view trim_left(std::string_view text) {
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  return text;
}

// Curly apostrophes show up in model output; fold them so "isn’t" matches "isn't".
std::string plain_apostrophes(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.substr(i, 3) == "\xE2\x80\x99") {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

std::vector<std::string> words_of(std::string_view folded) {
  std::vector<std::string> words;
  std::string current;
  for (char c : folded) {
    if (is_word_char(c) || c == '\'') {
      current.push_back(c);
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

/// Position of the first whole-word occurrence of `needle` in `haystack`.
std::optional<std::size_t> find_whole_word(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return std::nullopt;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const auto end = pos + needle.size();
    const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
    if (left_ok && right_ok) return pos;
  }
  return std::nullopt;
}

constexpr std::array kAffirmativeLead{"yes", "yeah", "yep", "yup", "affirmative", "correct", "true"};
constexpr std::array kNegativeLead{"no", "nope", "negative", "incorrect", "false"};

constexpr std::array kUncertainty{
    "hard to tell",     "hard to say",       "difficult to tell",  "difficult to say",   "difficult to determine",
    "cannot determine", "can't determine",   "cannot tell",        "can't tell",         "cannot be determined",
    "unable to",        "not sure",          "unsure",             "unclear",            "not clear",
    "uncertain",        "i don't know",      "i do not know",      "impossible to",      "no way to",
    "not possible to",  "not enough information", "insufficient", "maybe",              "possibly",
    "perhaps",          "might",             "may or may not",     "can't be sure",      "cannot be sure",
};

constexpr std::array kNegation{"no",      "not",     "never", "none",    "nobody",
                               "nothing", "neither", "nor",   "without", "cannot"};

constexpr std::array kAffirmativeCue{"is",      "are",        "was",     "were",      "did",   "does",
                                     "do",      "has",        "have",    "had",       "can",   "could",
                                     "visible", "present",    "appears", "appear",    "seems", "seem",
                                     "happened", "occurred",  "indeed",  "there",     "yes"};

template <std::size_t N>
bool contains(const std::array<const char*, N>& list, std::string_view word) {
  return std::ranges::any_of(list, [&](const char* entry) { return word == entry; });
}

std::string first_word(std::string_view folded) {
  std::size_t i = 0;
  while (i < folded.size() && !std::isalpha(static_cast<unsigned char>(folded[i]))) ++i;
  std::size_t j = i;
  while (j < folded.size() && std::isalpha(static_cast<unsigned char>(folded[j]))) ++j;
  return std::string(folded.substr(i, j - i));
}

struct Surface {
  std::string folded;
  std::size_t choice_index;
};

ParsedAnswer pick_choice(std::string_view text, std::span<const std::string> choices,
                         const std::vector<Surface>& surfaces) {
  const std::string folded = fold(text);
  // (position, -length, catalog index)
  std::optional<std::tuple<std::size_t, std::ptrdiff_t, std::size_t>> best;
  for (const auto& surface : surfaces) {
    auto pos = find_whole_word(folded, surface.folded);
    if (!pos) continue;
    std::tuple key{*pos, -static_cast<std::ptrdiff_t>(surface.folded.size()), surface.choice_index};
    if (!best || key < *best) best = key;
  }
  if (!best) return ParsedAnswer::unparseable(std::string(text));
  return ParsedAnswer::choice(choices[std::get<2>(*best)]);
}

}  // namespace

std::string ParsedAnswer::label() const {
  switch (variant_) {
    case Variant::affirmative: return "yes";
    case Variant::negative: return "no";
    case Variant::choice: return value_;
    case Variant::explanation: return "explanation";
    case Variant::unparseable: return "unparseable";
  }
  return "unparseable";
}

NormalizationRuleSet::NormalizationRuleSet(std::vector<std::string> greeting_patterns,
                                           std::vector<std::string> role_prefixes, std::string version)
    : greeting_patterns_(std::move(greeting_patterns)),
      role_prefixes_(std::move(role_prefixes)),
      version_(std::move(version)) {
  auto compiled = std::make_shared<std::vector<std::regex>>();
  for (const auto& pattern : greeting_patterns_) {
    try {
      compiled->emplace_back(pattern, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw RuleError("invalid greeting pattern \"" + pattern + "\": " + e.what());
    }
  }
  for (const auto& prefix : role_prefixes_) {
    if (prefix.empty()) throw RuleError("empty role prefix");
  }
  compiled_ = std::move(compiled);
}

NormalizationRuleSet NormalizationRuleSet::parse(std::string_view json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    return NormalizationRuleSet(doc.value("greeting_patterns", std::vector<std::string>{}),
                                doc.value("role_prefixes", std::vector<std::string>{}),
                                doc.value("version", std::string("custom")));
  } catch (const nlohmann::json::exception& e) {
    throw RuleError(std::string("malformed normalization rules: ") + e.what());
  }
}

NormalizationRuleSet NormalizationRuleSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuleError("rules file not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const NormalizationRuleSet& NormalizationRuleSet::builtin() {
  static const NormalizationRuleSet rules = parse(builtin_rules_json());
  return rules;
}

std::size_t NormalizationRuleSet::leading_greeting(std::string_view text) const {
  for (const auto& re : *compiled_) {
    std::match_results<std::string_view::const_iterator> match;
    if (std::regex_search(text.begin(), text.end(), match, re, std::regex_constants::match_continuous) &&
        match.length(0) > 0) {
      return static_cast<std::size_t>(match.length(0));
    }
  }
  return 0;
}

std::size_t NormalizationRuleSet::leading_role_prefix(std::string_view text) const {
  const std::string folded = fold(text.substr(0, 64));
  for (const auto& prefix : role_prefixes_) {
    if (folded.starts_with(fold(prefix))) return prefix.size();
  }
  return 0;
}

std::string normalize(std::string_view raw, const NormalizationRuleSet& rules) {
  std::string text = collapse_whitespace(raw);
  while (true) {
    std::size_t cut = rules.leading_role_prefix(text);
    if (cut == 0) cut = rules.leading_greeting(text);
    if (cut == 0) break;
    text = std::string(trim_left(std::string_view(text).substr(cut)));
  }
  return text;
}

ParsedAnswer classify_binary(std::string_view text) {
  const std::string folded = plain_apostrophes(fold(text));
  const std::string lead = first_word(folded);
  if (contains(kAffirmativeLead, lead)) return ParsedAnswer::affirmative();
  if (contains(kNegativeLead, lead)) return ParsedAnswer::negative();

  if (std::ranges::any_of(kUncertainty, [&](const char* p) { return find_whole_word(folded, p).has_value(); })) {
    return ParsedAnswer::unparseable(std::string(text));
  }

  const auto words = words_of(folded);
  if (std::ranges::any_of(words, [](const std::string& w) { return contains(kNegation, w) || w.ends_with("n't"); })) {
    return ParsedAnswer::negative();
  }
  if (std::ranges::any_of(words, [](const std::string& w) { return contains(kAffirmativeCue, w); })) {
    return ParsedAnswer::affirmative();
  }
  return ParsedAnswer::unparseable(std::string(text));
}

ParsedAnswer classify_choice(std::string_view text, std::span<const std::string> choices) {
  std::vector<Surface> surfaces;
  for (std::size_t i = 0; i < choices.size(); ++i) surfaces.push_back({fold(choices[i]), i});
  return pick_choice(text, choices, surfaces);
}

ParsedAnswer classify_choice(std::string_view text, const catalog::InstructionTemplate& instruction) {
  std::vector<Surface> surfaces;
  const auto& choices = instruction.choices;
  for (std::size_t i = 0; i < choices.size(); ++i) surfaces.push_back({fold(choices[i]), i});
  for (const auto& [alias, label] : instruction.aliases) {
    const auto index = static_cast<std::size_t>(std::ranges::find(choices, label) - choices.begin());
    if (index < choices.size()) surfaces.push_back({alias, index});
  }
  return pick_choice(text, choices, surfaces);
}

ParsedAnswer classify_explanation(std::string_view text) {
  if (text.empty()) return ParsedAnswer::unparseable(std::string(text));
  return ParsedAnswer::explanation(std::string(text));
}

ParsedAnswer parse_response(std::string_view raw, const catalog::InstructionTemplate& instruction,
                            const NormalizationRuleSet& rules) {
  const std::string text = normalize(raw, rules);
  ParsedAnswer parsed = ParsedAnswer::unparseable(std::string(raw));
  switch (instruction.kind) {
    case catalog::TemplateKind::binary: parsed = classify_binary(text); break;
    case catalog::TemplateKind::categorical: parsed = classify_choice(text, instruction); break;
    case catalog::TemplateKind::open: parsed = classify_explanation(text); break;
  }
  if (parsed.is(ParsedAnswer::Variant::unparseable)) return ParsedAnswer::unparseable(std::string(raw));
  return parsed;
}

std::optional<ParsedAnswer> parse_gold_label(std::string_view text, const catalog::InstructionTemplate& instruction) {
  const std::string folded = fold(text);
  switch (instruction.kind) {
    case catalog::TemplateKind::binary:
      if (folded == "yes" || folded == "affirmative") return ParsedAnswer::affirmative();
      if (folded == "no" || folded == "negative") return ParsedAnswer::negative();
      return std::nullopt;
    case catalog::TemplateKind::categorical:
      if (auto label = instruction.canonical_choice(text)) return ParsedAnswer::choice(*label);
      return std::nullopt;
    case catalog::TemplateKind::open: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace dashcoach::parser
