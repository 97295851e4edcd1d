#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dashcoach/metrics.hpp"

namespace dashcoach::metrics {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Whitespace as str.split() sees it, restricted to ASCII.
bool is_split_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r' || (c >= '\x1c' && c <= '\x1f');
}

// Characters the 13a scheme always isolates: { | } ~ [ \ ] ^ _ ` space ! " # $ % & ( ) * + : ; < = > ? @ /
bool is_isolated_symbol(char c) {
  return (c >= '{' && c <= '~') || (c >= '[' && c <= '`') || (c >= ' ' && c <= '&') || (c >= '(' && c <= '+') ||
         (c >= ':' && c <= '@') || c == '/';
}

bool is_period_or_comma(char c) { return c == '.' || c == ','; }

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string rstrip(std::string_view text) {
  while (!text.empty() && is_split_space(text.back())) text.remove_suffix(1);
  return std::string(text);
}

// The four substitution passes below reproduce left-to-right, non-overlapping
// regex replacement exactly; each pass sees the previous pass's output.

std::string isolate_symbols(std::string_view in) {
  std::string out;
  out.reserve(in.size() * 2);
  for (char c : in) {
    if (is_isolated_symbol(c)) {
      out.push_back(' ');
      out.push_back(c);
      out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

// ([^0-9])([\.,]) -> "\1 \2 "
std::string split_punct_after_non_digit(std::string_view in) {
  std::string out;
  out.reserve(in.size() * 2);
  std::size_t i = 0;
  while (i < in.size()) {
    if (i + 1 < in.size() && !is_digit(in[i]) && is_period_or_comma(in[i + 1])) {
      out.push_back(in[i]);
      out.push_back(' ');
      out.push_back(in[i + 1]);
      out.push_back(' ');
      i += 2;
    } else {
      out.push_back(in[i++]);
    }
  }
  return out;
}

// ([\.,])([^0-9]) -> " \1 \2"
std::string split_punct_before_non_digit(std::string_view in) {
  std::string out;
  out.reserve(in.size() * 2);
  std::size_t i = 0;
  while (i < in.size()) {
    if (i + 1 < in.size() && is_period_or_comma(in[i]) && !is_digit(in[i + 1])) {
      out.push_back(' ');
      out.push_back(in[i]);
      out.push_back(' ');
      out.push_back(in[i + 1]);
      i += 2;
    } else {
      out.push_back(in[i++]);
    }
  }
  return out;
}

// ([0-9])(-) -> "\1 \2 "
std::string split_dash_after_digit(std::string_view in) {
  std::string out;
  out.reserve(in.size() * 2);
  std::size_t i = 0;
  while (i < in.size()) {
    if (i + 1 < in.size() && is_digit(in[i]) && in[i + 1] == '-') {
      out.push_back(in[i]);
      out.append(" - ");
      i += 2;
    } else {
      out.push_back(in[i++]);
    }
  }
  return out;
}

using NgramCounts = std::array<std::unordered_map<std::string, std::size_t>, kMaxNgramOrder>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens) {
  NgramCounts counts;
  for (int n = 1; n <= kMaxNgramOrder; ++n) {
    if (tokens.size() < static_cast<std::size_t>(n)) break;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
      std::string key = tokens[i];
      for (int k = 1; k < n; ++k) {
        key.push_back(' ');
        key += tokens[i + static_cast<std::size_t>(k)];
      }
      ++counts[static_cast<std::size_t>(n - 1)][key];
    }
  }
  return counts;
}

// The reference scorer's log: log(0) is a large negative constant, not -inf.
double safe_log(double x) { return x == 0.0 ? -9999999999.0 : std::log(x); }

}  // namespace

std::string tokenize_13a(std::string_view line) {
  std::string text(line);
  replace_all(text, "<skipped>", "");
  replace_all(text, "-\n", "");
  replace_all(text, "\n", " ");
  if (text.find('&') != std::string::npos) {
    replace_all(text, "&quot;", "\"");
    replace_all(text, "&amp;", "&");
    replace_all(text, "&lt;", "<");
    replace_all(text, "&gt;", ">");
  }
  text = " " + text + " ";
  text = isolate_symbols(text);
  text = split_punct_after_non_digit(text);
  text = split_punct_before_non_digit(text);
  text = split_dash_after_digit(text);

  std::string joined;
  for (const auto& token : split_tokens(text)) {
    if (!joined.empty()) joined.push_back(' ');
    joined += token;
  }
  return joined;
}

std::vector<std::string> split_tokens(std::string_view tokenized) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < tokenized.size()) {
    while (i < tokenized.size() && is_split_space(tokenized[i])) ++i;
    std::size_t j = i;
    while (j < tokenized.size() && !is_split_space(tokenized[j])) ++j;
    if (j > i) tokens.emplace_back(tokenized.substr(i, j - i));
    i = j;
  }
  return tokens;
}

BleuResult corpus_bleu(std::span<const std::string> hypotheses, std::span<const std::string> references) {
  if (hypotheses.size() != references.size()) {
    throw MetricError("BLEU needs one reference per hypothesis: got " + std::to_string(hypotheses.size()) +
                      " hypotheses and " + std::to_string(references.size()) + " references");
  }
  if (hypotheses.empty()) throw MetricError("BLEU is undefined on an empty corpus");

  BleuResult result;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = split_tokens(tokenize_13a(rstrip(hypotheses[s])));
    const auto ref = split_tokens(tokenize_13a(rstrip(references[s])));
    result.hyp_len += hyp.size();
    result.ref_len += ref.size();

    const auto hyp_counts = count_ngrams(hyp);
    const auto ref_counts = count_ngrams(ref);
    for (std::size_t n = 0; n < kMaxNgramOrder; ++n) {
      for (const auto& [gram, count] : hyp_counts[n]) {
        result.totals[n] += count;
        if (auto it = ref_counts[n].find(gram); it != ref_counts[n].end()) {
          result.matches[n] += std::min(count, it->second);
        }
      }
    }
  }

  result.brevity_penalty = 1.0;
  if (result.hyp_len < result.ref_len) {
    result.brevity_penalty =
        result.hyp_len > 0
            ? std::exp(1.0 - static_cast<double>(result.ref_len) / static_cast<double>(result.hyp_len))
            : 0.0;
  }

  if (std::ranges::all_of(result.matches, [](std::size_t m) { return m == 0; })) return result;

  // Percent-scale precisions, mirroring the reference arithmetic step for step.
  std::array<double, kMaxNgramOrder> percent{};
  double smooth = 1.0;
  for (std::size_t n = 0; n < kMaxNgramOrder; ++n) {
    if (result.totals[n] == 0) break;
    const auto total = static_cast<double>(result.totals[n]);
    if (result.matches[n] == 0) {
      smooth *= 2.0;
      percent[n] = 100.0 / (smooth * total);
    } else {
      percent[n] = 100.0 * static_cast<double>(result.matches[n]) / total;
    }
  }

  double log_sum = 0.0;
  for (std::size_t n = 0; n < kMaxNgramOrder; ++n) {
    log_sum += safe_log(percent[n]);
    result.precisions[n] = percent[n] / 100.0;
  }
  result.score = result.brevity_penalty * std::exp(log_sum / kMaxNgramOrder);
  return result;
}

}  // namespace dashcoach::metrics
