#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dashcoach/error.hpp"
#include "dashcoach/response_parser.hpp"

namespace dashcoach::metrics {

class MetricError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Accuracy rate over event-recognition items.

struct ERJudgement {
  std::string clip_id;
  std::string template_id;
  parser::ParsedAnswer gold = parser::ParsedAnswer::unparseable({});
  parser::ParsedAnswer predicted = parser::ParsedAnswer::unparseable({});
  bool is_true_event = false;
};

/// True iff the prediction has the gold variant and label. Unparseable never matches.
bool matches_gold(const parser::ParsedAnswer& gold, const parser::ParsedAnswer& predicted);
ERJudgement judge(std::string clip_id, std::string template_id, parser::ParsedAnswer gold,
                  parser::ParsedAnswer predicted);

struct ARResult {
  std::size_t true_events = 0;
  std::size_t false_events = 0;
  double ar = 0.0;
};

/// AR = T / (T + F). Throws MetricError on empty input.
ARResult accuracy_rate(std::span<const ERJudgement> judgements);
ARResult accuracy_rate(std::size_t true_events, std::size_t false_events);

// ---------------------------------------------------------------------------
// Corpus BLEU with 13a tokenization and exponential smoothing, matching the
// reference scorer's defaults (case-sensitive, 4-grams, single reference).

inline constexpr int kMaxNgramOrder = 4;

struct BleuResult {
  double score = 0.0;  ///< 0..100
  std::array<double, kMaxNgramOrder> precisions{};  ///< 0..1, smoothed where the raw count was 0
  std::array<std::size_t, kMaxNgramOrder> matches{};
  std::array<std::size_t, kMaxNgramOrder> totals{};
  double brevity_penalty = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

std::string tokenize_13a(std::string_view line);
std::vector<std::string> split_tokens(std::string_view tokenized);

BleuResult corpus_bleu(std::span<const std::string> hypotheses, std::span<const std::string> references);

// ---------------------------------------------------------------------------
// BERTScore: greedy max-cosine matching, no idf weighting, no baseline rescale.

class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// `rows` must all have the same length. When `unit_norm` is set every row
  /// must have L2 norm 1 +- 1e-6.
  EmbeddingMatrix(std::vector<std::string> tokens, std::vector<std::vector<double>> rows, bool unit_norm = false);

  std::size_t rows() const { return tokens_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return tokens_.empty(); }
  bool unit_norm() const { return unit_norm_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

  /// Copy with every row scaled to unit length (zero rows are left as is).
  EmbeddingMatrix normalized() const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::vector<std::string> tokens_;
  std::vector<double> values_;
  std::size_t dim_ = 0;
  bool unit_norm_ = false;
};

struct BertScoreResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

double cosine(std::span<const double> a, std::span<const double> b);

BertScoreResult bert_score(const EmbeddingMatrix& hyp, const EmbeddingMatrix& ref);

/// Unweighted mean of per-pair precision, recall and F1.
BertScoreResult corpus_bert_score(std::span<const std::pair<EmbeddingMatrix, EmbeddingMatrix>> pairs);
BertScoreResult mean_bert_score(std::span<const BertScoreResult> per_pair);

}  // namespace dashcoach::metrics
