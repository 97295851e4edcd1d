#include <algorithm>
#include <cmath>
#include <limits>

#include "dashcoach/metrics.hpp"

namespace dashcoach::metrics {

namespace {

constexpr double kUnitNormTolerance = 1e-6;

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> tokens, std::vector<std::vector<double>> rows,
                                 bool unit_norm)
    : tokens_(std::move(tokens)), unit_norm_(unit_norm) {
  if (tokens_.size() != rows.size()) {
    throw MetricError("embedding has " + std::to_string(tokens_.size()) + " tokens but " +
                      std::to_string(rows.size()) + " vectors");
  }
  dim_ = rows.empty() ? 0 : rows.front().size();
  values_.reserve(rows.size() * dim_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim_) {
      throw MetricError("embedding row " + std::to_string(i) + " has dimension " + std::to_string(rows[i].size()) +
                        ", expected " + std::to_string(dim_));
    }
    if (unit_norm_ && std::abs(l2_norm(rows[i]) - 1.0) > kUnitNormTolerance) {
      throw MetricError("embedding row " + std::to_string(i) + " is not unit-norm");
    }
    values_.insert(values_.end(), rows[i].begin(), rows[i].end());
  }
}

EmbeddingMatrix EmbeddingMatrix::normalized() const {
  std::vector<std::vector<double>> rows;
  rows.reserve(this->rows());
  bool all_unit = true;
  for (std::size_t i = 0; i < this->rows(); ++i) {
    auto r = row(i);
    std::vector<double> scaled(r.begin(), r.end());
    const double norm = l2_norm(r);
    if (norm > 0.0) {
      for (double& x : scaled) x /= norm;
    } else {
      all_unit = false;
    }
    rows.push_back(std::move(scaled));
  }
  return EmbeddingMatrix(tokens_, std::move(rows), all_unit);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double denom = l2_norm(a) * l2_norm(b);
  if (denom == 0.0) return 0.0;
  return dot(a, b) / denom;
}

BertScoreResult bert_score(const EmbeddingMatrix& hyp, const EmbeddingMatrix& ref) {
  if (hyp.empty() || ref.empty()) throw MetricError("BERTScore needs non-empty hypothesis and reference embeddings");
  if (hyp.dim() != ref.dim()) {
    throw MetricError("embedding dimension mismatch: " + std::to_string(hyp.dim()) + " vs " +
                      std::to_string(ref.dim()));
  }

  // One similarity per (hyp, ref) pair, then row and column maxima.
  std::vector<double> best_for_hyp(hyp.rows(), -std::numeric_limits<double>::infinity());
  std::vector<double> best_for_ref(ref.rows(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < hyp.rows(); ++i) {
    for (std::size_t j = 0; j < ref.rows(); ++j) {
      const double sim = cosine(hyp.row(i), ref.row(j));
      best_for_hyp[i] = std::max(best_for_hyp[i], sim);
      best_for_ref[j] = std::max(best_for_ref[j], sim);
    }
  }

  BertScoreResult result;
  result.precision = mean(best_for_hyp);
  result.recall = mean(best_for_ref);
  const double sum = result.precision + result.recall;
  result.f1 = sum != 0.0 ? 2.0 * result.precision * result.recall / sum : 0.0;
  return result;
}

BertScoreResult mean_bert_score(std::span<const BertScoreResult> per_pair) {
  if (per_pair.empty()) throw MetricError("corpus BERTScore needs at least one pair");
  BertScoreResult out;
  for (const auto& s : per_pair) {
    out.precision += s.precision;
    out.recall += s.recall;
    out.f1 += s.f1;
  }
  const auto n = static_cast<double>(per_pair.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

BertScoreResult corpus_bert_score(std::span<const std::pair<EmbeddingMatrix, EmbeddingMatrix>> pairs) {
  std::vector<BertScoreResult> scores;
  scores.reserve(pairs.size());
  for (const auto& [hyp, ref] : pairs) scores.push_back(bert_score(hyp, ref));
  return mean_bert_score(scores);
}

}  // namespace dashcoach::metrics
