#include "dashcoach/metrics.hpp"

namespace dashcoach::metrics {

using parser::ParsedAnswer;

bool matches_gold(const ParsedAnswer& gold, const ParsedAnswer& predicted) {
  if (predicted.is(ParsedAnswer::Variant::unparseable)) return false;
  if (gold.variant() != predicted.variant()) return false;
  return !gold.is(ParsedAnswer::Variant::choice) || gold.value() == predicted.value();
}

ERJudgement judge(std::string clip_id, std::string template_id, ParsedAnswer gold, ParsedAnswer predicted) {
  ERJudgement j;
  j.clip_id = std::move(clip_id);
  j.template_id = std::move(template_id);
  j.is_true_event = matches_gold(gold, predicted);
  j.gold = std::move(gold);
  j.predicted = std::move(predicted);
  return j;
}

ARResult accuracy_rate(std::size_t true_events, std::size_t false_events) {
  const auto total = true_events + false_events;
  if (total == 0) throw MetricError("accuracy rate is undefined without any judgements");
  return ARResult{true_events, false_events, static_cast<double>(true_events) / static_cast<double>(total)};
}

ARResult accuracy_rate(std::span<const ERJudgement> judgements) {
  std::size_t true_events = 0;
  for (const auto& j : judgements) true_events += j.is_true_event ? 1 : 0;
  return accuracy_rate(true_events, judgements.size() - true_events);
}

}  // namespace dashcoach::metrics
