#include <algorithm>
#include <cstdio>
#include <mutex>
#include <set>
#include <sstream>

#include "dashcoach/harness.hpp"
#include "json.hpp"

namespace dashcoach::harness {

using nlohmann::json;
using parser::ParsedAnswer;

std::size_t EvalReport::failure_count() const {
  return static_cast<std::size_t>(std::ranges::count_if(items, [](const ItemRecord& r) { return r.error.has_value(); }));
}

namespace {

constexpr std::size_t kEmbedBatch = 16;

struct EmbedOutcome {
  std::optional<metrics::EmbeddingMatrix> matrix;
  std::string error;
};

// One embedding per distinct non-empty text, shared by every model.
std::map<std::string, EmbedOutcome> embed_all(const gateway::ModelBackend& embedder,
                                              const std::set<std::string>& texts, int concurrency) {
  const std::vector<std::string> ordered(texts.begin(), texts.end());
  std::vector<EmbedOutcome> outcomes(ordered.size());
  const std::size_t batches = (ordered.size() + kEmbedBatch - 1) / kEmbedBatch;
  parallel_for(batches, concurrency, [&](std::size_t b) {
    const std::size_t lo = b * kEmbedBatch;
    const std::size_t hi = std::min(ordered.size(), lo + kEmbedBatch);
    std::span<const std::string> batch(ordered.data() + lo, hi - lo);
    try {
      auto rows = embedder.embed(batch);
      for (std::size_t i = 0; i < rows.size(); ++i) outcomes[lo + i].matrix = std::move(rows[i]);
    } catch (const gateway::GatewayError& e) {
      for (std::size_t i = lo; i < hi; ++i) outcomes[i].error = e.what();
    }
  });
  std::map<std::string, EmbedOutcome> out;
  for (std::size_t i = 0; i < ordered.size(); ++i) out.emplace(ordered[i], std::move(outcomes[i]));
  return out;
}

}  // namespace

EvalReport run_evaluation(const EvaluationInputs& in) {
  if (!in.manifest || !in.catalog || !in.rules || !in.gold) throw HarnessError("evaluation inputs incomplete");
  if (in.models.empty()) throw HarnessError("at least one model endpoint is required");
  if (!in.embedder) throw HarnessError("an embedding endpoint is required for BERTScore");
  in.policy.validate();

  auto models = in.models;
  std::ranges::sort(models, {}, &NamedBackend::name);
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (models[i].name == models[i - 1].name) throw HarnessError("duplicate model name \"" + models[i].name + "\"");
  }

  auto clips = in.manifest->in_split(media::Split::test);
  if (clips.empty()) throw HarnessError("manifest has no test-split clips");
  std::ranges::sort(clips, [](const auto* a, const auto* b) { return a->id < b->id; });
  check_gold_coverage(*in.gold, *in.manifest, *in.catalog);

  std::vector<media::MergedFrameSet> frames(clips.size());
  parallel_for(clips.size(), in.concurrency, [&](std::size_t i) {
    try {
      frames[i] = obtain_frames(*clips[i], in.policy, in.cache, nullptr, in.opener);
    } catch (const Error& e) {
      throw HarnessError("clip \"" + clips[i]->id + "\": " + e.what());
    }
  });
  std::vector<gateway::MediaBundle> media(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) media[i] = gateway::make_media(frames[i], clips[i]->audio);
  frames.clear();

  gateway::DialogueOptions options;
  options.mode = catalog::ExpansionMode::exhaustive;
  options.include_history = in.include_history;
  options.params = in.params;

  std::vector<gateway::DialogueTranscript> transcripts(models.size() * clips.size());
  parallel_for(transcripts.size(), in.concurrency, [&](std::size_t task) {
    const std::size_t m = task / clips.size();
    const std::size_t c = task % clips.size();
    const auto instances = catalog::expand_for_clip(*in.catalog, clips[c]->id, options.mode);
    transcripts[task] = gateway::run_dialogue(*models[m].backend, *in.catalog, *in.rules, media[c], instances, options);
  });

  // Reduction is single-threaded and ordered by (model, clip, turn).
  EvalReport report;
  report.catalog_version = in.catalog->version();
  report.rules_version = in.rules->version();
  report.seed = in.params.seed;
  report.policy = in.policy.canonical();
  report.clip_count = clips.size();

  std::set<std::string> to_embed;
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t c = 0; c < clips.size(); ++c) {
      const auto& gold = in.gold->find(clips[c]->gold_key())->second;
      for (const auto& entry : transcripts[m * clips.size() + c].entries) {
        const auto& t = in.catalog->at(entry.instance.template_id);
        ItemRecord item;
        item.model = models[m].name;
        item.clip_id = clips[c]->id;
        item.turn_index = entry.instance.turn_index;
        item.template_id = t.id;
        item.error = entry.error;
        if (t.kind == catalog::TemplateKind::open) {
          item.open_question = true;
          item.gold = gold.oq_gold.at(t.id);
          item.predicted = entry.parsed.is(ParsedAnswer::Variant::explanation) ? entry.parsed.value() : "";
          to_embed.insert(item.gold);
          if (!item.predicted.empty()) to_embed.insert(item.predicted);
        } else {
          item.predicted = entry.parsed.label();
          if (auto g = gold.er_gold.find(t.id); g != gold.er_gold.end()) {
            item.gold = g->second.label();
            const bool excluded =
                !in.unparseable_is_false && entry.parsed.is(ParsedAnswer::Variant::unparseable);
            if (t.is_scored_er() && !excluded) item.is_true_event = metrics::matches_gold(g->second, entry.parsed);
          }
        }
        report.items.push_back(std::move(item));
      }
    }
  }

  const auto embeddings = embed_all(*in.embedder, to_embed, in.concurrency);

  for (const auto& model : models) {
    ModelSummary summary;
    summary.name = model.name;
    std::size_t true_events = 0, false_events = 0;
    std::vector<std::string> hyps, refs;
    std::vector<metrics::BertScoreResult> berts;
    for (auto& item : report.items) {
      if (item.model != model.name) continue;
      if (!item.open_question) {
        ++summary.er_items;
        if (item.is_true_event) ++(*item.is_true_event ? true_events : false_events);
      } else {
        ++summary.oq_items;
        hyps.push_back(item.predicted);
        refs.push_back(item.gold);
        item.bleu = metrics::corpus_bleu(std::span(&item.predicted, 1), std::span(&item.gold, 1)).score;
        metrics::BertScoreResult bert;
        if (!item.predicted.empty()) {
          const auto& h = embeddings.at(item.predicted);
          const auto& r = embeddings.at(item.gold);
          if (h.matrix && r.matrix) {
            bert = metrics::bert_score(*h.matrix, *r.matrix);
          } else if (!item.error) {
            item.error = "embed: " + (h.matrix ? r.error : h.error);
          }
        }
        item.bertscore = bert;
        berts.push_back(bert);
      }
      if (item.error) ++summary.failures;
    }
    // A custom catalog may lack one of the two item kinds; its scores then stay zero.
    if (true_events + false_events > 0) summary.ar = metrics::accuracy_rate(true_events, false_events);
    if (!hyps.empty()) {
      summary.bleu = metrics::corpus_bleu(hyps, refs);
      summary.bertscore = metrics::mean_bert_score(berts);
    }
    report.models.push_back(std::move(summary));
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  json meta{{"catalog_version", report.catalog_version},
            {"rules_version", report.rules_version},
            {"seed", report.seed},
            {"split", "test"},
            {"clip_count", report.clip_count},
            {"merge_policy", report.policy}};
  json models = json::array();
  for (const auto& m : report.models) {
    models.push_back({{"name", m.name},
                      {"ar",
                       {{"true_events", m.ar.true_events}, {"false_events", m.ar.false_events}, {"ar", m.ar.ar}}},
                      {"bleu",
                       {{"score", m.bleu.score},
                        {"precisions", m.bleu.precisions},
                        {"brevity_penalty", m.bleu.brevity_penalty},
                        {"hyp_len", m.bleu.hyp_len},
                        {"ref_len", m.bleu.ref_len}}},
                      {"bertscore",
                       {{"precision", m.bertscore.precision}, {"recall", m.bertscore.recall}, {"f1", m.bertscore.f1}}},
                      {"er_items", m.er_items},
                      {"oq_items", m.oq_items},
                      {"failures", m.failures}});
  }
  json items = json::array();
  for (const auto& r : report.items) {
    json item{{"model", r.model},
              {"clip_id", r.clip_id},
              {"turn_index", r.turn_index},
              {"template_id", r.template_id},
              {"type", r.open_question ? "oq" : "er"},
              {"gold", r.gold},
              {"predicted", r.predicted}};
    if (r.is_true_event) item["is_true_event"] = *r.is_true_event;
    if (r.bleu) item["bleu"] = *r.bleu;
    if (r.bertscore) {
      item["bertscore"] = {{"precision", r.bertscore->precision},
                           {"recall", r.bertscore->recall},
                           {"f1", r.bertscore->f1}};
    }
    if (r.error) item["error"] = *r.error;
    items.push_back(std::move(item));
  }
  json doc{{"metadata", meta}, {"models", models}, {"items", items}};
  return doc.dump(2) + "\n";
}

namespace {

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

}  // namespace

std::string items_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "model,clip_id,turn_index,template_id,type,gold,predicted,is_true_event,bleu,bert_p,bert_r,bert_f1,error\n";
  for (const auto& r : report.items) {
    out << csv_field(r.model) << ',' << csv_field(r.clip_id) << ',' << r.turn_index << ',' << csv_field(r.template_id)
        << ',' << (r.open_question ? "oq" : "er") << ',' << csv_field(r.gold) << ',' << csv_field(r.predicted) << ',';
    if (r.is_true_event) out << (*r.is_true_event ? "1" : "0");
    out << ',';
    if (r.bleu) out << fixed(*r.bleu, 4);
    out << ',';
    if (r.bertscore) {
      out << fixed(r.bertscore->precision, 6) << ',' << fixed(r.bertscore->recall, 6) << ','
          << fixed(r.bertscore->f1, 6);
    } else {
      out << ",,";
    }
    out << ',' << csv_field(r.error.value_or("")) << '\n';
  }
  return out.str();
}

std::string report_tables(const EvalReport& report) {
  std::size_t width = 5;
  for (const auto& m : report.models) width = std::max(width, m.name.size());
  const auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };

  std::ostringstream out;
  out << "Event recognition (" << report.clip_count << " test clips)\n";
  out << pad("Model") << "  " << "    AR\n";
  for (const auto& m : report.models) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.1f", m.ar.ar * 100.0);
    out << pad(m.name) << "  " << buf << "\n";
  }
  out << "\nOpen questions\n";
  out << pad("Model") << "  " << "  BLEU  BERTScore\n";
  for (const auto& m : report.models) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%6.1f  %9.3f", m.bleu.score, m.bertscore.f1);
    out << pad(m.name) << "  " << buf << "\n";
  }
  return out.str();
}

std::map<std::string, metrics::ARResult> recompute_ar(std::string_view report_json) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  const auto doc = json::parse(report_json);
  for (const auto& item : doc.at("items")) {
    if (item.at("type") != "er" || !item.contains("is_true_event")) continue;
    auto& [t, f] = counts[item.at("model").get<std::string>()];
    ++(item.at("is_true_event").get<bool>() ? t : f);
  }
  std::map<std::string, metrics::ARResult> out;
  for (const auto& [model, tf] : counts) out.emplace(model, metrics::accuracy_rate(tf.first, tf.second));
  return out;
}

}  // namespace dashcoach::harness
