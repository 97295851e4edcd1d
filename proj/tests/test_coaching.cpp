#include <gtest/gtest.h>
#include <algorithm>

#include <random>

#include "dashcoach/coaching.hpp"
#include "dashcoach/harness.hpp"
#include "json.hpp"
#include "mock_model.hpp"

using namespace dashcoach;
using namespace dashcoach::coaching;
using gateway::DialogueTranscript;
using gateway::TranscriptEntry;
using parser::ParsedAnswer;

namespace {

const catalog::Catalog& cat() { return catalog::Catalog::builtin(); }

TranscriptEntry entry(int turn, const std::string& id, ParsedAnswer parsed, std::string raw = "") {
  TranscriptEntry e;
  e.instance.clip_id = "c1";
  e.instance.template_id = id;
  e.instance.turn_index = turn;
  e.raw_response = raw.empty() ? parsed.label() : raw;
  e.parsed = std::move(parsed);
  return e;
}

DialogueTranscript random_transcript(std::mt19937_64& rng, const std::string& clip) {
  DialogueTranscript t;
  t.clip_id = clip;
  int turn = 0;
  for (const auto& tmpl : cat().templates()) {
    if (rng() % 5 == 0) continue;
    ParsedAnswer p = ParsedAnswer::unparseable("?");
    switch (tmpl.kind) {
      case catalog::TemplateKind::binary: {
        const auto r = rng() % 3;
        p = r == 0 ? ParsedAnswer::affirmative() : r == 1 ? ParsedAnswer::negative() : ParsedAnswer::unparseable("hm");
        break;
      }
      case catalog::TemplateKind::categorical: p = ParsedAnswer::choice(tmpl.choices[rng() % tmpl.choices.size()]); break;
      case catalog::TemplateKind::open: p = ParsedAnswer::explanation("note " + std::to_string(rng() % 100)); break;
    }
    auto e = entry(turn++, tmpl.id, p);
    e.instance.clip_id = clip;
    t.entries.push_back(std::move(e));
  }
  return t;
}

CoachingReport templated(const DialogueTranscript& t, const CoachingDB& db = CoachingDB::builtin()) {
  const auto record = detect_events(t, cat());
  return compose_report(record, align_with_db(record, db), db);
}

}  // namespace

TEST(CoachingDb, BuiltinCoversEveryCatalogEvent) {
  const auto& db = CoachingDB::builtin();
  for (const auto& t : cat().templates()) {
    if (t.event) EXPECT_NE(db.find(*t.event), nullptr) << *t.event;
  }
  EXPECT_EQ(db.find("phone_usage")->severity, Severity::critical);
}

TEST(CoachingDb, Validation) {
  EXPECT_THROW(CoachingDB::parse(R"({"version": "v", "entries": [
      {"event_label": "a", "severity": "warn", "driver_guidance": "x", "manager_guidance": "y"},
      {"event_label": "a", "severity": "warn", "driver_guidance": "x", "manager_guidance": "y"}]})"),
               CoachingError);
  EXPECT_THROW(CoachingDB::parse(R"({"version": "v", "entries": [
      {"event_label": "a", "severity": "fatal", "driver_guidance": "x", "manager_guidance": "y"}]})"),
               CoachingError);
  EXPECT_THROW(CoachingDB::parse(R"({"version": "v", "entries": [
      {"event_label": "a", "severity": "info", "driver_guidance": "", "manager_guidance": "y"}]})"),
               CoachingError);
  EXPECT_EQ(parse_severity("warn"), Severity::warn);
  EXPECT_EQ(parse_severity("loud"), std::nullopt);
}

TEST(Detect, OnlyAffirmativeRaisesEvents) {
  DialogueTranscript t{"c1",
                       {entry(0, "harsh_braking", ParsedAnswer::affirmative(), "Yes, hard."),
                        entry(1, "harsh_braking_reason", ParsedAnswer::affirmative()),
                        entry(2, "driver_phone", ParsedAnswer::negative()),
                        entry(3, "driver_smoking", ParsedAnswer::unparseable("unclear")),
                        entry(4, "weather", ParsedAnswer::choice("Rainy")),
                        entry(5, "recommended_action", ParsedAnswer::explanation("Slow down earlier."))}};
  const auto r = detect_events(t, cat());
  ASSERT_EQ(r.detected_events.size(), 1u);
  EXPECT_EQ(r.detected_events[0].event_label, "harsh_braking");
  EXPECT_EQ(r.detected_events[0].evidence.raw_response, "Yes, hard.");
  EXPECT_EQ(r.context_labels.at("weather"), "Rainy");
  EXPECT_EQ(r.open_answers.at("recommended_action"), "Slow down earlier.");
}

TEST(Detect, UnknownTemplateIsAnError) {
  DialogueTranscript t{"c1", {entry(0, "flying_car", ParsedAnswer::affirmative())}};
  EXPECT_THROW(detect_events(t, cat()), CoachingError);
}

TEST(Align, SeverityOrderAndUncoached) {
  const CoachingDB db("t", {{"b", Severity::info, "bd", "bm"},
                            {"a", Severity::critical, "ad", "am"},
                            {"c", Severity::warn, "cd", "cm"},
                            {"aa", Severity::critical, "aad", "aam"}});
  SituationRecord r;
  r.clip_id = "x";
  for (const char* label : {"b", "zz", "c", "aa", "a", "yy"}) r.detected_events.push_back({label, {}});
  const auto al = align_with_db(r, db);
  std::vector<std::string> order;
  for (const auto& e : al.entries) order.push_back(e.event_label);
  EXPECT_EQ(order, (std::vector<std::string>{"a", "aa", "c", "b"}));
  EXPECT_EQ(al.uncoached, (std::vector<std::string>{"yy", "zz"}));
}

TEST(Report, HarshBrakingEndToEnd) {
  auto cfg = dashcoach::testing::StubConfig::defaults();
  for (const auto& t : cat().templates()) {
    if (t.kind == catalog::TemplateKind::binary) cfg.scripted[t.text] = "No.";
  }
  cfg.scripted["Did the ego-car break hard?"] = "Yes, the ego-car braked hard at the light.";
  const dashcoach::testing::StubModel stub(cfg);
  media::MergedFrameSet frames{"c1", {media::RgbImage(32, 16)}, {0.5}, 32, 16};
  const auto out = harness::coach_clip(stub, cat(), parser::NormalizationRuleSet::builtin(), CoachingDB::builtin(),
                                       frames, "c1", {}, false);
  ASSERT_EQ(out.report.events.size(), 1u);
  EXPECT_EQ(out.report.events[0].event_label, "harsh_braking");
  EXPECT_EQ(out.report.events[0].severity, Severity::warn);
  EXPECT_NE(out.report.driver_text.find(CoachingDB::builtin().find("harsh_braking")->driver_guidance),
            std::string::npos);
  EXPECT_NE(out.report.manager_text.find("(harsh_braking) answered \"Yes, the ego-car braked hard at the light.\""),
            std::string::npos)
      << out.report.manager_text;
  EXPECT_EQ(out.report.generated_by, Composer::templated);
}

TEST(Report, NoEventsSaysSo) {
  DialogueTranscript t{"c2",
                       {entry(0, "harsh_braking", ParsedAnswer::negative()),
                        entry(1, "driver_phone", ParsedAnswer::negative())}};
  const auto report = templated(t);
  EXPECT_TRUE(report.events.empty());
  EXPECT_NE(report.driver_text.find(kNoEventsPhrase), std::string::npos);
  EXPECT_NE(report.manager_text.find(kNoEventsPhrase), std::string::npos);
}

TEST(Report, UncoachedEventsAreListed) {
  const CoachingDB db("tiny", {{"phone_usage", Severity::critical, "d", "m"}});
  DialogueTranscript t{"c3",
                       {entry(0, "driver_phone", ParsedAnswer::affirmative()),
                        entry(1, "sharp_turn", ParsedAnswer::affirmative())}};
  const auto report = templated(t, db);
  EXPECT_EQ(report.uncoached_events, (std::vector<std::string>{"sharp_turn"}));
  EXPECT_NE(report.manager_text.find("[UNCOACHED] sharp_turn"), std::string::npos);
  const auto j = nlohmann::json::parse(report_to_json(report));
  EXPECT_EQ(j["db_version"], "tiny");
  EXPECT_EQ(j["uncoached_events"][0], "sharp_turn");
  EXPECT_EQ(j["events"][0]["severity"], "critical");
}

TEST(Report, TraceabilityOnRandomTranscripts) {
  std::mt19937_64 rng(515);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_transcript(rng, "r" + std::to_string(trial));
    const auto report = templated(t);
    std::set<std::string> affirmed;
    for (const auto& e : t.entries) {
      const auto& tmpl = cat().at(e.instance.template_id);
      if (tmpl.event && e.parsed.is(ParsedAnswer::Variant::affirmative)) affirmed.insert(*tmpl.event);
    }
    std::set<std::string> reported;
    for (const auto& e : report.events) reported.insert(e.event_label);
    for (const auto& u : report.uncoached_events) reported.insert(u);
    EXPECT_EQ(reported, affirmed);
    EXPECT_EQ(report_to_json(templated(t)), report_to_json(report));
  }
}

TEST(Report, LlmComposeIsDeterministicAndFallsBack) {
  DialogueTranscript t{"c4", {entry(0, "driver_phone", ParsedAnswer::affirmative())}};
  const auto record = detect_events(t, cat());
  const auto& db = CoachingDB::builtin();
  const auto al = align_with_db(record, db);
  media::MergedFrameSet frames{"c4", {media::RgbImage(32, 16)}, {0.5}, 32, 16};

  const dashcoach::testing::StubModel stub;
  const LlmComposer llm{&stub, gateway::make_media(frames), {}, &parser::NormalizationRuleSet::builtin()};
  const auto a = compose_report(record, al, db, &llm);
  const auto b = compose_report(record, al, db, &llm);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.generated_by, Composer::llm_composed);
  EXPECT_EQ(a.events, compose_report(record, al, db).events);

  dashcoach::testing::MockServer server;
  server.set_failure(dashcoach::testing::FailureMode::http_500);
  gateway::RetryPolicy retry;
  retry.max_attempts = 1;
  const gateway::HttpModelClient failing(server.url(), retry);
  const LlmComposer broken{&failing, gateway::make_media(frames), {}, nullptr};
  const auto fallback = compose_report(record, al, db, &broken);
  EXPECT_EQ(fallback, compose_report(record, al, db));
}
