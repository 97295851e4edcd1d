#include <gtest/gtest.h>
#include <algorithm>

#include "dashcoach/gateway.hpp"
#include "json.hpp"
#include "mock_model.hpp"

using namespace dashcoach;
using namespace dashcoach::gateway;
using dashcoach::testing::FailureMode;
using dashcoach::testing::MockServer;
using dashcoach::testing::StubConfig;
using dashcoach::testing::StubModel;

namespace {

InferenceRequest simple_request(std::string question = "Did the ego-car break hard?") {
  InferenceRequest r;
  r.media.frames = {"AAAA", "BBBB"};
  r.turns = {{ChatTurn::Role::user, std::move(question)}};
  return r;
}

RetryPolicy fast_retry(int attempts, int timeout_ms = 5000) {
  RetryPolicy p;
  p.max_attempts = attempts;
  p.initial_backoff = std::chrono::milliseconds(5);
  p.timeout = std::chrono::milliseconds(timeout_ms);
  return p;
}

media::MergedFrameSet tiny_frames(int k) {
  media::MergedFrameSet f;
  f.clip_id = "c";
  for (int i = 0; i < k; ++i) {
    f.frames.emplace_back(32, 16, static_cast<std::uint8_t>(i * 40));
    f.timestamps.push_back(i + 0.5);
  }
  f.width = 32;
  f.height = 16;
  return f;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const GatewayError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no GatewayError";
  return ErrorKind::protocol;
}

}  // namespace

TEST(Wire, RequestRoundTrip) {
  auto r = simple_request();
  r.turns = {{ChatTurn::Role::user, "q1"}, {ChatTurn::Role::assistant, "a1"}, {ChatTurn::Role::user, "q2 \"quoted\""}};
  r.audio = "/data/a.wav";
  r.params.seed = -7;
  r.params.temperature = 0.25;
  EXPECT_EQ(parse_request(serialize_request(r)), r);

  InferenceRequest path;
  path.media.video_path = "/videos/c1.mp4";
  path.turns = {{ChatTurn::Role::user, "q"}};
  EXPECT_EQ(parse_request(serialize_request(path)), path);
}

TEST(Wire, RequestFieldNames) {
  const auto doc = nlohmann::json::parse(serialize_request(simple_request()));
  EXPECT_EQ(doc["media"]["frames"].size(), 2u);
  EXPECT_EQ(doc["turns"][0]["role"], "user");
  EXPECT_EQ(doc["params"]["temperature"], 0.0);
  EXPECT_EQ(doc["params"]["max_tokens"], 256);
  EXPECT_EQ(doc["params"]["seed"], 42);
  EXPECT_FALSE(doc.contains("audio"));
}

TEST(Wire, ParseErrors) {
  EXPECT_EQ(kind_of([] { parse_request("{"); }), ErrorKind::malformed_response);
  EXPECT_EQ(kind_of([] { parse_request(R"({"media": {}, "turns": [{"role": "bot", "content": "x"}],
                                          "params": {"temperature": 0, "max_tokens": 1, "seed": 1}})"); }),
            ErrorKind::protocol);
  EXPECT_EQ(parse_infer_response(serialize_infer_response("Yes.")), "Yes.");
  EXPECT_EQ(kind_of([] { parse_infer_response(R"({"txt": "x"})"); }), ErrorKind::malformed_response);
}

TEST(Wire, EmbedRoundTrip) {
  const std::vector<std::string> texts{"a b", "c"};
  EXPECT_EQ(parse_embed_request(serialize_embed_request(texts)), texts);
  const auto rows = StubModel().embed(texts);
  const auto back = parse_embed_response(serialize_embed_response(rows), 2);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].tokens(), rows[0].tokens());
  EXPECT_EQ(back[1].dim(), 64u);
  for (std::size_t k = 0; k < 64; ++k) EXPECT_EQ(back[0].row(1)[k], rows[0].row(1)[k]);
}

TEST(Wire, EmbedMixedDimensionNamesIndex) {
  const std::string body = R"({"dim": 2, "embeddings": [
      {"tokens": ["a"], "vectors": [[1, 0]]},
      {"tokens": ["b"], "vectors": [[1, 0, 0]]}]})";
  try {
    parse_embed_response(body, 2);
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::protocol);
    EXPECT_NE(std::string(e.what()).find("embedding 1"), std::string::npos) << e.what();
  }
  EXPECT_EQ(kind_of([&] { parse_embed_response(body, 3); }), ErrorKind::protocol);
}

TEST(Request, Preconditions) {
  auto ok = simple_request();
  EXPECT_NO_THROW(ok.validate(2));
  EXPECT_EQ(kind_of([&] { ok.validate(8); }), ErrorKind::precondition);

  auto no_media = simple_request();
  no_media.media.frames.clear();
  EXPECT_EQ(kind_of([&] { no_media.validate(); }), ErrorKind::precondition);

  auto both = simple_request();
  both.media.video_path = "/x.mp4";
  EXPECT_EQ(kind_of([&] { both.validate(); }), ErrorKind::precondition);

  auto ends_assistant = simple_request();
  ends_assistant.turns.push_back({ChatTurn::Role::assistant, "a"});
  EXPECT_EQ(kind_of([&] { ends_assistant.validate(); }), ErrorKind::precondition);

  auto no_turns = simple_request();
  no_turns.turns.clear();
  EXPECT_EQ(kind_of([&] { no_turns.validate(); }), ErrorKind::precondition);

  auto hot = simple_request();
  hot.params.temperature = -1;
  EXPECT_EQ(kind_of([&] { hot.validate(); }), ErrorKind::precondition);
}

TEST(Client, InferMatchesInProcessStub) {
  MockServer server;
  const HttpModelClient client(server.url(), fast_retry(1));
  EXPECT_NO_THROW(client.check_health());
  const auto r = simple_request();
  EXPECT_EQ(client.infer(r), StubModel().infer(r));
  EXPECT_EQ(server.infer_calls(), 1);
  EXPECT_EQ(server.last_infer_body(), serialize_request(r));
}

TEST(Client, PreconditionMakesNoNetworkCall) {
  MockServer server;
  const HttpModelClient client(server.url(), fast_retry(3));
  auto bad = simple_request();
  bad.turns.clear();
  EXPECT_EQ(kind_of([&] { client.infer(bad); }), ErrorKind::precondition);
  const std::vector<std::string> empty_text{""};
  EXPECT_EQ(kind_of([&] { client.embed(empty_text); }), ErrorKind::precondition);
  EXPECT_EQ(server.infer_calls(), 0);
  EXPECT_EQ(server.embed_calls(), 0);
}

TEST(Client, RetriesServerErrors) {
  MockServer server;
  server.set_failure(FailureMode::http_500, 2);
  const HttpModelClient client(server.url(), fast_retry(3));
  EXPECT_FALSE(client.infer(simple_request()).empty());
  EXPECT_EQ(server.infer_calls(), 3);
}

TEST(Client, GivesUpAfterBudget) {
  MockServer server;
  server.set_failure(FailureMode::http_500);
  const HttpModelClient client(server.url(), fast_retry(3));
  try {
    client.infer(simple_request());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::http_status);
    EXPECT_EQ(e.status(), 500);
    EXPECT_NE(std::string(e.what()).find("injected failure"), std::string::npos) << e.what();
  }
  EXPECT_EQ(server.infer_calls(), 3);
}

TEST(Client, MalformedResponseIsNotRetried) {
  MockServer server;
  server.set_failure(FailureMode::malformed_json);
  const HttpModelClient client(server.url(), fast_retry(3));
  EXPECT_EQ(kind_of([&] { client.infer(simple_request()); }), ErrorKind::malformed_response);
  EXPECT_EQ(server.infer_calls(), 1);
}

TEST(Client, TimeoutAfterThreeAttempts) {
  MockServer server;
  server.set_failure(FailureMode::hang);
  server.set_hang(std::chrono::milliseconds(600));
  const HttpModelClient client(server.url(), fast_retry(3, 150));
  EXPECT_EQ(kind_of([&] { client.infer(simple_request()); }), ErrorKind::timeout);
  EXPECT_EQ(server.infer_calls(), 3);
}

TEST(Client, UnreachableAndBadUrls) {
  int port;
  {
    MockServer gone;
    port = gone.port();
  }
  const HttpModelClient client("http://127.0.0.1:" + std::to_string(port), fast_retry(2, 500));
  EXPECT_EQ(kind_of([&] { client.check_health(); }), ErrorKind::transport);
  EXPECT_EQ(kind_of([&] { client.infer(simple_request()); }), ErrorKind::transport);
  EXPECT_EQ(kind_of([] { HttpModelClient("https://example.com"); }), ErrorKind::precondition);
  EXPECT_EQ(kind_of([] { HttpModelClient("http://x", fast_retry(0)); }), ErrorKind::precondition);
}

TEST(Client, EmbedOverHttp) {
  MockServer server;
  const HttpModelClient client(server.url(), fast_retry(1));
  const std::vector<std::string> texts{"the car stops", "wet road"};
  const auto rows = client.embed(texts);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].rows(), 3u);
  EXPECT_EQ(rows[1].tokens(), (std::vector<std::string>{"wet", "road"}));
  EXPECT_EQ(server.embed_calls(), 1);
}

TEST(Dialogue, ConditionalSkipsFollowUpsOfNegativeParent) {
  auto cfg = StubConfig::defaults();
  cfg.scripted["Can you see a driver?"] = "No, the cabin camera is dark.";
  cfg.scripted["Did the ego-car break hard?"] = "Yes.";
  const StubModel stub(cfg);
  const auto& cat = catalog::Catalog::builtin();
  const auto media = make_media(tiny_frames(2));
  DialogueOptions opt;
  opt.mode = catalog::ExpansionMode::conditional;
  const auto inst = catalog::expand_for_clip(cat, "c", opt.mode);
  const auto t = run_dialogue(stub, cat, parser::NormalizationRuleSet::builtin(), media, inst, opt);

  std::vector<std::string> asked;
  for (const auto& e : t.entries) asked.push_back(e.instance.template_id);
  for (const char* skipped : {"driver_smoking", "driver_phone", "driver_aggression"}) {
    EXPECT_EQ(std::ranges::find(asked, skipped), asked.end()) << skipped;
  }
  const auto reason = std::ranges::find(asked, "harsh_braking_reason");
  ASSERT_NE(reason, asked.end());
  const auto& entry = t.entries[static_cast<std::size_t>(reason - asked.begin())];
  ASSERT_TRUE(entry.instance.parent_turn);
  EXPECT_EQ(t.entries[*entry.instance.parent_turn].instance.template_id, "harsh_braking");
  for (std::size_t i = 0; i < t.entries.size(); ++i) EXPECT_EQ(t.entries[i].instance.turn_index, static_cast<int>(i));
}

TEST(Dialogue, ExhaustiveAsksEverythingWithHistory) {
  MockServer server;
  const HttpModelClient client(server.url(), fast_retry(1));
  const auto& cat = catalog::Catalog::builtin();
  const auto media = make_media(tiny_frames(3));
  ASSERT_EQ(media.expected_frames, 3);
  DialogueOptions opt;
  const auto inst = catalog::expand_for_clip(cat, "c", opt.mode);
  const auto t = run_dialogue(client, cat, parser::NormalizationRuleSet::builtin(), media, inst, opt);
  EXPECT_EQ(t.entries.size(), 22u);
  EXPECT_EQ(t.failure_count(), 0u);
  const auto last = parse_request(server.last_infer_body());
  EXPECT_EQ(last.turns.size(), 43u);
  EXPECT_EQ(last.media.frames.size(), 3u);
}

TEST(Dialogue, TurnFailuresAreRecordedAndDialogueContinues) {
  MockServer server;
  server.set_failure(FailureMode::http_500, 1);
  const HttpModelClient client(server.url(), fast_retry(1));
  const auto& cat = catalog::Catalog::builtin();
  DialogueOptions opt;
  opt.include_history = false;
  const auto inst = catalog::expand_for_clip(cat, "c", opt.mode);
  const auto t = run_dialogue(client, cat, parser::NormalizationRuleSet::builtin(), make_media(tiny_frames(1)), inst, opt);
  ASSERT_EQ(t.entries.size(), 22u);
  EXPECT_EQ(t.failure_count(), 1u);
  ASSERT_TRUE(t.entries[0].error);
  EXPECT_TRUE(t.entries[0].parsed.is(parser::ParsedAnswer::Variant::unparseable));
  EXPECT_FALSE(t.entries[1].error);
  EXPECT_EQ(parse_request(server.last_infer_body()).turns.size(), 1u);
}

TEST(Dialogue, FrameCountMismatchIsPrecondition) {
  const StubModel stub;
  auto media = make_media(tiny_frames(2));
  media.expected_frames = 8;
  const auto& cat = catalog::Catalog::builtin();
  const auto inst = catalog::expand_for_clip(cat, "c", catalog::ExpansionMode::exhaustive);
  const auto t = run_dialogue(stub, cat, parser::NormalizationRuleSet::builtin(), media,
                              std::span(inst).first(1), DialogueOptions{});
  ASSERT_EQ(t.entries.size(), 1u);
  ASSERT_TRUE(t.entries[0].error);
  EXPECT_NE(t.entries[0].error->find("precondition"), std::string::npos);
}
