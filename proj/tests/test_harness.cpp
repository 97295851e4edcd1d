#include <gtest/gtest.h>
#include <algorithm>

#include <fstream>
#include <sstream>

#include "dashcoach/harness.hpp"
#include "eval_fixture.hpp"
#include "json.hpp"
#include "mock_model.hpp"
#include "temp_dir.hpp"

using namespace dashcoach;
using namespace dashcoach::harness;
using dashcoach::testing::eval3_config;
using dashcoach::testing::MockServer;
using dashcoach::testing::TempDir;
using dashcoach::testing::test_data_dir;
using dashcoach::testing::write_text;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const catalog::Catalog& cat() { return catalog::Catalog::builtin(); }

media::MergePolicy small_policy(int k = 4) {
  media::MergePolicy p;
  p.sample_count = k;
  p.per_camera = {32, 24};
  return p;
}

std::string expect_harness_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const HarnessError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no HarnessError";
  return {};
}

}  // namespace

TEST(Gold, ParsesFixture) {
  const auto gold = load_gold(test_data_dir() / "eval3" / "gold.jsonl", cat());
  EXPECT_EQ(gold.size(), 3u);
  EXPECT_EQ(gold.at("c1").er_gold.size(), 20u);
  EXPECT_EQ(gold.at("c1").oq_gold.size(), 2u);
  const auto manifest = media::load_manifest(test_data_dir() / "eval3" / "manifest.json");
  EXPECT_NO_THROW(check_gold_coverage(gold, manifest, cat()));
}

TEST(Gold, LineErrors) {
  auto msg = expect_harness_error([] { parse_gold("\n{\"clip_id\": \"a\", \"er\": {\"weather\": \"Sunny\"}}", cat()); });
  EXPECT_NE(msg.find("gold line 2 (clip \"a\")"), std::string::npos) << msg;
  EXPECT_NE(msg.find("Sunny"), std::string::npos) << msg;
  msg = expect_harness_error([] { parse_gold(R"({"clip_id": "a", "er": {"scene_description": "yes"}})", cat()); });
  EXPECT_NE(msg.find("not an event-recognition template"), std::string::npos) << msg;
  msg = expect_harness_error([] { parse_gold(R"({"clip_id": "a", "oq": {"scene_description": ""}})", cat()); });
  EXPECT_NE(msg.find("non-empty"), std::string::npos) << msg;
  msg = expect_harness_error([] { parse_gold("{\"clip_id\": \"a\"}\n{\"clip_id\": \"a\"}", cat()); });
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
  msg = expect_harness_error([] { parse_gold("{oops", cat()); });
  EXPECT_NE(msg.find("gold line 1"), std::string::npos) << msg;
}

TEST(Gold, MissingTestClipIsFatal) {
  const auto manifest = media::load_manifest(test_data_dir() / "eval3" / "manifest.json");
  auto text = slurp(test_data_dir() / "eval3" / "gold.jsonl");
  // drop the c3 record and point the manifest at a "c9" that has no gold
  std::istringstream in(text);
  std::string kept, line;
  while (std::getline(in, line)) {
    if (line.find("\"c3\"") == std::string::npos) kept += line + "\n";
  }
  const auto gold = parse_gold(kept, cat());
  auto clips = manifest.clips();
  for (auto& c : clips) {
    if (c.id == "c3") c.id = "c9";
  }
  const auto msg = expect_harness_error([&] { check_gold_coverage(gold, media::Manifest(clips), cat()); });
  EXPECT_NE(msg.find("no gold record for test clip \"c9\""), std::string::npos) << msg;

  // a record that exists but lacks an item is also fatal
  auto partial = parse_gold(text, cat());
  partial.at("c1").er_gold.erase("weather");
  EXPECT_THROW(check_gold_coverage(partial, manifest, cat()), HarnessError);
}

TEST(Cache, HitMissAndPolicyChange) {
  TempDir dir;
  const FrameCache cache(dir.path());
  const auto manifest = media::load_manifest(test_data_dir() / "eval3" / "manifest.json");
  const auto& clip = *manifest.find("c2");

  bool hit = true;
  const auto first = obtain_frames(clip, small_policy(8), &cache, &hit);
  EXPECT_FALSE(hit);
  const auto second = obtain_frames(clip, small_policy(8), &cache, &hit);
  EXPECT_TRUE(hit);
  EXPECT_EQ(first, second);
  EXPECT_EQ(first.frames.size(), 8u);
  EXPECT_EQ(first.width, 64);

  const auto k4 = obtain_frames(clip, small_policy(4), &cache, &hit);
  EXPECT_FALSE(hit);
  EXPECT_EQ(k4.frames.size(), 4u);
  EXPECT_NE(FrameCache::key("c2", small_policy(8)), FrameCache::key("c2", small_policy(4)));
  EXPECT_NE(FrameCache::key("c2", small_policy(8)), FrameCache::key("c1", small_policy(8)));

  // a damaged entry is a miss, not an error
  std::filesystem::remove(cache.entry_dir("c2", small_policy(4)) / "frame_000.png");
  EXPECT_FALSE(cache.load("c2", small_policy(4)).has_value());
  obtain_frames(clip, small_policy(4), &cache, &hit);
  EXPECT_FALSE(hit);
  EXPECT_TRUE(cache.load("c2", small_policy(4)).has_value());
}

TEST(Ingest, ExtractsThenHitsAndReportsFailures) {
  TempDir dir;
  IngestConfig cfg;
  cfg.manifest = test_data_dir() / "eval3" / "manifest.json";
  cfg.policy = small_policy();
  cfg.cache_dir = dir / "cache";
  IngestResult r;
  EXPECT_EQ(cmd_ingest(cfg, &r), 0);
  EXPECT_EQ(r.extracted, 4u);
  EXPECT_EQ(r.cache_hits, 0u);
  EXPECT_EQ(cmd_ingest(cfg, &r), 0);
  EXPECT_EQ(r.cache_hits, 4u);

  write_text(dir / "bad" / "road.mp4", "garbage");
  write_text(dir / "bad" / "driver.mp4", "garbage");
  write_text(dir / "bad" / "m.json", R"({"clips": [{"id": "b1", "road_video": "road.mp4",
      "driver_video": "driver.mp4", "duration_s": 1.0, "split": "test"}]})");
  cfg.manifest = dir / "bad" / "m.json";
  EXPECT_EQ(cmd_ingest(cfg, &r), 2);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].first, "b1");
  EXPECT_NE(r.failures[0].second.find("road camera"), std::string::npos) << r.failures[0].second;
}

TEST(ParallelFor, RunsEveryIndexAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] += 1; });
  EXPECT_EQ(std::ranges::count(hits, 1), 100);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
               std::runtime_error);
}

TEST(Endpoint, Parse) {
  const auto a = parse_endpoint("llava=http://host:8000");
  EXPECT_EQ(a.name, "llava");
  EXPECT_EQ(a.url, "http://host:8000");
  const auto b = parse_endpoint("http://host:8000/x?a=b");
  EXPECT_EQ(b.name, "model");
  EXPECT_EQ(b.url, "http://host:8000/x?a=b");
  EXPECT_THROW(parse_endpoint("=http://x"), HarnessError);
}

TEST(Evaluate, WritesOutputsWithoutRunMetadata) {
  MockServer server;
  TempDir out;
  const auto cfg = eval3_config(server.url(), out.path());
  ASSERT_EQ(cmd_evaluate(cfg), 0);
  for (const char* f : {"report.json", "items.csv", "tables.txt", "run_info.json"}) {
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  }
  const auto report = slurp(out / "report.json");
  EXPECT_EQ(report.find("127.0.0.1"), std::string::npos);
  EXPECT_EQ(report.find("latency"), std::string::npos);
  const auto doc = nlohmann::json::parse(report);
  EXPECT_EQ(doc["metadata"]["clip_count"], 3);
  EXPECT_EQ(doc["items"].size(), 66u);
  EXPECT_EQ(doc["models"][0]["er_items"], 60);
  EXPECT_EQ(doc["models"][0]["oq_items"], 6);

  const auto recomputed = recompute_ar(report);
  const auto& ar = doc["models"][0]["ar"];
  EXPECT_EQ(recomputed.at("stub").true_events, ar["true_events"].get<std::size_t>());
  EXPECT_EQ(recomputed.at("stub").ar, ar["ar"].get<double>());

  const auto csv = slurp(out / "items.csv");
  EXPECT_EQ(std::ranges::count(csv, '\n'), 67);
  const auto info = nlohmann::json::parse(slurp(out / "run_info.json"));
  EXPECT_EQ(info["endpoints"]["stub"], server.url());
}

TEST(Evaluate, RepeatRunsAreByteIdentical) {
  MockServer server;
  TempDir a, b;
  auto cfg = eval3_config(server.url(), a.path());
  cfg.cache_dir = a / "cache";
  ASSERT_EQ(cmd_evaluate(cfg), 0);
  cfg.out_dir = b.path();
  cfg.concurrency = 1;
  ASSERT_EQ(cmd_evaluate(cfg), 0);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "items.csv"), slurp(b / "items.csv"));
}

TEST(Evaluate, TwoEndpointsGiveTwoRows) {
  MockServer one;
  auto cfg2 = dashcoach::testing::StubConfig::defaults();
  cfg2.seed = 9;
  MockServer two(cfg2);
  TempDir out;
  auto cfg = eval3_config(one.url(), out.path());
  cfg.endpoints = {{"zeta", two.url()}, {"alpha", one.url()}};
  ASSERT_EQ(cmd_evaluate(cfg), 0);
  const auto doc = nlohmann::json::parse(slurp(out / "report.json"));
  ASSERT_EQ(doc["models"].size(), 2u);
  EXPECT_EQ(doc["models"][0]["name"], "alpha");
  EXPECT_EQ(doc["models"][1]["name"], "zeta");
  EXPECT_EQ(doc["items"].size(), 132u);
  const auto tables = slurp(out / "tables.txt");
  EXPECT_NE(tables.find("alpha"), std::string::npos);
  EXPECT_NE(tables.find("zeta"), std::string::npos);
  cfg.endpoints.push_back({"alpha", two.url()});
  EXPECT_THROW(cmd_evaluate(cfg), HarnessError);
}

TEST(Evaluate, ItemFailuresGiveExitTwo) {
  MockServer server;
  server.set_failure(dashcoach::testing::FailureMode::http_500, 2);
  TempDir out;
  const auto cfg = eval3_config(server.url(), out.path());
  EXPECT_EQ(cmd_evaluate(cfg), 2);
  const auto doc = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(doc["models"][0]["failures"], 2);
  std::size_t errors = 0;
  for (const auto& item : doc["items"]) errors += item.contains("error");
  EXPECT_EQ(errors, 2u);
}

TEST(Evaluate, UnreachableEndpointIsFatal) {
  int port;
  {
    MockServer gone;
    port = gone.port();
  }
  TempDir out;
  const auto cfg = eval3_config("http://127.0.0.1:" + std::to_string(port), out.path());
  const auto msg = expect_harness_error([&] { cmd_evaluate(cfg); });
  EXPECT_NE(msg.find("unreachable"), std::string::npos) << msg;
}

TEST(Evaluate, UndecodableClipIsFatalAndNamed) {
  MockServer server;
  TempDir dir;
  write_text(dir / "road.mp4", "garbage");
  auto text = slurp(test_data_dir() / "eval3" / "manifest.json");
  const auto manifest = media::load_manifest(test_data_dir() / "eval3" / "manifest.json");
  auto clips = manifest.clips();
  for (auto& c : clips) {
    if (c.id == "c2") c.road_video = dir / "road.mp4";
  }
  write_text(dir / "m.json", media::serialize_manifest(media::Manifest(clips)));
  auto cfg = eval3_config(server.url(), dir / "out");
  cfg.manifest = dir / "m.json";
  const auto msg = expect_harness_error([&] { cmd_evaluate(cfg); });
  EXPECT_NE(msg.find("clip \"c2\""), std::string::npos) << msg;
}

TEST(Evaluate, ExcludingUnparseableShrinksDenominator) {
  MockServer server;
  TempDir a, b;
  auto cfg = eval3_config(server.url(), a.path());
  ASSERT_EQ(cmd_evaluate(cfg), 0);
  cfg.out_dir = b.path();
  cfg.unparseable_is_false = false;
  ASSERT_EQ(cmd_evaluate(cfg), 0);
  const auto with = nlohmann::json::parse(slurp(a / "report.json"))["models"][0]["ar"];
  const auto without = nlohmann::json::parse(slurp(b / "report.json"))["models"][0]["ar"];
  EXPECT_EQ(with["true_events"], without["true_events"]);
  EXPECT_GE(with["false_events"].get<int>(), without["false_events"].get<int>());
}

TEST(Coach, WritesReportsForClip) {
  auto stub = dashcoach::testing::StubConfig::defaults();
  for (const auto& t : cat().templates()) {
    if (t.kind == catalog::TemplateKind::binary) stub.scripted[t.text] = "No.";
  }
  stub.scripted["Is the driver using a phone?"] = "Yes.";
  stub.scripted["Can you see a driver?"] = "Yes.";
  MockServer server(stub);
  TempDir out;
  CoachConfig cfg;
  cfg.manifest = test_data_dir() / "eval3" / "manifest.json";
  cfg.clip_id = "c1";
  cfg.endpoint = server.url();
  cfg.out_dir = out.path();
  cfg.policy = small_policy();
  cfg.retry.max_attempts = 1;
  ASSERT_EQ(cmd_coach(cfg), 0);
  const auto j = nlohmann::json::parse(slurp(out / "c1.coaching.json"));
  ASSERT_EQ(j["events"].size(), 1u);
  EXPECT_EQ(j["events"][0]["event_label"], "phone_usage");
  EXPECT_EQ(j["generated_by"], "templated");
  EXPECT_NE(slurp(out / "c1.coaching.txt").find("=== Manager ==="), std::string::npos);

  cfg.clip_id = "zzz";
  const auto msg = expect_harness_error([&] { cmd_coach(cfg); });
  EXPECT_NE(msg.find("unknown clip id \"zzz\""), std::string::npos);
}
