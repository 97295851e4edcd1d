// dashcoach: ingest dashcam clips, evaluate models, write coaching reports.

#include <iostream>

#include "CLI11.hpp"
#include "dashcoach/harness.hpp"

namespace {

using namespace dashcoach;

struct PolicyFlags {
  std::string file;
  std::optional<int> frames;
  std::optional<int> width;
  std::optional<int> height;
  std::string layout;

  void add_to(CLI::App* app) {
    app->add_option("--policy", file, "merge policy JSON file")->check(CLI::ExistingFile);
    app->add_option("--frames", frames, "frames sampled per clip (K)");
    app->add_option("--width", width, "per-camera frame width");
    app->add_option("--height", height, "per-camera frame height");
    app->add_option("--layout", layout, "road_left or road_right");
  }

  media::MergePolicy resolve() const {
    media::MergePolicy policy = file.empty() ? media::MergePolicy{} : media::load_policy(file);
    if (frames) policy.sample_count = *frames;
    if (width) policy.per_camera.width = *width;
    if (height) policy.per_camera.height = *height;
    if (!layout.empty()) {
      auto parsed = media::parse_layout(layout);
      if (!parsed) throw harness::HarnessError("unknown layout \"" + layout + "\"");
      policy.layout = *parsed;
    }
    policy.validate();
    return policy;
  }
};

struct RetryFlags {
  int attempts = 3;
  long timeout_ms = 120000;

  void add_to(CLI::App* app) {
    app->add_option("--attempts", attempts, "attempts per request, including the first")->check(CLI::PositiveNumber);
    app->add_option("--timeout-ms", timeout_ms, "per-request timeout")->check(CLI::PositiveNumber);
  }

  gateway::RetryPolicy resolve() const {
    gateway::RetryPolicy retry;
    retry.max_attempts = attempts;
    retry.timeout = std::chrono::milliseconds(timeout_ms);
    return retry;
  }
};

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dashcam driver-behaviour evaluation and coaching"};
  app.set_config("--config", "", "TOML-style key/value file; command-line flags take precedence");
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "extract and merge frames into the cache");
  harness::IngestConfig ingest_cfg;
  std::string ingest_manifest, ingest_cache = "dashcoach-cache";
  PolicyFlags ingest_policy;
  ingest->add_option("--manifest", ingest_manifest, "clip manifest JSON")->required();
  ingest->add_option("--cache", ingest_cache, "frame cache directory");
  ingest->add_option("--jobs", ingest_cfg.concurrency, "parallel clips")->check(CLI::PositiveNumber);
  ingest_policy.add_to(ingest);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score models on the test split");
  std::string ev_manifest, ev_catalog, ev_rules, ev_gold, ev_embed, ev_out = "dashcoach-report", ev_cache;
  std::vector<std::string> ev_endpoints;
  std::int64_t ev_seed = 42;
  int ev_jobs = 4;
  bool ev_no_history = false;
  bool ev_skip_unparseable = false;
  PolicyFlags ev_policy;
  RetryFlags ev_retry;
  evaluate->add_option("--manifest", ev_manifest, "clip manifest JSON")->required();
  evaluate->add_option("--catalog", ev_catalog, "instruction catalog (default: built-in)");
  evaluate->add_option("--rules", ev_rules, "normalization rules (default: built-in)");
  evaluate->add_option("--gold", ev_gold, "gold records, JSON lines")->required();
  evaluate->add_option("--endpoint", ev_endpoints, "NAME=URL, repeatable")->required();
  evaluate->add_option("--embed-endpoint", ev_embed, "URL serving /embed (default: first endpoint)");
  evaluate->add_option("--out", ev_out, "output directory");
  evaluate->add_option("--seed", ev_seed, "generation seed");
  evaluate->add_option("--cache", ev_cache, "frame cache directory");
  evaluate->add_option("--jobs", ev_jobs, "dialogues in flight")->check(CLI::PositiveNumber);
  evaluate->add_flag("--no-history", ev_no_history, "ask every question without earlier turns");
  evaluate->add_flag("--exclude-unparseable", ev_skip_unparseable,
                     "leave unparseable answers out of AR instead of counting them as false");
  ev_policy.add_to(evaluate);
  ev_retry.add_to(evaluate);

  // coach
  auto* coach = app.add_subcommand("coach", "write a coaching report for one clip");
  std::string co_manifest, co_clip, co_db, co_catalog, co_rules, co_endpoint, co_out = ".", co_cache;
  std::int64_t co_seed = 42;
  bool co_llm = false;
  PolicyFlags co_policy;
  RetryFlags co_retry;
  coach->add_option("--manifest", co_manifest, "clip manifest JSON")->required();
  coach->add_option("--clip", co_clip, "clip id")->required();
  coach->add_option("--db", co_db, "coaching database (default: built-in)");
  coach->add_option("--catalog", co_catalog, "instruction catalog (default: built-in)");
  coach->add_option("--rules", co_rules, "normalization rules (default: built-in)");
  coach->add_option("--endpoint", co_endpoint, "model URL")->required();
  coach->add_flag("--llm-compose", co_llm, "let the model rewrite the templated report");
  coach->add_option("--out", co_out, "output directory");
  coach->add_option("--seed", co_seed, "generation seed");
  coach->add_option("--cache", co_cache, "frame cache directory");
  co_policy.add_to(coach);
  co_retry.add_to(coach);

  auto* export_catalog = app.add_subcommand("export-catalog", "print the built-in instruction catalog");
  auto* export_db = app.add_subcommand("export-db", "print the built-in coaching database");
  auto* export_rules = app.add_subcommand("export-rules", "print the built-in normalization rules");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      ingest_cfg.manifest = ingest_manifest;
      ingest_cfg.cache_dir = ingest_cache;
      ingest_cfg.policy = ingest_policy.resolve();
      return harness::cmd_ingest(ingest_cfg);
    }
    if (*evaluate) {
      harness::EvaluateConfig cfg;
      cfg.manifest = ev_manifest;
      cfg.catalog = opt_path(ev_catalog);
      cfg.rules = opt_path(ev_rules);
      cfg.gold = ev_gold;
      for (const auto& e : ev_endpoints) cfg.endpoints.push_back(harness::parse_endpoint(e));
      if (!ev_embed.empty()) cfg.embed_endpoint = ev_embed;
      cfg.out_dir = ev_out;
      cfg.seed = ev_seed;
      cfg.policy = ev_policy.resolve();
      cfg.cache_dir = opt_path(ev_cache);
      cfg.concurrency = ev_jobs;
      cfg.include_history = !ev_no_history;
      cfg.unparseable_is_false = !ev_skip_unparseable;
      cfg.retry = ev_retry.resolve();
      return harness::cmd_evaluate(cfg);
    }
    if (*coach) {
      harness::CoachConfig cfg;
      cfg.manifest = co_manifest;
      cfg.clip_id = co_clip;
      cfg.db = opt_path(co_db);
      cfg.catalog = opt_path(co_catalog);
      cfg.rules = opt_path(co_rules);
      cfg.endpoint = co_endpoint;
      cfg.llm_compose = co_llm;
      cfg.out_dir = co_out;
      cfg.seed = co_seed;
      cfg.policy = co_policy.resolve();
      cfg.cache_dir = opt_path(co_cache);
      cfg.retry = co_retry.resolve();
      return harness::cmd_coach(cfg);
    }
    if (*export_catalog) std::cout << catalog::builtin_catalog_json();
    if (*export_db) std::cout << coaching::builtin_coaching_db_json();
    if (*export_rules) std::cout << parser::builtin_rules_json();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "dashcoach: " << e.what() << "\n";
    return 1;
  }
}
