#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

#include "dashcoach/harness.hpp"
#include "json.hpp"

namespace dashcoach::harness {

namespace fs = std::filesystem;
using nlohmann::json;

Endpoint parse_endpoint(std::string_view spec) {
  const auto eq = spec.find('=');
  const auto scheme = spec.find("://");
  Endpoint out;
  if (eq != std::string_view::npos && (scheme == std::string_view::npos || eq < scheme)) {
    out.name = std::string(spec.substr(0, eq));
    out.url = std::string(spec.substr(eq + 1));
  } else {
    out.name = "model";
    out.url = std::string(spec);
  }
  if (out.name.empty() || out.url.empty()) throw HarnessError("endpoint must look like NAME=URL: " + std::string(spec));
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw HarnessError("cannot write " + path.string());
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

catalog::Catalog load_catalog(const std::optional<fs::path>& path) {
  return path ? catalog::Catalog::load(*path) : catalog::Catalog::builtin();
}

parser::NormalizationRuleSet load_rules(const std::optional<fs::path>& path) {
  return path ? parser::NormalizationRuleSet::load(*path) : parser::NormalizationRuleSet::builtin();
}

void require_healthy(const gateway::HttpModelClient& client, const std::string& name) {
  try {
    client.check_health();
  } catch (const gateway::GatewayError& e) {
    throw HarnessError("endpoint " + name + " (" + client.url() + ") is unreachable: " + e.what());
  }
}

}  // namespace

int cmd_evaluate(const EvaluateConfig& config) {
  const auto started = utc_now();
  config.policy.validate();
  if (config.endpoints.empty()) throw HarnessError("at least one --endpoint NAME=URL is required");

  const auto manifest = media::load_manifest(config.manifest);
  const auto catalog = load_catalog(config.catalog);
  const auto rules = load_rules(config.rules);
  const auto gold = load_gold(config.gold, catalog);

  std::vector<std::unique_ptr<gateway::HttpModelClient>> clients;
  EvaluationInputs in;
  for (const auto& ep : config.endpoints) {
    clients.push_back(std::make_unique<gateway::HttpModelClient>(ep.url, config.retry));
    require_healthy(*clients.back(), ep.name);
    in.models.push_back({ep.name, clients.back().get()});
  }
  const std::string embed_url = config.embed_endpoint.value_or(config.endpoints.front().url);
  auto embedder = std::make_unique<gateway::HttpModelClient>(embed_url, config.retry);
  if (config.embed_endpoint) require_healthy(*embedder, "embed");

  std::optional<FrameCache> cache;
  if (config.cache_dir) cache.emplace(*config.cache_dir);

  in.manifest = &manifest;
  in.catalog = &catalog;
  in.rules = &rules;
  in.gold = &gold;
  in.embedder = embedder.get();
  in.policy = config.policy;
  in.cache = cache ? &*cache : nullptr;
  in.concurrency = config.concurrency;
  in.include_history = config.include_history;
  in.unparseable_is_false = config.unparseable_is_false;
  in.params.seed = config.seed;

  const auto report = run_evaluation(in);

  fs::create_directories(config.out_dir);
  write_file(config.out_dir / "report.json", report_to_json(report));
  write_file(config.out_dir / "items.csv", items_to_csv(report));
  write_file(config.out_dir / "tables.txt", report_tables(report));

  json endpoints = json::object();
  for (const auto& ep : config.endpoints) endpoints[ep.name] = ep.url;
  json info{{"started_at", started},
            {"finished_at", utc_now()},
            {"endpoints", endpoints},
            {"embed_endpoint", embed_url},
            {"failures", report.failure_count()}};
  write_file(config.out_dir / "run_info.json", info.dump(2) + "\n");

  std::cout << report_tables(report);
  if (const auto failures = report.failure_count(); failures > 0) {
    std::cerr << failures << " item(s) failed; see items.csv\n";
    return 2;
  }
  return 0;
}

int cmd_ingest(const IngestConfig& config, IngestResult* result) {
  const auto manifest = media::load_manifest(config.manifest);
  const FrameCache cache(config.cache_dir);
  auto outcome = ingest(manifest, config.policy, cache, config.concurrency);
  std::cout << "extracted " << outcome.extracted << ", cache hits " << outcome.cache_hits << ", failures "
            << outcome.failures.size() << "\n";
  for (const auto& [clip, message] : outcome.failures) std::cerr << "clip " << clip << ": " << message << "\n";
  const int code = outcome.failures.empty() ? 0 : 2;
  if (result) *result = std::move(outcome);
  return code;
}

CoachOutcome coach_clip(const gateway::ModelBackend& backend, const catalog::Catalog& catalog,
                        const parser::NormalizationRuleSet& rules, const coaching::CoachingDB& db,
                        const media::MergedFrameSet& frames, std::string_view clip_id,
                        const gateway::GenerationParams& params, bool llm_compose,
                        const std::optional<fs::path>& audio) {
  CoachOutcome out;
  const auto media = gateway::make_media(frames, audio);
  gateway::DialogueOptions options;
  options.mode = catalog::ExpansionMode::conditional;
  options.params = params;
  const auto instances = catalog::expand_for_clip(catalog, clip_id, options.mode);
  out.transcript = gateway::run_dialogue(backend, catalog, rules, media, instances, options);
  out.record = coaching::detect_events(out.transcript, catalog);
  const auto alignment = coaching::align_with_db(out.record, db);
  if (llm_compose) {
    const coaching::LlmComposer llm{&backend, media, params, &rules};
    out.report = coaching::compose_report(out.record, alignment, db, &llm);
  } else {
    out.report = coaching::compose_report(out.record, alignment, db);
  }
  return out;
}

int cmd_coach(const CoachConfig& config) {
  config.policy.validate();
  const auto manifest = media::load_manifest(config.manifest);
  const auto* clip = manifest.find(config.clip_id);
  if (!clip) throw HarnessError("unknown clip id \"" + config.clip_id + "\"");
  const auto catalog = load_catalog(config.catalog);
  const auto rules = load_rules(config.rules);
  const auto db = config.db ? coaching::CoachingDB::load(*config.db) : coaching::CoachingDB::builtin();

  const gateway::HttpModelClient client(parse_endpoint(config.endpoint).url, config.retry);
  require_healthy(client, "model");

  std::optional<FrameCache> cache;
  if (config.cache_dir) cache.emplace(*config.cache_dir);
  const auto frames = obtain_frames(*clip, config.policy, cache ? &*cache : nullptr);

  gateway::GenerationParams params;
  params.seed = config.seed;
  const auto outcome = coach_clip(client, catalog, rules, db, frames, clip->id, params, config.llm_compose, clip->audio);

  for (const auto& label : outcome.report.uncoached_events) {
    std::cerr << "warning: event \"" << label << "\" has no entry in coaching database " << db.version() << "\n";
  }
  fs::create_directories(config.out_dir);
  write_file(config.out_dir / (clip->id + ".coaching.json"), coaching::report_to_json(outcome.report));
  write_file(config.out_dir / (clip->id + ".coaching.txt"), coaching::report_to_text(outcome.report));
  std::cout << coaching::report_to_text(outcome.report);
  return outcome.transcript.failure_count() > 0 ? 2 : 0;
}

}  // namespace dashcoach::harness
