#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dashcoach/catalog.hpp"
#include "dashcoach/error.hpp"
#include "dashcoach/media.hpp"
#include "dashcoach/metrics.hpp"
#include "dashcoach/response_parser.hpp"

namespace dashcoach::gateway {

struct ChatTurn {
  enum class Role { user, assistant };

  Role role = Role::user;
  std::string content;

  bool operator==(const ChatTurn&) const = default;
};

struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 256;
  std::int64_t seed = 42;

  bool operator==(const GenerationParams&) const = default;
};

/// Either inline base64 PNG frames or a path both sides can read.
struct MediaPayload {
  std::vector<std::string> frames;
  std::optional<std::string> video_path;

  bool operator==(const MediaPayload&) const = default;
};

struct InferenceRequest {
  MediaPayload media;
  std::optional<std::string> audio;
  std::vector<ChatTurn> turns;
  GenerationParams params;

  /// Throws GatewayError(precondition). `expected_frames` is K of the active
  /// merge policy; inline frame payloads must match it exactly.
  void validate(std::optional<int> expected_frames = std::nullopt) const;

  bool operator==(const InferenceRequest&) const = default;
};

// Wire format (UTF-8 JSON). Parsers throw GatewayError(malformed_response / protocol).
std::string serialize_request(const InferenceRequest& request);
InferenceRequest parse_request(std::string_view body);
std::string serialize_infer_response(std::string_view text);
std::string parse_infer_response(std::string_view body);
std::string serialize_embed_request(std::span<const std::string> texts);
std::vector<std::string> parse_embed_request(std::string_view body);
std::string serialize_embed_response(std::span<const metrics::EmbeddingMatrix> embeddings);
std::vector<metrics::EmbeddingMatrix> parse_embed_response(std::string_view body, std::size_t expected_count);
std::string serialize_error(std::string_view message);

enum class ErrorKind { precondition, timeout, transport, http_status, malformed_response, protocol };

std::string_view to_string(ErrorKind kind);

class GatewayError : public Error {
 public:
  GatewayError(ErrorKind kind, const std::string& what, int status = 0);

  ErrorKind kind() const { return kind_; }
  /// HTTP status for http_status errors, else 0.
  int status() const { return status_; }

 private:
  ErrorKind kind_;
  int status_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds timeout{120000};
};

/// Anything that answers /infer and /embed. The HTTP client is the production
/// implementation; tests substitute in-process fakes.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual std::string infer(const InferenceRequest& request) const = 0;
  virtual std::vector<metrics::EmbeddingMatrix> embed(std::span<const std::string> texts) const = 0;
};

/// Stateless HTTP client; safe to share across threads.
class HttpModelClient final : public ModelBackend {
 public:
  explicit HttpModelClient(std::string url, RetryPolicy retry = {});

  /// Returns the endpoint's `text` field verbatim.
  std::string infer(const InferenceRequest& request) const override;
  std::vector<metrics::EmbeddingMatrix> embed(std::span<const std::string> texts) const override;
  /// GET /healthz; throws GatewayError unless it answers 200.
  void check_health() const;

  const std::string& url() const { return url_; }

 private:
  std::string post_with_retry(const std::string& path, const std::string& body) const;

  std::string url_;
  std::string origin_;
  std::string base_path_;
  RetryPolicy retry_;
};

std::string query_model(const std::string& endpoint, const InferenceRequest& request, const RetryPolicy& retry);
std::vector<metrics::EmbeddingMatrix> embed(const std::string& endpoint, std::span<const std::string> texts,
                                            const RetryPolicy& retry);

// ---------------------------------------------------------------------------
// Dialogues

struct MediaBundle {
  MediaPayload media;
  std::optional<std::string> audio;
  /// K of the policy that produced the frames.
  std::optional<int> expected_frames;
};

MediaBundle make_media(const media::MergedFrameSet& frames, const std::optional<std::filesystem::path>& audio = {});

struct TranscriptEntry {
  catalog::InstructionInstance instance;
  std::string raw_response;
  parser::ParsedAnswer parsed = parser::ParsedAnswer::unparseable({});
  double latency_ms = 0.0;
  /// Set when the turn failed at the transport level; `parsed` is then Unparseable.
  std::optional<std::string> error;
};

struct DialogueTranscript {
  std::string clip_id;
  std::vector<TranscriptEntry> entries;

  std::size_t failure_count() const;
};

struct DialogueOptions {
  catalog::ExpansionMode mode = catalog::ExpansionMode::exhaustive;
  /// Send earlier question/answer pairs as context.
  bool include_history = true;
  GenerationParams params;
};

/// One user turn per instance, strictly in order. Conditional follow-ups are
/// asked only if their parent parsed Affirmative. Per-turn failures are
/// recorded and the dialogue moves on.
DialogueTranscript run_dialogue(const ModelBackend& backend, const catalog::Catalog& catalog,
                                const parser::NormalizationRuleSet& rules, const MediaBundle& media,
                                std::span<const catalog::InstructionInstance> instances,
                                const DialogueOptions& options);

}  // namespace dashcoach::gateway
