#include <algorithm>

#include "dashcoach/gateway.hpp"
#include "json.hpp"

namespace dashcoach::gateway {

using nlohmann::json;

namespace {

json parse_body(std::string_view body, const char* what) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw GatewayError(ErrorKind::malformed_response, std::string(what) + " is not valid JSON: " + e.what());
  }
}

[[noreturn]] void protocol_error(const std::string& message) {
  throw GatewayError(ErrorKind::protocol, message);
}

std::string_view role_name(ChatTurn::Role role) { return role == ChatTurn::Role::user ? "user" : "assistant"; }

}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::transport: return "transport";
    case ErrorKind::http_status: return "http_status";
    case ErrorKind::malformed_response: return "malformed_response";
    case ErrorKind::protocol: return "protocol";
  }
  return "transport";
}

GatewayError::GatewayError(ErrorKind kind, const std::string& what, int status)
    : Error(std::string(to_string(kind)) + ": " + what), kind_(kind), status_(status) {}

void InferenceRequest::validate(std::optional<int> expected_frames) const {
  const auto fail = [](const std::string& m) { throw GatewayError(ErrorKind::precondition, m); };
  if (std::ranges::none_of(turns, [](const ChatTurn& t) { return t.role == ChatTurn::Role::user; })) {
    fail("request needs at least one user turn");
  }
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto expected = i % 2 == 0 ? ChatTurn::Role::user : ChatTurn::Role::assistant;
    if (turns[i].role != expected) fail("turns must alternate user/assistant starting with user");
  }
  if (turns.back().role != ChatTurn::Role::user) fail("the last turn must come from the user");
  if (media.frames.empty() == !media.video_path.has_value()) {
    fail("request needs exactly one of inline frames or a video path");
  }
  if (expected_frames && !media.frames.empty() && static_cast<int>(media.frames.size()) != *expected_frames) {
    fail("request carries " + std::to_string(media.frames.size()) + " frames, policy expects " +
         std::to_string(*expected_frames));
  }
  if (params.temperature < 0.0) fail("temperature must be >= 0");
  if (params.max_tokens <= 0) fail("max_tokens must be > 0");
}

std::string serialize_request(const InferenceRequest& request) {
  json media = json::object();
  if (request.media.video_path) {
    media["video_path"] = *request.media.video_path;
  } else {
    media["frames"] = request.media.frames;
  }
  json turns = json::array();
  for (const auto& turn : request.turns) {
    turns.push_back({{"role", std::string(role_name(turn.role))}, {"content", turn.content}});
  }
  json body{{"media", media},
            {"turns", turns},
            {"params",
             {{"temperature", request.params.temperature},
              {"max_tokens", request.params.max_tokens},
              {"seed", request.params.seed}}}};
  if (request.audio) body["audio"] = *request.audio;
  return body.dump();
}

InferenceRequest parse_request(std::string_view body) {
  const json doc = parse_body(body, "inference request");
  InferenceRequest request;
  if (!doc.is_object()) protocol_error("inference request must be an object");

  if (!doc.contains("media") || !doc["media"].is_object()) protocol_error("missing \"media\" object");
  const json& media = doc["media"];
  if (media.contains("frames")) {
    if (!media["frames"].is_array()) protocol_error("\"media.frames\" must be an array");
    for (const auto& frame : media["frames"]) {
      if (!frame.is_string()) protocol_error("\"media.frames\" entries must be base64 strings");
      request.media.frames.push_back(frame.get<std::string>());
    }
  }
  if (media.contains("video_path")) {
    if (!media["video_path"].is_string()) protocol_error("\"media.video_path\" must be a string");
    request.media.video_path = media["video_path"].get<std::string>();
  }
  if (doc.contains("audio") && !doc["audio"].is_null()) {
    if (!doc["audio"].is_string()) protocol_error("\"audio\" must be a string");
    request.audio = doc["audio"].get<std::string>();
  }

  if (!doc.contains("turns") || !doc["turns"].is_array()) protocol_error("missing \"turns\" array");
  for (const auto& turn : doc["turns"]) {
    if (!turn.is_object() || !turn.contains("role") || !turn.contains("content") || !turn["role"].is_string() ||
        !turn["content"].is_string()) {
      protocol_error("each turn needs string \"role\" and \"content\"");
    }
    const auto role = turn["role"].get<std::string>();
    if (role != "user" && role != "assistant") protocol_error("unknown role \"" + role + "\"");
    request.turns.push_back(
        {role == "user" ? ChatTurn::Role::user : ChatTurn::Role::assistant, turn["content"].get<std::string>()});
  }

  if (!doc.contains("params") || !doc["params"].is_object()) protocol_error("missing \"params\" object");
  const json& params = doc["params"];
  if (!params.contains("temperature") || !params["temperature"].is_number() || !params.contains("max_tokens") ||
      !params["max_tokens"].is_number_integer() || !params.contains("seed") || !params["seed"].is_number_integer()) {
    protocol_error("\"params\" needs numeric temperature and integer max_tokens and seed");
  }
  request.params.temperature = params["temperature"].get<double>();
  request.params.max_tokens = params["max_tokens"].get<int>();
  request.params.seed = params["seed"].get<std::int64_t>();
  return request;
}

std::string serialize_infer_response(std::string_view text) { return json{{"text", std::string(text)}}.dump(); }

std::string parse_infer_response(std::string_view body) {
  const json doc = parse_body(body, "inference response");
  if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string()) {
    throw GatewayError(ErrorKind::malformed_response, "inference response lacks a string \"text\" field");
  }
  return doc["text"].get<std::string>();
}

std::string serialize_embed_request(std::span<const std::string> texts) {
  return json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}.dump();
}

std::vector<std::string> parse_embed_request(std::string_view body) {
  const json doc = parse_body(body, "embedding request");
  if (!doc.is_object() || !doc.contains("texts") || !doc["texts"].is_array()) protocol_error("missing \"texts\" array");
  std::vector<std::string> texts;
  for (const auto& t : doc["texts"]) {
    if (!t.is_string()) protocol_error("\"texts\" entries must be strings");
    texts.push_back(t.get<std::string>());
  }
  return texts;
}

std::string serialize_embed_response(std::span<const metrics::EmbeddingMatrix> embeddings) {
  json list = json::array();
  std::size_t dim = 0;
  for (const auto& m : embeddings) {
    json vectors = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
      auto row = m.row(i);
      vectors.push_back(std::vector<double>(row.begin(), row.end()));
    }
    list.push_back({{"tokens", m.tokens()}, {"vectors", vectors}});
    dim = m.dim();
  }
  return json{{"embeddings", list}, {"dim", dim}}.dump();
}

std::vector<metrics::EmbeddingMatrix> parse_embed_response(std::string_view body, std::size_t expected_count) {
  const json doc = parse_body(body, "embedding response");
  if (!doc.is_object() || !doc.contains("embeddings") || !doc["embeddings"].is_array() || !doc.contains("dim") ||
      !doc["dim"].is_number_integer()) {
    throw GatewayError(ErrorKind::malformed_response, "embedding response needs \"embeddings\" and integer \"dim\"");
  }
  const auto dim = doc["dim"].get<std::size_t>();
  const json& list = doc["embeddings"];
  if (list.size() != expected_count) {
    protocol_error("expected " + std::to_string(expected_count) + " embeddings, got " + std::to_string(list.size()));
  }

  std::vector<metrics::EmbeddingMatrix> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& e = list[i];
    const std::string where = "embedding " + std::to_string(i);
    try {
      auto tokens = e.at("tokens").get<std::vector<std::string>>();
      auto rows = e.at("vectors").get<std::vector<std::vector<double>>>();
      for (const auto& row : rows) {
        if (row.size() != dim) {
          protocol_error(where + " has dimension " + std::to_string(row.size()) + ", batch declares " +
                         std::to_string(dim));
        }
      }
      out.emplace_back(std::move(tokens), std::move(rows));
    } catch (const json::exception& ex) {
      throw GatewayError(ErrorKind::malformed_response, where + ": " + ex.what());
    } catch (const metrics::MetricError& ex) {
      protocol_error(where + ": " + ex.what());
    }
  }
  return out;
}

std::string serialize_error(std::string_view message) { return json{{"error", std::string(message)}}.dump(); }

}  // namespace dashcoach::gateway
