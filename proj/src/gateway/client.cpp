#include <algorithm>
#include <thread>

#include "dashcoach/gateway.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dashcoach::gateway {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string base_path;
};

ParsedUrl split_url(const std::string& url) {
  std::string rest = url;
  std::string scheme = "http";
  if (auto pos = rest.find("://"); pos != std::string::npos) {
    scheme = rest.substr(0, pos);
    rest = rest.substr(pos + 3);
  }
  if (scheme != "http") throw GatewayError(ErrorKind::precondition, "unsupported URL scheme in " + url);
  const auto slash = rest.find('/');
  ParsedUrl out;
  out.origin = scheme + "://" + rest.substr(0, slash);
  if (slash != std::string::npos) out.base_path = rest.substr(slash);
  while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
  if (rest.empty() || slash == 0) throw GatewayError(ErrorKind::precondition, "URL has no host: " + url);
  return out;
}

httplib::Client make_client(const std::string& origin, const RetryPolicy& retry) {
  httplib::Client client(origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(retry.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(retry.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  return client;
}

GatewayError error_from(const httplib::Result& result, const std::string& target) {
  const auto error = result.error();
  if (error == httplib::Error::Read || error == httplib::Error::ConnectionTimeout) {
    return GatewayError(ErrorKind::timeout, "no response from " + target);
  }
  return GatewayError(ErrorKind::transport, target + ": " + httplib::to_string(error));
}

bool retryable(const GatewayError& e) {
  return e.kind() == ErrorKind::timeout || e.kind() == ErrorKind::transport ||
         (e.kind() == ErrorKind::http_status && e.status() >= 500);
}

std::string error_message(const std::string& body) {
  try {
    const auto doc = nlohmann::json::parse(body);
    if (doc.is_object() && doc.contains("error") && doc["error"].is_string()) return doc["error"].get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  return body.substr(0, 200);
}

}  // namespace

HttpModelClient::HttpModelClient(std::string url, RetryPolicy retry) : url_(std::move(url)), retry_(retry) {
  auto parsed = split_url(url_);
  origin_ = std::move(parsed.origin);
  base_path_ = std::move(parsed.base_path);
  if (retry_.max_attempts < 1) throw GatewayError(ErrorKind::precondition, "retry budget must be >= 1");
}

std::string HttpModelClient::post_with_retry(const std::string& path, const std::string& body) const {
  const std::string target = url_ + path;
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      auto client = make_client(origin_, retry_);
      auto result = client.Post(base_path_ + path, body, "application/json");
      if (!result) throw error_from(result, target);
      if (result->status < 200 || result->status >= 300) {
        throw GatewayError(ErrorKind::http_status,
                           target + " answered " + std::to_string(result->status) + ": " + error_message(result->body),
                           result->status);
      }
      return result->body;
    } catch (const GatewayError& e) {
      if (!retryable(e) || attempt >= retry_.max_attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * retry_.backoff_multiplier));
  }
}

std::string HttpModelClient::infer(const InferenceRequest& request) const {
  request.validate();
  return parse_infer_response(post_with_retry("/infer", serialize_request(request)));
}

std::vector<metrics::EmbeddingMatrix> HttpModelClient::embed(std::span<const std::string> texts) const {
  if (texts.empty()) throw GatewayError(ErrorKind::precondition, "embed needs at least one text");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw GatewayError(ErrorKind::precondition, "text " + std::to_string(i) + " is empty");
  }
  return parse_embed_response(post_with_retry("/embed", serialize_embed_request(texts)), texts.size());
}

void HttpModelClient::check_health() const {
  auto client = make_client(origin_, retry_);
  auto result = client.Get(base_path_ + "/healthz");
  if (!result) throw error_from(result, url_ + "/healthz");
  if (result->status != 200) {
    throw GatewayError(ErrorKind::http_status, url_ + "/healthz answered " + std::to_string(result->status),
                       result->status);
  }
}

std::string query_model(const std::string& endpoint, const InferenceRequest& request, const RetryPolicy& retry) {
  request.validate();
  return HttpModelClient(endpoint, retry).infer(request);
}

std::vector<metrics::EmbeddingMatrix> embed(const std::string& endpoint, std::span<const std::string> texts,
                                            const RetryPolicy& retry) {
  return HttpModelClient(endpoint, retry).embed(texts);
}

}  // namespace dashcoach::gateway
