// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP transports for the decoder and chat-completion endpoints.

#include "promptac/llm_env.hpp"

#include <cstdlib>
#include <thread>

// Eigen must come first: <resolv.h>, pulled in by httplib, defines `_res`.
#include <httplib.h>

#include "promptac/errors.hpp"

namespace promptac::llm {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

struct Reply {
  int status = 0;
  std::string body;
};

// Posts `body` with bounded retries. Connection failures, 408, 429 and 5xx are
// retried with exponential backoff (429 honours Retry-After) until the attempt
// count or the wall-clock budget runs out.
Reply post_with_retry(const std::string& base_url, const std::string& path, const httplib::Headers& headers,
                      const json& body, std::chrono::milliseconds timeout, const RetryPolicy& retry,
                      const std::shared_ptr<AuditLog>& audit, const char* endpoint) {
  httplib::Client client(base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const std::string payload = body.dump();
  const auto deadline = Clock::now() + retry.total_budget;
  std::string last_error;
  int last_status = 0;
  for (int attempt = 0; attempt < std::max(retry.max_attempts, 1); ++attempt) {
    auto res = client.Post(path, headers, payload, "application/json");
    std::chrono::milliseconds wait = retry.backoff(attempt);
    if (res) {
      last_status = res->status;
      if (audit) {
        audit->write({{"endpoint", endpoint}, {"attempt", attempt}, {"request", body}, {"status", res->status},
                      {"response", res->body}});
      }
      if (res->status >= 200 && res->status < 300) return Reply{res->status, res->body};
      last_error = "HTTP " + std::to_string(res->status);
      if (!retryable_status(res->status)) throw TransportError(false, res->status, std::string(endpoint) + ": " + last_error);
      if (res->status == 429 && res->has_header("Retry-After")) {
        const long long ra = std::atoll(res->get_header_value("Retry-After").c_str());
        if (ra > 0) wait = std::max(wait, std::chrono::milliseconds(ra * 1000));
      }
    } else {
      last_error = httplib::to_string(res.error());
      if (audit) {
        audit->write({{"endpoint", endpoint}, {"attempt", attempt}, {"request", body}, {"error", last_error}});
      }
    }
    if (attempt + 1 >= retry.max_attempts || Clock::now() + wait > deadline) break;
    std::this_thread::sleep_for(wait);
  }
  throw TransportError(false, last_status, std::string(endpoint) + " failed after retries: " + last_error);
}

}  // namespace

std::string parse_chat_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::kProtocol, "chat response is not JSON");
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error(ErrorCode::kProtocol, "chat response has no choices");
  }
  const json& choice = j["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string()) {
    throw Error(ErrorCode::kProtocol, "chat response choice has no message content");
  }
  return choice["message"]["content"].get<std::string>();
}

std::string parse_decode_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::kProtocol, "decode response is not JSON");
  }
  if (!j.is_object() || !j.contains("instruction") || !j["instruction"].is_string()) {
    throw Error(ErrorCode::kProtocol, "decode response has no 'instruction' string");
  }
  return j["instruction"].get<std::string>();
}

HttpDecoder::HttpDecoder(HttpDecoderConfig config, std::shared_ptr<AuditLog> audit)
    : config_(std::move(config)), audit_(std::move(audit)) {
  if (config_.soft_tokens <= 0 || config_.token_width <= 0) {
    throw Error(ErrorCode::kInvalidConfiguration, "soft prompt shape must be positive");
  }
}

json HttpDecoder::request_body(const Eigen::VectorXd& z, const std::string& exemplar_prompt) const {
  const Eigen::Index width = config_.token_width;
  if (z.size() != static_cast<Eigen::Index>(config_.soft_tokens) * width) {
    throw Error(ErrorCode::kShape, "soft prompt has length " + std::to_string(z.size()) + ", expected " +
                                       std::to_string(config_.soft_tokens) + "x" + std::to_string(width));
  }
  json rows = json::array();
  for (int t = 0; t < config_.soft_tokens; ++t) {
    json row = json::array();
    for (Eigen::Index c = 0; c < width; ++c) row.push_back(z(t * width + c));
    rows.push_back(std::move(row));
  }
  return {{"soft_prompt", std::move(rows)}, {"exemplar_prompt", exemplar_prompt}, {"max_tokens", config_.max_tokens}};
}

std::string HttpDecoder::decode(const Eigen::VectorXd& z, const std::string& exemplar_prompt) const {
  const auto reply = post_with_retry(config_.base_url, config_.path, {}, request_body(z, exemplar_prompt),
                                     config_.timeout, config_.retry, audit_, "decode");
  return parse_decode_response(reply.body);
}

ChatBlackBox::ChatBlackBox(ChatConfig config, std::shared_ptr<AuditLog> audit)
    : config_(std::move(config)), audit_(std::move(audit)) {
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
}

json ChatBlackBox::request_body(const std::string& prompt) const {
  return {{"model", config_.model},
          {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
          {"temperature", config_.temperature},
          {"max_tokens", config_.max_tokens}};
}

std::string ChatBlackBox::do_complete(const std::string& prompt) {
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const auto reply = post_with_retry(config_.base_url, config_.path, headers, request_body(prompt), config_.timeout,
                                     config_.retry, audit_, "chat");
  return parse_chat_response(reply.body);
}

}  // namespace promptac::llm
