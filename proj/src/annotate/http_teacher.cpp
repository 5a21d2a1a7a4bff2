#include "httplib.h"

#include <cstdlib>
#include <regex>
#include <thread>

#include "json.hpp"

#include "cotdrive/annotate/teacher.hpp"
#include "cotdrive/core/error.hpp"

namespace cotdrive::annotate {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("teacher endpoint is not an http(s) URL: " + url);
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpTeacher::HttpTeacher(TeacherConfig config) : config_(std::move(config)) {
  (void)split_url(config_.endpoint);
  if (config_.max_retries < 1) throw ConfigError("teacher max_retries must be at least 1");
  if (const char* tok = std::getenv(config_.token_env.c_str())) token_ = tok;
}

std::string HttpTeacher::request_body(const TeacherConfig& config, const std::vector<ChatMessage>& transcript) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : transcript) messages.push_back({{"role", m.role}, {"content", m.content}});
  return nlohmann::json{{"model", config.model},
                        {"temperature", 0},
                        {"max_tokens", config.max_tokens},
                        {"messages", std::move(messages)}}
      .dump();
}

std::string HttpTeacher::parse_response(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TeacherError(std::string("unexpected teacher response: ") + e.what());
  }
}

void HttpTeacher::wait_for_slot() {
  if (config_.rate_limit <= 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(rate_mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(1.0 / config_.rate_limit));
  }
  std::this_thread::sleep_until(slot);
}

std::string HttpTeacher::send(const std::vector<ChatMessage>& transcript) {
  const Url url = split_url(config_.endpoint);
  const std::string body = request_body(config_, transcript);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  std::string last_error;
  for (int attempt = 0; attempt < config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = config_.backoff_seconds * static_cast<double>(1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    wait_for_slot();
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(config_.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return parse_response(res->body);
    last_error = "HTTP " + std::to_string(res->status);
    if (!retryable(res->status)) break;
  }
  throw TeacherError("teacher request failed after retries: " + last_error);
}

}  // namespace cotdrive::annotate
