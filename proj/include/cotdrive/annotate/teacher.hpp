#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cotdrive/annotate/types.hpp"
#include "cotdrive/ingest/types.hpp"

namespace cotdrive::annotate {

/// Opaque chat-completion oracle. `send` receives the full transcript so far
/// (ending with the current user prompt) and returns the next response.
class TeacherClient {
 public:
  virtual ~TeacherClient() = default;
  virtual std::string send(const std::vector<ChatMessage>& transcript) = 0;
  virtual Provenance provenance() const = 0;
};

/// Template-based offline teacher computed from window statistics. Responses
/// depend only on (window, seed) and the step reached in the transcript.
class MockTeacher final : public TeacherClient {
 public:
  MockTeacher(ingest::SceneWindow window, std::uint64_t seed);

  std::string send(const std::vector<ChatMessage>& transcript) override;
  Provenance provenance() const override { return Provenance::teacher_mock; }

  std::string response(Step step) const;

 private:
  ingest::SceneWindow window_;
  std::uint64_t seed_;
};

std::unique_ptr<TeacherClient> mock_teacher(const ingest::SceneWindow& window, std::uint64_t seed);

struct TeacherConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4-turbo";
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double backoff_seconds = 1.0;
  /// Requests per second across all sessions sharing the client; 0 disables.
  double rate_limit = 2.0;
  int max_tokens = 512;
  std::string token_env = "COTDRIVE_TEACHER_TOKEN";
};

/// Chat-completion client over HTTP(S). Thread-safe; sessions may share one
/// instance and the rate limit then applies to their union.
class HttpTeacher final : public TeacherClient {
 public:
  explicit HttpTeacher(TeacherConfig config);

  std::string send(const std::vector<ChatMessage>& transcript) override;
  Provenance provenance() const override { return Provenance::teacher_live; }

  static std::string request_body(const TeacherConfig& config, const std::vector<ChatMessage>& transcript);
  /// Extracts choices[0].message.content; throws TeacherError otherwise.
  static std::string parse_response(const std::string& body);

 private:
  void wait_for_slot();

  TeacherConfig config_;
  std::string token_;
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// Builds the client used for one window's session.
using TeacherFactory = std::function<std::shared_ptr<TeacherClient>(const ingest::SceneWindow&)>;

}  // namespace cotdrive::annotate
