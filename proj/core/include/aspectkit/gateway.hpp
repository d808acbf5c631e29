#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "aspectkit/prompt.hpp"

namespace aspectkit {

struct CompletionRequest {
  PromptBundle prompt;
  int max_tokens = 1024;
  double temperature = 0.0;
  std::string model_id;
};

/// Per-stage decoding settings; Stage I and Stage II may use different models.
struct StageSettings {
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 1024;

  CompletionRequest request(PromptBundle prompt) const {
    return {std::move(prompt), max_tokens, temperature, model_id};
  }
};

struct Completion {
  std::string text;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  int attempts = 1;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Canned responses keyed by (prompt kind, unit key).
///
/// Single-unit prompts return the entry verbatim. Multi-unit prompts are
/// answered unit by unit and combined: abstract responses are joined with
/// newlines, aspect responses (JSON arrays) are concatenated into one array.
/// Any missing unit fails the whole prompt with ErrorKind::Unscripted.
class ScriptedProvider final : public CompletionBackend {
 public:
  struct Entry {
    PromptKind kind;
    std::string key;
    std::string response;
  };

  ScriptedProvider() = default;

  /// Reads JSON-lines of {kind, key, response}.
  static ScriptedProvider load(const std::filesystem::path& path);

  /// Re-adding an identical entry is a no-op; a conflicting one throws.
  void add(PromptKind kind, const std::string& key, const std::string& response);
  void merge(const ScriptedProvider& other);

  std::vector<Entry> entries() const;
  std::string to_jsonl() const;
  std::size_t size() const noexcept { return script_.size(); }

  Completion complete(const CompletionRequest& request) override;
  std::string name() const override { return "scripted"; }

 private:
  std::map<std::pair<PromptKind, std::string>, std::string> script_;
};

struct HttpBackendConfig {
  std::string endpoint;  // chat-completions URL
  std::string api_key_env = "LLM_API_KEY";
  int max_retries = 4;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{5000};
  std::chrono::milliseconds timeout{60000};
};

/// Chat-completions client: POST {model, messages, temperature, max_tokens},
/// answer read from choices[0].message.content.
class HttpCompletionBackend final : public CompletionBackend {
 public:
  explicit HttpCompletionBackend(HttpBackendConfig config);

  Completion complete(const CompletionRequest& request) override;
  std::string name() const override { return "http"; }

 private:
  HttpBackendConfig config_;
  std::string api_key_;
};

struct CallRecord {
  std::string prompt_hash;
  PromptKind kind = PromptKind::Dynamic;
  double latency_ms = 0.0;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  int attempts = 0;
  bool ok = false;
  std::string error;
};

/// Front door to a completion backend: bounds in-flight requests and logs
/// every call with (prompt hash, latency, token counts). Safe to share
/// across worker threads if the backend is.
class Gateway {
 public:
  static constexpr std::ptrdiff_t kMaxInFlight = 256;

  explicit Gateway(std::shared_ptr<CompletionBackend> backend, std::size_t max_in_flight = 4);

  std::string complete(const CompletionRequest& request);

  std::vector<CallRecord> calls() const;
  std::string calls_to_jsonl() const;
  const CompletionBackend& backend() const noexcept { return *backend_; }

 private:
  std::shared_ptr<CompletionBackend> backend_;
  std::counting_semaphore<kMaxInFlight> in_flight_;
  mutable std::mutex log_mutex_;
  std::vector<CallRecord> calls_;
};

}  // namespace aspectkit
