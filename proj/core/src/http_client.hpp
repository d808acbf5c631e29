#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

namespace aspectkit::detail {

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{5000};
  std::chrono::milliseconds timeout{60000};
};

struct JsonResponse {
  nlohmann::json body;
  int attempts = 0;
};

// POSTs `payload` to `url` (scheme://host[:port]/path) with an optional
// bearer token. Connection failures, 408, 429 and 5xx are retried with
// capped exponential backoff; 401/403 raise ErrorKind::Auth immediately;
// exhausting the retries raises ErrorKind::Unavailable.
JsonResponse post_json(const std::string& url, const nlohmann::json& payload,
                       const std::string& bearer_token, const RetryPolicy& policy);

}  // namespace aspectkit::detail
