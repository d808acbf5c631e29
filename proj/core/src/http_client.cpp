#include "http_client.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

#include "aspectkit/error.hpp"

namespace aspectkit::detail {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::Config, "endpoint '" + url + "' lacks a scheme");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool transient_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status <= 599);
}

}  // namespace

JsonResponse post_json(const std::string& url, const nlohmann::json& payload,
                       const std::string& bearer_token, const RetryPolicy& policy) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  auto secs = [](std::chrono::milliseconds ms) {
    return std::make_pair(static_cast<time_t>(ms.count() / 1000),
                          static_cast<time_t>((ms.count() % 1000) * 1000));
  };
  auto [ts, tus] = secs(policy.timeout);
  client.set_connection_timeout(ts, tus);
  client.set_read_timeout(ts, tus);
  client.set_write_timeout(ts, tus);

  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  const std::string body = payload.dump();
  std::string last_failure = "no attempt made";
  auto backoff = policy.initial_backoff;
  const int attempts = std::max(0, policy.max_retries) + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto res = client.Post(path, headers, body, "application/json");
    if (res) {
      if (res->status == 401 || res->status == 403) {
        throw Error(ErrorKind::Auth, "endpoint " + url + " rejected the credential (HTTP " +
                                         std::to_string(res->status) + ")");
      }
      if (res->status >= 200 && res->status < 300) {
        try {
          return {nlohmann::json::parse(res->body), attempt};
        } catch (const nlohmann::json::parse_error&) {
          throw Error(ErrorKind::Backend, "endpoint " + url + " returned non-JSON body");
        }
      }
      if (!transient_status(res->status)) {
        throw Error(ErrorKind::Backend,
                    "endpoint " + url + " answered HTTP " + std::to_string(res->status));
      }
      last_failure = "HTTP " + std::to_string(res->status);
    } else {
      last_failure = httplib::to_string(res.error());
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, policy.max_backoff);
    }
  }
  throw Error(ErrorKind::Unavailable, "timeout after retries: " + url + " (" +
                                          std::to_string(attempts) + " attempts, last: " +
                                          last_failure + ")");
}

}  // namespace aspectkit::detail
