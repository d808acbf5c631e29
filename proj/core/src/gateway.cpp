#include "aspectkit/gateway.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "aspectkit/error.hpp"
#include "aspectkit/hash.hpp"
#include "aspectkit/text.hpp"
#include "http_client.hpp"

namespace aspectkit {

using nlohmann::json;

ScriptedProvider ScriptedProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read script " + path.string());
  ScriptedProvider p;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      p.add(parse_prompt_kind(j.at("kind").get<std::string>()), j.at("key").get<std::string>(),
            j.at("response").get<std::string>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return p;
}

void ScriptedProvider::add(PromptKind kind, const std::string& key, const std::string& response) {
  auto [it, fresh] = script_.emplace(std::make_pair(kind, key), response);
  if (!fresh && it->second != response) {
    throw Error(ErrorKind::Config, "conflicting scripted responses for " +
                                       std::string(to_string(kind)) + " key " + key);
  }
}

void ScriptedProvider::merge(const ScriptedProvider& other) {
  for (const auto& [k, v] : other.script_) add(k.first, k.second, v);
}

std::vector<ScriptedProvider::Entry> ScriptedProvider::entries() const {
  std::vector<Entry> out;
  out.reserve(script_.size());
  for (const auto& [k, v] : script_) out.push_back({k.first, k.second, v});
  return out;
}

std::string ScriptedProvider::to_jsonl() const {
  std::string out;
  for (const auto& [k, v] : script_) {
    out += json{{"kind", std::string(to_string(k.first))}, {"key", k.second}, {"response", v}}
               .dump();
    out += '\n';
  }
  return out;
}

Completion ScriptedProvider::complete(const CompletionRequest& request) {
  const auto& prompt = request.prompt;
  if (prompt.unit_keys.empty()) {
    throw Error(ErrorKind::Unscripted, "unscripted prompt: no unit keys on " +
                                           std::string(to_string(prompt.kind)) + " prompt");
  }
  std::vector<const std::string*> parts;
  for (const auto& key : prompt.unit_keys) {
    auto it = script_.find({prompt.kind, key});
    if (it == script_.end()) {
      throw Error(ErrorKind::Unscripted, "unscripted prompt: " +
                                             std::string(to_string(prompt.kind)) + " key " + key);
    }
    parts.push_back(&it->second);
  }

  Completion c;
  if (parts.size() == 1) {
    c.text = *parts.front();
  } else if (prompt.kind == PromptKind::Aspect) {
    json merged = json::array();
    bool all_arrays = true;
    for (const auto* p : parts) {
      json j = json::parse(*p, nullptr, false);
      if (j.is_discarded() || !j.is_array()) {
        all_arrays = false;
        break;
      }
      for (auto& el : j) merged.push_back(std::move(el));
    }
    if (all_arrays) {
      c.text = merged.dump();
    } else {
      for (const auto* p : parts) c.text += (c.text.empty() ? "" : "\n") + *p;
    }
  } else {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i > 0) c.text += '\n';
      c.text += *parts[i];
    }
  }
  c.prompt_tokens = word_count(prompt.rendered);
  c.completion_tokens = word_count(c.text);
  return c;
}

HttpCompletionBackend::HttpCompletionBackend(HttpBackendConfig config)
    : config_(std::move(config)) {
  if (config_.endpoint.empty()) {
    throw Error(ErrorKind::Config, "http backend needs an endpoint URL");
  }
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr) api_key_ = key;
}

Completion HttpCompletionBackend::complete(const CompletionRequest& request) {
  json payload = {{"model", request.model_id},
                  {"messages", json::array({{{"role", "user"}, {"content", request.prompt.rendered}}})},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_tokens}};
  detail::RetryPolicy policy{config_.max_retries, config_.initial_backoff, config_.max_backoff,
                             config_.timeout};
  auto res = detail::post_json(config_.endpoint, payload, api_key_, policy);
  const auto& body = res.body;
  Completion c;
  c.attempts = res.attempts;
  try {
    c.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Backend, "completion response lacks choices[0].message.content");
  }
  if (body.contains("usage") && body["usage"].is_object()) {
    c.prompt_tokens = body["usage"].value("prompt_tokens", std::size_t{0});
    c.completion_tokens = body["usage"].value("completion_tokens", std::size_t{0});
  }
  return c;
}

Gateway::Gateway(std::shared_ptr<CompletionBackend> backend, std::size_t max_in_flight)
    : backend_(std::move(backend)),
      in_flight_(static_cast<std::ptrdiff_t>(
          std::clamp<std::size_t>(max_in_flight, 1, static_cast<std::size_t>(kMaxInFlight)))) {
  if (!backend_) throw Error(ErrorKind::Config, "gateway needs a backend");
}

std::string Gateway::complete(const CompletionRequest& request) {
  if (request.max_tokens <= 0) throw Error(ErrorKind::Config, "max_tokens must be positive");
  if (request.temperature < 0.0) throw Error(ErrorKind::Config, "temperature must be >= 0");

  CallRecord rec;
  rec.prompt_hash = short_hash(request.prompt.rendered);
  rec.kind = request.prompt.kind;

  in_flight_.acquire();
  auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    in_flight_.release();
    rec.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               start)
                         .count();
    std::lock_guard lock(log_mutex_);
    calls_.push_back(rec);
  };
  try {
    Completion c = backend_->complete(request);
    rec.ok = true;
    rec.attempts = c.attempts;
    rec.prompt_tokens = c.prompt_tokens;
    rec.completion_tokens = c.completion_tokens;
    finish();
    return std::move(c.text);
  } catch (const std::exception& e) {
    rec.error = e.what();
    finish();
    throw;
  }
}

std::vector<CallRecord> Gateway::calls() const {
  std::lock_guard lock(log_mutex_);
  return calls_;
}

std::string Gateway::calls_to_jsonl() const {
  std::string out;
  for (const auto& c : calls()) {
    out += json{{"prompt_hash", c.prompt_hash},
                {"kind", std::string(to_string(c.kind))},
                {"latency_ms", c.latency_ms},
                {"prompt_tokens", c.prompt_tokens},
                {"completion_tokens", c.completion_tokens},
                {"attempts", c.attempts},
                {"ok", c.ok},
                {"error", c.error}}
               .dump();
    out += '\n';
  }
  return out;
}

}  // namespace aspectkit
