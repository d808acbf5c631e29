#include "aspectkit/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aspectkit/error.hpp"
#include "aspectkit/hash.hpp"
#include "aspectkit/text.hpp"
#include "http_client.hpp"

namespace aspectkit {

using nlohmann::json;

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::Input, "cosine of vectors with different dimensions");
  }
  double nu = l2_norm(u);
  double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorKind::UndefinedMetric, "undefined similarity");
  double c = dot(u, v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

EmbeddingProvider::EmbeddingProvider(std::string id, std::size_t dim)
    : id_(std::move(id)), dim_(dim) {}

Vector EmbeddingProvider::embed(std::string_view text) {
  std::string one(text);
  return embed_batch(std::span<const std::string>(&one, 1)).front();
}

std::vector<Vector> EmbeddingProvider::embed_batch(std::span<const std::string> texts) {
  std::vector<Vector> out(texts.size());
  std::vector<std::string> keys(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_at;
  {
    std::shared_lock lock(cache_mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto norm = normalize_text(texts[i]);
      if (norm.empty()) throw Error(ErrorKind::Input, "cannot embed empty text");
      keys[i] = sha256_hex(norm);
      if (auto it = cache_.find(keys[i]); it != cache_.end()) {
        out[i] = it->second;
      } else {
        missing.push_back(std::move(norm));
        missing_at.push_back(i);
      }
    }
  }
  if (missing.empty()) return out;

  auto fresh = compute(missing);
  if (fresh.size() != missing.size()) {
    throw Error(ErrorKind::Backend, "embedding backend returned wrong number of vectors");
  }
  std::unique_lock lock(cache_mutex_);
  for (std::size_t j = 0; j < fresh.size(); ++j) {
    if (fresh[j].size() != dim_) {
      throw Error(ErrorKind::Backend, "embedding has dimension " + std::to_string(fresh[j].size()) +
                                          ", expected " + std::to_string(dim_));
    }
    for (double c : fresh[j]) {
      if (!std::isfinite(c)) throw Error(ErrorKind::Backend, "non-finite embedding component");
    }
    auto [it, _] = cache_.emplace(keys[missing_at[j]], std::move(fresh[j]));
    out[missing_at[j]] = it->second;
  }
  return out;
}

std::size_t EmbeddingProvider::cache_size() const {
  std::shared_lock lock(cache_mutex_);
  return cache_.size();
}

void EmbeddingProvider::save_cache(const std::filesystem::path& path) const {
  json entries = json::object();
  {
    std::shared_lock lock(cache_mutex_);
    for (const auto& [k, v] : cache_) entries[k] = v;
  }
  json j = {{"format", "aspectkit-embedding-cache"},
            {"version", 1},
            {"provider", id_},
            {"dim", dim_},
            {"entries", std::move(entries)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Input, "cannot write " + path.string());
  out << j.dump() << '\n';
}

void EmbeddingProvider::load_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Input, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Input, "bad embedding cache " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "aspectkit-embedding-cache" || j.value("version", 0) != 1) {
    throw Error(ErrorKind::Input, "unsupported embedding cache format in " + path.string());
  }
  if (j.value("provider", "") != id_ || j.value("dim", std::size_t{0}) != dim_) {
    throw Error(ErrorKind::Input, "embedding cache " + path.string() + " belongs to provider " +
                                      j.value("provider", "?"));
  }
  std::unique_lock lock(cache_mutex_);
  for (const auto& [k, v] : j.at("entries").items()) {
    auto vec = v.get<Vector>();
    if (vec.size() != dim_) throw Error(ErrorKind::Input, "cache entry with wrong dimension");
    cache_.emplace(k, std::move(vec));
  }
}

AliasLexicon AliasLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read alias lexicon " + path.string());
  AliasLexicon lex;
  try {
    json j = json::parse(in);
    for (const auto& [alias, head] : j.at("aliases").items()) {
      lex.alias_to_head[normalize_text(alias)] = normalize_text(head.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, "bad alias lexicon " + path.string() + ": " + e.what());
  }
  return lex;
}

void AliasLexicon::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Input, "cannot write " + path.string());
  out << json{{"aliases", alias_to_head}}.dump(2) << '\n';
}

std::string AliasLexicon::fingerprint() const {
  if (alias_to_head.empty()) return "none";
  return short_hash(json(alias_to_head).dump());
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void normalize_in_place(Vector& v) {
  double n = l2_norm(v);
  if (n > 0.0) {
    for (double& c : v) c /= n;
  }
}

}  // namespace

HashedNgramProvider::HashedNgramProvider(std::size_t dim, AliasLexicon lexicon,
                                         double alias_weight)
    : EmbeddingProvider("hashed-ngram/d" + std::to_string(dim) + "/aliases:" +
                            lexicon.fingerprint(),
                        dim),
      lexicon_(std::move(lexicon)),
      alias_weight_(alias_weight) {
  if (dim == 0) throw Error(ErrorKind::Config, "embedding dimension must be positive");
  if (!(alias_weight >= 0.0)) throw Error(ErrorKind::Config, "alias weight must be >= 0");
}

Vector HashedNgramProvider::ngram_vector(std::string_view text) const {
  std::string padded = "#" + std::string(text) + "#";
  Vector v(dim(), 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    v[fnv1a(std::string_view(padded).substr(i, 3)) % dim()] += 1.0;
  }
  normalize_in_place(v);
  return v;
}

std::vector<Vector> HashedNgramProvider::compute(std::span<const std::string> normalized) {
  std::vector<Vector> out;
  out.reserve(normalized.size());
  for (const auto& text : normalized) {
    Vector v = ngram_vector(text);
    if (auto it = lexicon_.alias_to_head.find(text); it != lexicon_.alias_to_head.end()) {
      Vector head = ngram_vector(it->second);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += alias_weight_ * head[i];
      normalize_in_place(v);
    }
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig config)
    : EmbeddingProvider("http/" + config.model, config.dim), config_(std::move(config)) {
  if (config_.endpoint.empty()) {
    throw Error(ErrorKind::Config, "http embedding provider needs an endpoint URL");
  }
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr) api_key_ = key;
}

std::vector<Vector> HttpEmbeddingProvider::compute(std::span<const std::string> normalized) {
  json payload = {{"model", config_.model},
                  {"input", std::vector<std::string>(normalized.begin(), normalized.end())}};
  detail::RetryPolicy policy;
  policy.max_retries = config_.max_retries;
  policy.initial_backoff = config_.initial_backoff;
  policy.timeout = config_.timeout;
  auto res = detail::post_json(config_.endpoint, payload, api_key_, policy);
  std::vector<Vector> out;
  try {
    for (const auto& item : res.body.at("data")) out.push_back(item.at("embedding").get<Vector>());
  } catch (const json::exception&) {
    throw Error(ErrorKind::Backend, "embedding response lacks data[].embedding");
  }
  std::lock_guard lock(dim_mutex_);
  if (dim() == 0 && !out.empty()) set_dim(out.front().size());
  return out;
}

Vector mean_pool(EmbeddingProvider& provider, std::span<const std::string> tokens) {
  if (tokens.empty()) throw Error(ErrorKind::Input, "mean pooling needs at least one token");
  auto vecs = provider.embed_batch(tokens);
  Vector mean(vecs.front().size(), 0.0);
  for (const auto& v : vecs) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
  }
  const double n = static_cast<double>(vecs.size());
  for (double& c : mean) c /= n;
  return mean;
}

}  // namespace aspectkit
