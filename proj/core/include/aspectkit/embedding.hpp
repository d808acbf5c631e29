#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aspectkit {

using Vector = std::vector<double>;

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> v);

/// Cosine similarity in [-1, 1]. Throws ErrorKind::UndefinedMetric for a
/// zero vector and ErrorKind::Input for mismatched dimensions.
double cosine(std::span<const double> u, std::span<const double> v);

/// Embedding function with a content-addressed cache.
///
/// Texts are normalized (trim + lowercase) before lookup, so case variants
/// share one vector. The cache allows concurrent readers; insertions are
/// serialized and first-writer-wins, so results do not depend on thread
/// interleaving.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  std::size_t dim() const noexcept { return dim_; }
  const std::string& id() const noexcept { return id_; }

  Vector embed(std::string_view text);
  std::vector<Vector> embed_batch(std::span<const std::string> texts);

  std::size_t cache_size() const;
  void save_cache(const std::filesystem::path& path) const;
  /// Merges a cache file written by a provider with the same id and dim.
  void load_cache(const std::filesystem::path& path);

 protected:
  EmbeddingProvider(std::string id, std::size_t dim);
  void set_dim(std::size_t dim) { dim_ = dim; }

  /// Inputs are normalized and non-empty; outputs must have dim() finite components.
  virtual std::vector<Vector> compute(std::span<const std::string> normalized) = 0;

 private:
  std::string id_;
  std::size_t dim_;
  mutable std::shared_mutex cache_mutex_;
  std::unordered_map<std::string, Vector> cache_;  // key: sha256 of normalized text
};

/// Head term for each alias. An alias embeds close to its head term, which
/// lets the offline provider express synonym structure.
struct AliasLexicon {
  std::map<std::string, std::string> alias_to_head;

  bool empty() const noexcept { return alias_to_head.empty(); }
  static AliasLexicon load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string fingerprint() const;
};

/// Offline deterministic embedder: character 3-grams of "#text#" hashed
/// (FNV-1a) into `dim` nonnegative buckets, then L2-normalized. An alias `a`
/// of head `h` embeds as normalize(g(a) + alias_weight * g(h)) where g is
/// the normalized n-gram vector.
class HashedNgramProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 256;

  explicit HashedNgramProvider(std::size_t dim = kDefaultDim, AliasLexicon lexicon = {},
                               double alias_weight = 3.0);

 protected:
  std::vector<Vector> compute(std::span<const std::string> normalized) override;

 private:
  Vector ngram_vector(std::string_view text) const;

  AliasLexicon lexicon_;
  double alias_weight_;
};

struct HttpEmbeddingConfig {
  std::string endpoint;
  std::string model;
  std::size_t dim = 0;  // 0: take from the first response
  std::string api_key_env = "LLM_API_KEY";
  int max_retries = 4;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds timeout{60000};
};

/// POST {model, input:[texts]} -> {data:[{embedding:[...]}]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig config);

 protected:
  std::vector<Vector> compute(std::span<const std::string> normalized) override;

 private:
  HttpEmbeddingConfig config_;
  std::string api_key_;
  std::mutex dim_mutex_;
};

/// Arithmetic mean of the token embeddings; not re-normalized.
Vector mean_pool(EmbeddingProvider& provider, std::span<const std::string> tokens);

}  // namespace aspectkit
