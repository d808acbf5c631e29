#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspectkit/corpus.hpp"
#include "aspectkit/embedding.hpp"
#include "aspectkit/gateway.hpp"
#include "aspectkit/prompt.hpp"

namespace aspectkit {

/// Occurrence counts of normalized aspect strings over all partitions'
/// aspect lists (multiset semantics across lists).
struct AspectCandidateSet {
  std::map<std::string, std::uint64_t> counts;

  void add(std::span<const std::string> aspects);
  void merge(const AspectCandidateSet& other);
  std::uint64_t freq(const std::string& aspect) const;
  std::vector<std::string> distinct() const;  // lexicographic
};

struct AspectCluster {
  std::size_t id = 0;
  std::vector<std::string> members;  // lexicographic
  std::vector<std::uint64_t> member_freq;
  std::string representative;
  std::uint64_t freq = 0;            // total member frequency
};

struct VocabularyParams {
  double ratio = 0.2;
  std::size_t partitions = 5;
  std::size_t clusters = 15;
  std::uint64_t seed = 0;
};

/// Stage I output: cluster representatives ordered by descending cluster
/// frequency, then lexicographically.
struct AspectVocabulary {
  std::vector<std::string> aspects;
  std::vector<AspectCluster> clusters;
  VocabularyParams params;
  std::string corpus_hash;

  bool contains(const std::string& aspect) const;
  std::size_t size() const noexcept { return aspects.size(); }
  bool empty() const noexcept { return aspects.empty(); }

  /// Vocabulary over fixed aspects with singleton clusters.
  static AspectVocabulary from_aspects(std::vector<std::string> aspects);

  nlohmann::json to_json() const;
  static AspectVocabulary from_json(const nlohmann::json& j);
};

struct StageOneOptions {
  StageSettings settings;
  std::size_t abstract_budget = 2048;
  std::size_t workers = 1;
};

/// Abstracts each partition in token-budget batches, then asks for its
/// aspect list, and tallies all lists. Errors carry the partition index.
AspectCandidateSet extract_candidate_aspects(const Corpus& corpus,
                                             std::span<const Partition> partitions,
                                             Gateway& gateway, const PromptTemplates& templates,
                                             const StageOneOptions& options);

/// Agglomerative clustering with average linkage on cosine distance. Stops at
/// exactly min(target, n) clusters; equal-distance merges are resolved by the
/// smallest (min member, min member) pair. Returns groups of point indices.
std::vector<std::vector<std::size_t>> average_linkage(std::span<const Vector> points,
                                                      std::span<const std::string> labels,
                                                      std::size_t target);

std::vector<AspectCluster> cluster_aspects(const AspectCandidateSet& candidates,
                                           EmbeddingProvider& provider, std::size_t target);

/// argmax over members a' of sum over members a'' of
/// freq(a'')/sum(freq) * <unit(a'), unit(a'')>; ties go to the higher
/// frequency, then the lexicographically smaller aspect.
std::string select_representative(std::span<const std::string> members,
                                  const AspectCandidateSet& candidates,
                                  EmbeddingProvider& provider);

AspectVocabulary build_vocabulary(const Corpus& corpus, const VocabularyParams& params,
                                  Gateway& gateway, EmbeddingProvider& provider,
                                  const PromptTemplates& templates,
                                  const StageOneOptions& options);

/// |top_n(a) intersect top_n(b)| / top_n over canonical strings.
double vocab_overlap(const AspectVocabulary& a, const AspectVocabulary& b, std::size_t top_n);

/// Pairwise cosine similarity matrix as CSV (header row and column are the terms).
std::string similarity_csv(std::span<const std::string> terms, EmbeddingProvider& provider);

}  // namespace aspectkit
