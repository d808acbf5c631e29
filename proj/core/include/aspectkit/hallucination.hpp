#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aspectkit/embedding.hpp"
#include "aspectkit/extraction.hpp"
#include "aspectkit/vocab.hpp"

namespace aspectkit {

inline constexpr std::size_t kDefaultSpanDelta = 2;

/// Contiguous token range [start, start + length), 0-based.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t length = 0;

  bool operator==(const TokenSpan&) const = default;
};

/// All spans of length in [max(1, L - delta), L + delta] that fit in the
/// review, ordered by (start, length).
std::vector<TokenSpan> span_candidates(std::span<const std::string> review_tokens,
                                       std::size_t opinion_length, std::size_t delta);

/// Review tokens with prefix sums of their embeddings, so that every span
/// mean is one subtraction. Reused across all opinions of an interaction.
class GroundedReview {
 public:
  GroundedReview(std::string_view review, EmbeddingProvider& provider);

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Verbatim token match scores exactly 1; otherwise the best span cosine.
  double sem_sim(std::string_view opinion, std::size_t delta) const;

 private:
  EmbeddingProvider* provider_;
  std::vector<std::string> tokens_;
  std::vector<Vector> prefix_;  // prefix_[k] = sum of the first k token vectors
};

/// Best cosine between the mean opinion embedding and the mean embedding of
/// any candidate review span. Throws ErrorKind::Input ("ungrounded input")
/// when either text has no tokens.
double sem_sim(std::string_view opinion, std::string_view review, std::size_t delta,
               EmbeddingProvider& provider);

/// Per-interaction drill-down row; values are absent for skipped interactions.
struct InteractionScore {
  InteractionKey key;
  std::optional<double> drift_fraction;
  std::optional<double> mean_semsim;
};

struct MetricReport {
  double adr = 0.0;
  double ofr = 0.0;
  std::size_t n_interactions = 0;   // interactions scored
  std::size_t n_skipped_empty = 0;  // no triples, or extraction failed
  std::size_t delta = kDefaultSpanDelta;
  std::string provider_id;
  std::string corpus_hash;
  std::vector<InteractionScore> rows;  // input order

  nlohmann::json to_json() const;
  std::string rows_csv() const;
};

/// Mean over scored interactions of the fraction of triples whose aspect is
/// outside the vocabulary. Throws ErrorKind::UndefinedMetric when nothing is
/// scorable.
double aspect_drift_rate(std::span<const AnnotatedInteraction> annotated,
                         const AspectVocabulary& vocab);

/// Mean over scored interactions of the mean sem_sim of their opinions.
double opinion_fidelity_rate(std::span<const AnnotatedInteraction> annotated, std::size_t delta,
                             EmbeddingProvider& provider);

/// Both metrics plus per-interaction rows. Scoring is spread over `workers`
/// threads; the result does not depend on the worker count.
MetricReport compute_metrics(std::span<const AnnotatedInteraction> annotated,
                             const AspectVocabulary& vocab, std::size_t delta,
                             EmbeddingProvider& provider, std::string corpus_hash,
                             std::size_t workers = 1);

}  // namespace aspectkit
