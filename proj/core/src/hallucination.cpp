#include "aspectkit/hallucination.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <sstream>
#include <thread>

#include "aspectkit/error.hpp"
#include "aspectkit/text.hpp"

namespace aspectkit {

using nlohmann::json;

std::vector<TokenSpan> span_candidates(std::span<const std::string> review_tokens,
                                       std::size_t opinion_length, std::size_t delta) {
  if (review_tokens.empty()) throw Error(ErrorKind::Input, "ungrounded input: empty review");
  if (opinion_length == 0) throw Error(ErrorKind::Input, "ungrounded input: empty opinion");
  const std::size_t m = review_tokens.size();
  const std::size_t lo = opinion_length > delta ? opinion_length - delta : 1;
  const std::size_t hi = std::min(opinion_length + delta, m);
  std::vector<TokenSpan> out;
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t len = lo; len <= hi && s + len <= m; ++len) out.push_back({s, len});
  }
  return out;
}

namespace {

bool contains_run(std::span<const std::string> haystack, std::span<const std::string> needle) {
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

}  // namespace

GroundedReview::GroundedReview(std::string_view review, EmbeddingProvider& provider)
    : provider_(&provider), tokens_(tokenize(review)) {
  if (tokens_.empty()) throw Error(ErrorKind::Input, "ungrounded input: empty review");
  prefix_.assign(tokens_.size() + 1, Vector(provider.dim(), 0.0));
  for (std::size_t k = 0; k < tokens_.size(); ++k) {
    auto v = provider.embed(tokens_[k]);
    for (std::size_t d = 0; d < v.size(); ++d) prefix_[k + 1][d] = prefix_[k][d] + v[d];
  }
}

double GroundedReview::sem_sim(std::string_view opinion, std::size_t delta) const {
  auto op = tokenize(opinion);
  if (op.empty()) throw Error(ErrorKind::Input, "ungrounded input: empty opinion");
  if (contains_run(tokens_, op)) return 1.0;

  // Cosine ignores scale, so span sums stand in for span means.
  Vector target(provider_->dim(), 0.0);
  for (const auto& t : op) {
    auto v = provider_->embed(t);
    for (std::size_t d = 0; d < v.size(); ++d) target[d] += v[d];
  }
  double best = -1.0;
  Vector span_sum(provider_->dim());
  for (const auto& s : span_candidates(tokens_, op.size(), delta)) {
    const auto& a = prefix_[s.start];
    const auto& b = prefix_[s.start + s.length];
    for (std::size_t d = 0; d < span_sum.size(); ++d) span_sum[d] = b[d] - a[d];
    best = std::max(best, cosine(target, span_sum));
  }
  return best;
}

double sem_sim(std::string_view opinion, std::string_view review, std::size_t delta,
               EmbeddingProvider& provider) {
  if (tokenize(opinion).empty()) throw Error(ErrorKind::Input, "ungrounded input: empty opinion");
  return GroundedReview(review, provider).sem_sim(opinion, delta);
}

namespace {

bool scorable(const AnnotatedInteraction& a) { return !a.failed && !a.triples.empty(); }

double drift_fraction(const AnnotatedInteraction& a, const AspectVocabulary& vocab) {
  std::size_t drifted = 0;
  for (const auto& t : a.triples) drifted += vocab.contains(t.aspect) ? 0 : 1;
  return static_cast<double>(drifted) / static_cast<double>(a.triples.size());
}

double mean_semsim(const AnnotatedInteraction& a, std::size_t delta, EmbeddingProvider& provider) {
  GroundedReview review(a.interaction.review, provider);
  double sum = 0.0;
  for (const auto& t : a.triples) sum += review.sem_sim(t.opinion, delta);
  return sum / static_cast<double>(a.triples.size());
}

// Sorting before summing makes the mean independent of interaction order.
double order_free_mean(std::vector<double> values) {
  if (values.empty()) {
    throw Error(ErrorKind::UndefinedMetric, "no interaction with extracted triples");
  }
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

double aspect_drift_rate(std::span<const AnnotatedInteraction> annotated,
                         const AspectVocabulary& vocab) {
  std::vector<double> values;
  for (const auto& a : annotated) {
    if (scorable(a)) values.push_back(drift_fraction(a, vocab));
  }
  return order_free_mean(std::move(values));
}

double opinion_fidelity_rate(std::span<const AnnotatedInteraction> annotated, std::size_t delta,
                             EmbeddingProvider& provider) {
  std::vector<double> values;
  for (const auto& a : annotated) {
    if (scorable(a)) values.push_back(mean_semsim(a, delta, provider));
  }
  return order_free_mean(std::move(values));
}

MetricReport compute_metrics(std::span<const AnnotatedInteraction> annotated,
                             const AspectVocabulary& vocab, std::size_t delta,
                             EmbeddingProvider& provider, std::string corpus_hash,
                             std::size_t workers) {
  MetricReport report;
  report.delta = delta;
  report.provider_id = provider.id();
  report.corpus_hash = std::move(corpus_hash);
  report.rows.resize(annotated.size());
  parallel_for(annotated.size(), workers, [&](std::size_t i) {
    const auto& a = annotated[i];
    auto& row = report.rows[i];
    row.key = key_of(a.interaction);
    if (!scorable(a)) return;
    row.drift_fraction = drift_fraction(a, vocab);
    row.mean_semsim = mean_semsim(a, delta, provider);
  });

  std::vector<double> drift;
  std::vector<double> fidelity;
  for (const auto& row : report.rows) {
    if (!row.drift_fraction) {
      ++report.n_skipped_empty;
      continue;
    }
    drift.push_back(*row.drift_fraction);
    fidelity.push_back(*row.mean_semsim);
  }
  report.n_interactions = drift.size();
  report.adr = order_free_mean(std::move(drift));
  report.ofr = order_free_mean(std::move(fidelity));
  return report;
}

json MetricReport::to_json() const {
  return {{"adr", adr},
          {"ofr", ofr},
          {"n_interactions", n_interactions},
          {"n_skipped_empty", n_skipped_empty},
          {"params", {{"delta", delta}, {"provider", provider_id}, {"corpus_hash", corpus_hash}}}};
}

std::string MetricReport::rows_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "user_id,item_id,timestamp,drift_fraction,mean_semsim\n";
  for (const auto& r : rows) {
    out << csv_field(r.key.user_id) << ',' << csv_field(r.key.item_id) << ','
        << r.key.timestamp << ',';
    if (r.drift_fraction) out << *r.drift_fraction;
    out << ',';
    if (r.mean_semsim) out << *r.mean_semsim;
    out << '\n';
  }
  return out.str();
}

}  // namespace aspectkit
