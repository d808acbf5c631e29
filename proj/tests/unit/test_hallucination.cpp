#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "aspectkit/error.hpp"
#include "aspectkit/hallucination.hpp"
#include "aspectkit/text.hpp"
#include "test_support.hpp"

namespace aspectkit {
namespace {

using testing::make_interaction;

const std::vector<std::string> kWords{"the",  "sound", "is",    "great", "but",  "price",
                                      "too",  "high",  "very",  "clear", "bass", "cheap",
                                      "feels", "solid", "light", "poor",  "okay", "loud"};

std::string random_text(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::vector<std::string> w;
  for (std::size_t i = 0; i < n; ++i) w.push_back(kWords[pick(rng)]);
  return join(w, " ");
}

// Exhaustive reference: every (start, end) pair, lengths filtered, means
// formed by direct summation.
double oracle_sem_sim(const std::string& opinion, const std::string& review, std::size_t delta,
                      EmbeddingProvider& p) {
  auto o = tokenize(opinion);
  auto r = tokenize(review);
  for (std::size_t s = 0; s + o.size() <= r.size(); ++s) {
    if (std::equal(o.begin(), o.end(), r.begin() + static_cast<std::ptrdiff_t>(s))) return 1.0;
  }
  auto target = mean_pool(p, o);
  const long lo = std::max<long>(1, static_cast<long>(o.size()) - static_cast<long>(delta));
  const long hi = static_cast<long>(o.size() + delta);
  double best = -2.0;
  for (std::size_t s = 0; s < r.size(); ++s) {
    for (std::size_t e = s + 1; e <= r.size(); ++e) {
      const long len = static_cast<long>(e - s);
      if (len < lo || len > hi) continue;
      std::vector<std::string> span(r.begin() + static_cast<std::ptrdiff_t>(s),
                                    r.begin() + static_cast<std::ptrdiff_t>(e));
      best = std::max(best, cosine(target, mean_pool(p, span)));
    }
  }
  return best;
}

AnnotatedInteraction annotated(const std::string& user, std::string review,
                               std::vector<Triple> triples, bool failed = false) {
  AnnotatedInteraction a;
  a.interaction = make_interaction(user, "item", 1, std::move(review));
  a.triples = std::move(triples);
  a.failed = failed;
  return a;
}

TEST(Spans, CountsAndOrder) {
  std::vector<std::string> r{"a", "b", "c", "d"};
  auto s0 = span_candidates(r, 2, 0);
  EXPECT_EQ(s0, (std::vector<TokenSpan>{{0, 2}, {1, 2}, {2, 2}}));
  EXPECT_EQ(span_candidates(r, 2, 1).size(), 9u);
  auto clamp = span_candidates(r, 1, 3);
  EXPECT_EQ(clamp.front(), (TokenSpan{0, 1}));
  EXPECT_EQ(clamp.size(), 10u);  // every span of the review
  EXPECT_THROW(span_candidates(std::vector<std::string>{}, 1, 0), Error);
  EXPECT_THROW(span_candidates(r, 0, 0), Error);
}

TEST(Spans, MatchEnumerationFormula) {
  for (std::size_t m = 1; m <= 12; ++m) {
    std::vector<std::string> r(m, "w");
    for (std::size_t L = 1; L <= 8; ++L) {
      for (std::size_t d = 0; d <= 3; ++d) {
        std::size_t expected = 0;
        const std::size_t lo = L > d ? L - d : 1;
        for (std::size_t len = lo; len <= L + d; ++len) expected += len <= m ? m - len + 1 : 0;
        auto spans = span_candidates(r, L, d);
        EXPECT_EQ(spans.size(), expected);
        EXPECT_TRUE(std::is_sorted(spans.begin(), spans.end(), [](auto a, auto b) {
          return std::tie(a.start, a.length) < std::tie(b.start, b.length);
        }));
      }
    }
  }
}

TEST(SemSim, VerbatimAndIdentity) {
  HashedNgramProvider p;
  const std::string review = "The bass is deep, and the treble is Crystal Clear!";
  EXPECT_EQ(sem_sim("crystal clear", review, 2, p), 1.0);
  EXPECT_EQ(sem_sim("Crystal clear.", review, 0, p), 1.0);
  EXPECT_EQ(sem_sim(review, review, 0, p), 1.0);
  EXPECT_LT(sem_sim("muddy highs", review, 2, p), 1.0);
}

TEST(SemSim, ErrorsOnUngroundedInput) {
  HashedNgramProvider p;
  for (auto [o, r] : std::vector<std::pair<std::string, std::string>>{
           {"", "review"}, {"opinion", ""}, {"...", "review"}, {"ok", " !? "}}) {
    try {
      sem_sim(o, r, 2, p);
      FAIL() << o << "|" << r;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Input);
      EXPECT_NE(std::string(e.what()).find("ungrounded input"), std::string::npos);
    }
  }
}

TEST(SemSim, MatchesExhaustiveOracle) {
  HashedNgramProvider p;
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    auto opinion = random_text(rng, 4);
    auto review = random_text(rng, 12);
    for (std::size_t d = 0; d <= 3; ++d) {
      double got = sem_sim(opinion, review, d, p);
      EXPECT_NEAR(got, oracle_sem_sim(opinion, review, d, p), 1e-12);
      EXPECT_GE(got, 0.0);
      EXPECT_LE(got, 1.0 + 1e-12);
    }
  }
}

TEST(SemSim, MonotoneInDeltaAndReviewExtension) {
  HashedNgramProvider p;
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> olen(1, 5), rlen(1, 15);
  for (int trial = 0; trial < 100; ++trial) {
    auto opinion = random_text(rng, olen(rng));
    auto review = random_text(rng, rlen(rng));
    double prev = -2.0;
    for (std::size_t d = 0; d <= 4; ++d) {
      double s = sem_sim(opinion, review, d, p);
      EXPECT_GE(s, prev);
      prev = s;
    }
    auto longer = review + " " + random_text(rng, 3);
    EXPECT_GE(sem_sim(opinion, longer, 2, p), sem_sim(opinion, review, 2, p));
  }
}

TEST(Metrics, DriftRateExamples) {
  auto vocab = AspectVocabulary::from_aspects({"sound", "price"});
  std::vector<AnnotatedInteraction> xs{
      annotated("a", "good sound", {{"sound", "good", Sentiment::Positive}}),
      annotated("b", "nice box, fair price",
                {{"price", "fair", Sentiment::Positive}, {"box", "nice", Sentiment::Positive}}),
      annotated("c", "empty", {}),
      annotated("d", "failed", {}, true)};
  EXPECT_DOUBLE_EQ(aspect_drift_rate(xs, vocab), 0.25);
  std::vector<AnnotatedInteraction> clean{xs[0]};
  EXPECT_EQ(aspect_drift_rate(clean, vocab), 0.0);

  HashedNgramProvider p;
  auto report = compute_metrics(xs, vocab, 2, p, "hash");
  EXPECT_DOUBLE_EQ(report.adr, 0.25);
  EXPECT_EQ(report.ofr, 1.0);
  EXPECT_EQ(report.n_interactions, 2u);
  EXPECT_EQ(report.n_skipped_empty, 2u);
  EXPECT_FALSE(report.rows[2].drift_fraction.has_value());
  auto j = report.to_json();
  EXPECT_EQ(j["params"]["delta"], 2);
  EXPECT_EQ(j["params"]["corpus_hash"], "hash");
  const auto csv = report.rows_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "user_id,item_id,timestamp,drift_fraction,mean_semsim");
  EXPECT_NE(csv.find("c,item,1,,\n"), std::string::npos);
}

TEST(Metrics, UndefinedWhenNothingScorable) {
  auto vocab = AspectVocabulary::from_aspects({"sound"});
  HashedNgramProvider p;
  std::vector<AnnotatedInteraction> xs{annotated("a", "x", {}), annotated("b", "y", {}, true)};
  for (auto fn : std::vector<std::function<void()>>{
           [&] { aspect_drift_rate(xs, vocab); }, [&] { opinion_fidelity_rate(xs, 2, p); },
           [&] { compute_metrics(xs, vocab, 2, p, ""); }}) {
    try {
      fn();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::UndefinedMetric);
    }
  }
}

TEST(Metrics, FidelityIsMeanOfMeans) {
  HashedNgramProvider p;
  const std::string review = "solid build but the cable feels flimsy";
  std::vector<AnnotatedInteraction> xs{
      annotated("a", review,
                {{"build", "solid build", Sentiment::Positive},
                 {"cable", "weak wire", Sentiment::Negative}}),
      annotated("b", "fine", {{"x", "fine", Sentiment::Neutral}})};
  const double x = sem_sim("solid build", review, 2, p);
  const double y = sem_sim("weak wire", review, 2, p);
  EXPECT_EQ(x, 1.0);
  EXPECT_DOUBLE_EQ(opinion_fidelity_rate(xs, 2, p), ((x + y) / 2.0 + 1.0) / 2.0);
}

TEST(Metrics, PermutationAndWorkerInvariance) {
  auto vocab = AspectVocabulary::from_aspects({"sound", "price", "great"});
  HashedNgramProvider p;
  std::mt19937_64 rng(41);
  std::vector<AnnotatedInteraction> xs;
  std::uniform_int_distribution<std::size_t> n(0, 3), pick(0, kWords.size() - 1);
  for (int i = 0; i < 80; ++i) {
    std::vector<Triple> ts;
    for (std::size_t k = n(rng); k > 0; --k) {
      ts.push_back({kWords[pick(rng)], random_text(rng, 2), Sentiment::Neutral});
    }
    xs.push_back(annotated("u" + std::to_string(i), random_text(rng, 10), ts));
  }
  auto base = compute_metrics(xs, vocab, 2, p, "h", 1);
  EXPECT_EQ(base.adr, aspect_drift_rate(xs, vocab));
  EXPECT_EQ(base.ofr, opinion_fidelity_rate(xs, 2, p));
  for (int trial = 0; trial < 10; ++trial) {
    auto shuffled = xs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto r = compute_metrics(shuffled, vocab, 2, p, "h", 1 + static_cast<std::size_t>(trial % 4));
    EXPECT_EQ(r.adr, base.adr);
    EXPECT_EQ(r.ofr, base.ofr);
    EXPECT_EQ(r.n_skipped_empty, base.n_skipped_empty);
  }
  EXPECT_GE(base.adr, 0.0);
  EXPECT_LE(base.adr, 1.0);
}

TEST(Metrics, AllDriftedGivesOne) {
  auto vocab = AspectVocabulary::from_aspects({"sound"});
  std::vector<AnnotatedInteraction> xs{
      annotated("a", "x y", {{"other", "x", Sentiment::Neutral}, {"else", "y", Sentiment::Neutral}})};
  EXPECT_EQ(aspect_drift_rate(xs, vocab), 1.0);
}

}  // namespace
}  // namespace aspectkit
