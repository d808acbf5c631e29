#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "aspectkit/error.hpp"
#include "aspectkit/extraction.hpp"
#include "aspectkit/hallucination.hpp"
#include "aspectkit/synth.hpp"
#include "aspectkit/text.hpp"

namespace aspectkit {
namespace {

class Synth : public ::testing::Test {
 protected:
  SynthLexicon lex = SynthLexicon::builtin();

  WorldSpec small(std::uint64_t seed = 1) const {
    WorldSpec s;
    s.n_users = 20;
    s.n_items = 15;
    s.n_interactions = 200;
    s.seed = seed;
    return s;
  }

  std::vector<AnnotatedInteraction> run_scripted(const SynthWorld& w, const ScriptOptions& o,
                                                 const AspectVocabulary& vocab) {
    auto script = std::make_shared<ScriptedProvider>(
        script_extraction_responses(w.corpus, w.truth, o, lex));
    Gateway gateway(script);
    return run_stage2(w.corpus, vocab, gateway, PromptTemplates::builtin(), {}).annotated;
  }
};

TEST(Zipf, ProbabilitiesNormalisedAndPowerLaw) {
  auto p = zipf_probabilities(15, 1.0);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  for (std::size_t k = 1; k < p.size(); ++k) {
    EXPECT_NEAR(p[0] / p[k], static_cast<double>(k + 1), 1e-9);
  }
}

TEST_F(Synth, AspectFrequenciesFollowZipf) {
  WorldSpec s;
  s.n_users = 100;
  s.n_items = 50;
  s.n_interactions = 10000;
  s.min_mentions = s.max_mentions = 1;
  s.max_fillers = 0;
  s.seed = 7;
  auto w = generate_corpus(s, lex);
  std::map<std::string, std::size_t> rank;
  for (std::size_t g = 0; g < w.truth.aspects.size(); ++g) rank[w.truth.aspects[g]] = g;
  std::vector<double> observed(s.n_aspects, 0.0);
  for (const auto& ms : w.truth.mentions) {
    ASSERT_EQ(ms.size(), 1u);
    observed[rank.at(ms[0].triple.aspect)] += 1.0;
  }
  const auto p = zipf_probabilities(s.n_aspects, s.zipf_s);
  double chi2 = 0.0;
  for (std::size_t g = 0; g < p.size(); ++g) {
    const double expected = p[g] * static_cast<double>(s.n_interactions);
    chi2 += (observed[g] - expected) * (observed[g] - expected) / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(p.size() - 1));
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01) << "chi2 " << chi2;
}

TEST_F(Synth, DeterministicPerSeed) {
  auto a = generate_corpus(small(3), lex);
  auto b = generate_corpus(small(3), lex);
  EXPECT_EQ(a.corpus.id(), b.corpus.id());
  EXPECT_EQ(a.truth.to_json(), b.truth.to_json());
  EXPECT_NE(generate_corpus(small(4), lex).corpus.id(), a.corpus.id());
  ScriptOptions o{0.2, 1, 5};
  EXPECT_EQ(script_extraction_responses(a.corpus, a.truth, o, lex).to_jsonl(),
            script_extraction_responses(b.corpus, b.truth, o, lex).to_jsonl());
}

TEST_F(Synth, ReviewsContainTheirMentionsVerbatim) {
  auto w = generate_corpus(small(), lex);
  ASSERT_EQ(w.corpus.size(), 200u);
  ASSERT_EQ(w.truth.mentions.size(), 200u);
  HashedNgramProvider p;
  for (std::size_t k = 0; k < w.corpus.size(); ++k) {
    const auto& review = w.corpus[k].review;
    ASSERT_FALSE(w.truth.mentions[k].empty());
    for (const auto& m : w.truth.mentions[k]) {
      EXPECT_NE(review.find(m.surface), std::string::npos);
      EXPECT_EQ(sem_sim(m.triple.opinion, review, 0, p), 1.0);
      EXPECT_TRUE(std::find(w.truth.aspects.begin(), w.truth.aspects.end(), m.triple.aspect) !=
                  w.truth.aspects.end());
    }
    EXPECT_GE(w.corpus[k].rating, 1.0);
    EXPECT_LE(w.corpus[k].rating, 5.0);
  }
  // Every user appears at least once.
  std::set<std::string> users;
  for (const auto& x : w.corpus) users.insert(x.user_id);
  EXPECT_EQ(users.size(), 20u);
}

TEST_F(Synth, SingleInteractionWorld) {
  WorldSpec s = small();
  s.n_users = s.n_items = s.n_interactions = 1;
  auto w = generate_corpus(s, lex);
  ASSERT_EQ(w.corpus.size(), 1u);
  for (const auto& m : w.truth.mentions[0]) {
    EXPECT_NE(w.corpus[0].review.find(m.triple.opinion), std::string::npos);
  }
}

TEST_F(Synth, NoDriftGivesZeroDriftAndExactFidelity) {
  auto w = generate_corpus(small(), lex);
  auto vocab = AspectVocabulary::from_aspects(w.truth.aspects);
  auto annotated = run_scripted(w, {0.0, 0, 2}, vocab);
  HashedNgramProvider p;
  EXPECT_EQ(aspect_drift_rate(annotated, vocab), 0.0);
  EXPECT_EQ(opinion_fidelity_rate(annotated, 2, p), 1.0);
  for (std::size_t k = 0; k < annotated.size(); ++k) {
    EXPECT_EQ(annotated[k].triples, w.truth.triples(k));
  }
  EXPECT_EQ(aspect_drift_rate(run_scripted(w, {1.0, 0, 2}, vocab), vocab), 1.0);
}

TEST_F(Synth, ParaphraseReplacesRequestedWordCount) {
  std::mt19937_64 rng(8);
  const std::string phrase = lex.adverbs[0] + " " + lex.positive[0] + " and " + lex.adverbs[1] +
                             " " + lex.positive[1];
  EXPECT_EQ(paraphrase(phrase, 0, lex, rng), phrase);
  const auto before = split_whitespace(phrase);
  for (std::size_t level = 1; level <= 5; ++level) {
    auto after = split_whitespace(paraphrase(phrase, level, lex, rng));
    ASSERT_EQ(after.size(), before.size());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < after.size(); ++i) changed += after[i] != before[i];
    EXPECT_EQ(changed, std::min<std::size_t>(level, 4));
    EXPECT_EQ(after[2], "and");
  }
}

TEST_F(Synth, StratumNoiseOverridesApply) {
  WorldSpec s = small(9);
  s.rating_noise_sd = 0.0;
  s.stratum_noise_sd[LengthStratum::Medium] = 0.8;
  s.aspect_effect = 0.2;
  auto w = generate_corpus(s, lex);
  std::map<std::string, std::size_t> rank;
  for (std::size_t g = 0; g < w.truth.aspects.size(); ++g) rank[w.truth.aspects[g]] = g;
  std::size_t noisy = 0, quiet = 0;
  double noisy_sq = 0.0;
  for (std::size_t k = 0; k < w.corpus.size(); ++k) {
    const auto& x = w.corpus[k];
    double signal = 0.0;
    for (const auto& m : w.truth.mentions[k]) {
      const double sgn = m.triple.sentiment == Sentiment::Positive   ? 1.0
                         : m.triple.sentiment == Sentiment::Negative ? -1.0
                                                                     : 0.0;
      signal += w.truth.user_preferences.at(x.user_id)[rank.at(m.triple.aspect)] * sgn;
    }
    const double clean =
        std::clamp(w.truth.base_rating + w.truth.user_bias.at(x.user_id) +
                       w.truth.item_bias.at(x.item_id) + s.aspect_effect * signal,
                   1.0, 5.0);
    const double residual = x.rating - clean;
    if (stratum_of(word_count(x.review)) == LengthStratum::Medium) {
      ++noisy;
      noisy_sq += residual * residual;
    } else {
      ++quiet;
      EXPECT_NEAR(residual, 0.0, 1e-12);
    }
  }
  ASSERT_GT(noisy, 20u);
  EXPECT_GT(noisy_sq / static_cast<double>(noisy), 0.1);
  EXPECT_GT(quiet, 0u);
}

TEST_F(Synth, LexiconValidation) {
  EXPECT_NO_THROW(lex.validate());
  auto broken = lex;
  broken.aspects[1].synonyms.push_back(broken.aspects[0].canonical);
  EXPECT_THROW(broken.validate(), Error);
  broken = lex;
  broken.templates.push_back("no placeholders");
  EXPECT_THROW(broken.validate(), Error);
  broken = lex;
  broken.adverbs.push_back("unmapped");
  EXPECT_THROW(broken.validate(), Error);
  broken = lex;
  broken.distractors.push_back(lex.aspects[2].synonyms[0]);
  EXPECT_THROW(broken.validate(), Error);

  auto aliases = lex.aliases(2);
  EXPECT_EQ(aliases.alias_to_head.at(lex.aspects[1].synonyms[0]), lex.aspects[1].canonical);
  EXPECT_FALSE(aliases.alias_to_head.contains(lex.aspects[2].synonyms[0]));
}

TEST_F(Synth, SpecValidationListsProblems) {
  WorldSpec s;
  s.n_users = 0;
  s.zipf_s = 0.0;
  s.synonym_rate = 2.0;
  try {
    generate_corpus(s, lex);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("n_users"), std::string::npos);
    EXPECT_NE(msg.find("zipf_s"), std::string::npos);
    EXPECT_NE(msg.find("synonym_rate"), std::string::npos);
  }
}

}  // namespace
}  // namespace aspectkit
