#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "aspectkit/error.hpp"
#include "aspectkit/prompt.hpp"
#include "aspectkit/vocab.hpp"
#include "test_support.hpp"

namespace aspectkit {
namespace {

using testing::make_interaction;

AspectCandidateSet counts(std::map<std::string, std::uint64_t> m) {
  AspectCandidateSet c;
  c.counts = std::move(m);
  return c;
}

std::set<std::set<std::string>> as_sets(const std::vector<AspectCluster>& clusters) {
  std::set<std::set<std::string>> out;
  for (const auto& c : clusters) out.insert({c.members.begin(), c.members.end()});
  return out;
}

// Provider whose every text maps to the same vector.
class ConstantProvider final : public EmbeddingProvider {
 public:
  ConstantProvider() : EmbeddingProvider("constant", 2) {}

 protected:
  std::vector<Vector> compute(std::span<const std::string> normalized) override {
    return std::vector<Vector>(normalized.size(), Vector{0.6, 0.8});
  }
};

// Provider with fixed 2-d vectors per text.
class TableProvider final : public EmbeddingProvider {
 public:
  explicit TableProvider(std::map<std::string, Vector> table)
      : EmbeddingProvider("table", 2), table_(std::move(table)) {}

 protected:
  std::vector<Vector> compute(std::span<const std::string> normalized) override {
    std::vector<Vector> out;
    for (const auto& t : normalized) out.push_back(table_.at(t));
    return out;
  }

 private:
  std::map<std::string, Vector> table_;
};

TEST(Candidates, MultisetAccumulation) {
  AspectCandidateSet c;
  std::vector<std::string> one{"price"};
  c.add(one);
  EXPECT_EQ(c.counts, (std::map<std::string, std::uint64_t>{{"price", 1}}));
  c.add(one);
  c.add(one);
  EXPECT_EQ(c.freq("price"), 3u);
  EXPECT_EQ(c.freq("absent"), 0u);
  AspectCandidateSet d;
  std::vector<std::string> two{"sound", "price"};
  d.add(two);
  c.merge(d);
  EXPECT_EQ(c.freq("price"), 4u);
  EXPECT_EQ(c.distinct(), (std::vector<std::string>{"price", "sound"}));
}

TEST(Candidates, ScriptedPartitionsMatchTallyOracle) {
  const std::vector<std::string> terms{"sound", "price", "comfort", "battery", "cost", "design"};
  std::vector<Interaction> xs;
  std::map<std::size_t, std::vector<std::string>> per_review;
  auto sp = testing::scripted();
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> pick(0, terms.size() - 1), len(1, 3);
  for (std::size_t i = 0; i < 20; ++i) {
    std::string review = "review number " + std::to_string(i);
    xs.push_back(make_interaction("u" + std::to_string(i), "x", static_cast<std::int64_t>(i),
                                  review));
    std::vector<std::string> mentioned;
    for (std::size_t n = len(rng); n > 0; --n) mentioned.push_back(terms[pick(rng)]);
    per_review[i] = mentioned;
    const std::string abstract = "abstract of " + std::to_string(i);
    sp->add(PromptKind::Abstract, unit_key(review), abstract);
    nlohmann::json arr = mentioned;
    sp->add(PromptKind::Aspect, unit_key(abstract), arr.dump());
  }
  Corpus corpus(xs);
  auto partitions = subsample_partitions(corpus, 5, 13);

  std::map<std::string, std::uint64_t> oracle;
  for (const auto& p : partitions) {
    std::set<std::string> listed;
    for (auto m : p.members) listed.insert(per_review[m].begin(), per_review[m].end());
    for (const auto& a : listed) ++oracle[a];
  }

  Gateway gw(sp);
  StageOneOptions opt;
  opt.abstract_budget = 7;  // forces several abstract batches per partition
  auto got = extract_candidate_aspects(corpus, partitions, gw, PromptTemplates::builtin(), opt);
  EXPECT_EQ(got.counts, oracle);

  opt.workers = 3;
  Gateway gw2(sp);
  EXPECT_EQ(extract_candidate_aspects(corpus, partitions, gw2, PromptTemplates::builtin(), opt)
                .counts,
            oracle);
}

TEST(Candidates, ErrorsNameThePartition) {
  Corpus corpus({make_interaction("u", "x", 1, "unscripted review")});
  auto partitions = subsample_partitions(corpus, 1, 0);
  Gateway gw(testing::scripted());
  try {
    extract_candidate_aspects(corpus, partitions, gw, PromptTemplates::builtin(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unscripted);
    EXPECT_NE(std::string(e.what()).find("partition 1"), std::string::npos);
  }
}

TEST(Clustering, SynonymGroupsUnderAliasedHashedProvider) {
  AliasLexicon lex;
  lex.alias_to_head = {{"atmosphere", "ambiance"}, {"environment", "ambiance"}, {"cost", "price"}};
  HashedNgramProvider provider(HashedNgramProvider::kDefaultDim, lex);
  const std::vector<std::string> terms{"ambiance", "atmosphere", "environment",
                                       "price",    "cost",       "sound"};
  const std::set<std::set<std::string>> expected{
      {"ambiance", "atmosphere", "environment"}, {"cost", "price"}, {"sound"}};

  // Oracle: every within-group similarity exceeds every cross-group one.
  auto group_of = [&](const std::string& t) {
    for (const auto& g : expected) {
      if (g.contains(t)) return *g.begin();
    }
    return std::string();
  };
  double min_within = 2.0, max_across = -2.0;
  for (const auto& a : terms) {
    for (const auto& b : terms) {
      if (a >= b) continue;
      double s = cosine(provider.embed(a), provider.embed(b));
      if (group_of(a) == group_of(b)) {
        min_within = std::min(min_within, s);
      } else {
        max_across = std::max(max_across, s);
      }
    }
  }
  ASSERT_GT(min_within, max_across);

  AspectCandidateSet c;
  c.add(terms);
  auto clusters = cluster_aspects(c, provider, 3);
  EXPECT_EQ(as_sets(clusters), expected);
  for (const auto& cl : clusters) {
    EXPECT_NE(std::find(cl.members.begin(), cl.members.end(), cl.representative),
              cl.members.end());
  }
}

TEST(Clustering, TargetBounds) {
  HashedNgramProvider provider;
  auto c = counts({{"a", 1}, {"bb", 2}, {"ccc", 3}});
  auto singletons = cluster_aspects(c, provider, 10);
  EXPECT_EQ(singletons.size(), 3u);
  auto one = cluster_aspects(c, provider, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].members.size(), 3u);
  EXPECT_EQ(one[0].freq, 6u);
  EXPECT_THROW(cluster_aspects(c, provider, 0), Error);
  EXPECT_THROW(cluster_aspects(AspectCandidateSet{}, provider, 2), Error);
}

TEST(Clustering, PartitionInvariantOnRandomCandidates) {
  HashedNgramProvider provider;
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> ch('a', 'f'), len(2, 6), freq(1, 9);
  for (int trial = 0; trial < 25; ++trial) {
    AspectCandidateSet c;
    for (int n = 0; n < 12; ++n) {
      std::string t;
      for (int k = len(rng); k > 0; --k) t += static_cast<char>(ch(rng));
      c.counts[t] += static_cast<std::uint64_t>(freq(rng));
    }
    const std::size_t target = 1 + static_cast<std::size_t>(trial % 6);
    auto clusters = cluster_aspects(c, provider, target);
    EXPECT_EQ(clusters.size(), std::min(target, c.counts.size()));
    std::multiset<std::string> seen;
    std::uint64_t prev = UINT64_MAX;
    for (const auto& cl : clusters) {
      seen.insert(cl.members.begin(), cl.members.end());
      EXPECT_LE(cl.freq, prev);
      prev = cl.freq;
    }
    auto distinct = c.distinct();
    EXPECT_EQ(seen, std::multiset<std::string>(distinct.begin(), distinct.end()));
    EXPECT_EQ(as_sets(cluster_aspects(c, provider, target)), as_sets(clusters));
  }
}

TEST(AverageLinkage, TiesResolvedBySmallestMemberPair) {
  // Four points on two identical pairs; all within-pair distances are zero.
  std::vector<Vector> pts{{1, 0}, {0, 1}, {1, 0}, {0, 1}};
  std::vector<std::string> labels{"d", "c", "b", "a"};
  auto groups = average_linkage(pts, labels, 3);
  // Candidate zero-distance merges: {d,b} and {c,a}; ("a","c") < ("b","d").
  ASSERT_EQ(groups.size(), 3u);
  std::set<std::vector<std::size_t>> got(groups.begin(), groups.end());
  EXPECT_TRUE(got.contains(std::vector<std::size_t>{1, 3}));
}

TEST(Representative, Rules) {
  HashedNgramProvider provider;
  std::vector<std::string> single{"only"};
  EXPECT_EQ(select_representative(single, counts({{"only", 2}}), provider), "only");

  ConstantProvider constant;
  std::vector<std::string> ab{"a", "b"};
  EXPECT_EQ(select_representative(ab, counts({{"a", 5}, {"b", 3}}), constant), "a");
  EXPECT_EQ(select_representative(ab, counts({{"a", 3}, {"b", 5}}), constant), "b");
  EXPECT_EQ(select_representative(ab, counts({{"a", 4}, {"b", 4}}), constant), "a");

  // Weighted similarity favours the member nearest the heavy mass.
  TableProvider table({{"x", {1, 0}}, {"y", {0.8, 0.6}}, {"z", {0, 1}}});
  std::vector<std::string> xyz{"x", "y", "z"};
  EXPECT_EQ(select_representative(xyz, counts({{"x", 1}, {"y", 1}, {"z", 10}}), table), "z");
  EXPECT_EQ(select_representative(xyz, counts({{"x", 1}, {"y", 1}, {"z", 1}}), table), "y");
}

TEST(Representative, ExactlyInvariantUnderFrequencyScaling) {
  HashedNgramProvider provider;
  std::mt19937_64 rng(31);
  const std::vector<std::string> pool{"sound", "sound quality", "audio", "tone", "price",
                                      "cost",  "value",         "bass",  "treble"};
  std::uniform_int_distribution<std::size_t> size(2, 6);
  std::uniform_int_distribution<std::uint64_t> f(1, 40), scale(2, 1000);
  for (int trial = 0; trial < 200; ++trial) {
    auto members = pool;
    std::shuffle(members.begin(), members.end(), rng);
    members.resize(size(rng));
    AspectCandidateSet base, scaled;
    const auto k = scale(rng);
    for (const auto& m : members) {
      base.counts[m] = f(rng);
      scaled.counts[m] = base.counts[m] * k;
    }
    EXPECT_EQ(select_representative(members, base, provider),
              select_representative(members, scaled, provider));
  }
}

TEST(Vocabulary, BuildIsDeterministicAndOrdered) {
  auto sp = testing::scripted();
  std::vector<Interaction> xs;
  const std::vector<std::vector<std::string>> mentions{
      {"sound", "price"}, {"sound"}, {"comfort"}, {"sound", "comfort"}, {"price"}};
  for (std::size_t i = 0; i < 40; ++i) {
    std::string review = "review " + std::to_string(i);
    xs.push_back(make_interaction("u" + std::to_string(i), "x", static_cast<std::int64_t>(i),
                                  review));
    sp->add(PromptKind::Abstract, unit_key(review), "abstract " + std::to_string(i));
    nlohmann::json arr = mentions[i % mentions.size()];
    sp->add(PromptKind::Aspect, unit_key("abstract " + std::to_string(i)), arr.dump());
  }
  Corpus corpus(xs);
  HashedNgramProvider provider;
  VocabularyParams params{0.5, 5, 10, 3};
  Gateway gw(sp);
  auto t = PromptTemplates::builtin();
  auto v1 = build_vocabulary(corpus, params, gw, provider, t, {});
  auto v2 = build_vocabulary(corpus, params, gw, provider, t, {});
  EXPECT_EQ(v1.to_json(), v2.to_json());
  EXPECT_EQ(v1.aspects.size(), 3u);
  EXPECT_EQ(v1.corpus_hash, corpus.id());
  for (std::size_t i = 1; i < v1.clusters.size(); ++i) {
    EXPECT_GE(v1.clusters[i - 1].freq, v1.clusters[i].freq);
  }
  auto back = AspectVocabulary::from_json(v1.to_json());
  EXPECT_EQ(back.to_json(), v1.to_json());

  params.ratio = 0.0;
  EXPECT_THROW(build_vocabulary(corpus, params, gw, provider, t, {}), Error);
}

TEST(Vocabulary, OverlapAndFromAspects) {
  auto a = AspectVocabulary::from_aspects({"sound", "price", "comfort"});
  auto b = AspectVocabulary::from_aspects({"sound", "price", "comfort"});
  auto c = AspectVocabulary::from_aspects({"x", "y", "z"});
  auto d = AspectVocabulary::from_aspects({"price", "design", "sound"});
  EXPECT_EQ(vocab_overlap(a, b, 3), 1.0);
  EXPECT_EQ(vocab_overlap(a, c, 3), 0.0);
  EXPECT_DOUBLE_EQ(vocab_overlap(a, d, 3), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(vocab_overlap(a, d, 2), 0.5);
  EXPECT_THROW(vocab_overlap(a, b, 0), Error);
  EXPECT_THROW(AspectVocabulary::from_aspects({"a", "a"}), Error);
  EXPECT_TRUE(a.contains("price"));
  EXPECT_FALSE(a.contains("cost"));
  EXPECT_THROW(AspectVocabulary::from_json(nlohmann::json::object()), Error);
}

TEST(Vocabulary, SimilarityCsvShape) {
  HashedNgramProvider provider;
  std::vector<std::string> terms{"sound", "price, total"};
  auto csv = similarity_csv(terms, provider);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "aspect,sound,\"price, total\"");
  EXPECT_NE(csv.find("sound,1.000000,"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace aspectkit
