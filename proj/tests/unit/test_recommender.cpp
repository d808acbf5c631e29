#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "aspectkit/error.hpp"
#include "aspectkit/recommender.hpp"
#include "test_support.hpp"

namespace aspectkit {
namespace {

using testing::make_interaction;

RatingExample example(std::string u, std::string i, double r, AspectFeature f = {},
                      std::size_t words = 5) {
  return {std::move(u), std::move(i), r, std::move(f), words};
}

std::vector<RatingExample> random_examples(std::mt19937_64& rng, std::size_t n,
                                           std::size_t aspects) {
  std::uniform_int_distribution<int> u(0, 5), i(0, 4), f(-2, 2);
  std::uniform_real_distribution<double> r(1.0, 5.0);
  std::vector<RatingExample> out;
  for (std::size_t k = 0; k < n; ++k) {
    AspectFeature feat(aspects);
    for (auto& x : feat) x = f(rng);
    out.push_back(example("u" + std::to_string(u(rng)), "i" + std::to_string(i(rng)), r(rng),
                          feat, 3 + k * 7));
  }
  return out;
}

TEST(Features, SignedCounts) {
  auto vocab = AspectVocabulary::from_aspects({"sound", "price"});
  AnnotatedInteraction a;
  a.interaction = make_interaction("u", "i", 1);
  a.triples = {{"sound", "great", Sentiment::Positive},
               {"sound", "clear", Sentiment::Positive},
               {"price", "steep", Sentiment::Negative},
               {"price", "ok", Sentiment::Neutral},
               {"drift", "bad", Sentiment::Negative}};
  AnnotatedInteraction empty;
  empty.interaction = make_interaction("u", "j", 2);
  AnnotatedInteraction drift_only;
  drift_only.interaction = make_interaction("u", "k", 3);
  drift_only.triples = {{"shipping", "slow", Sentiment::Negative}};
  std::vector<AnnotatedInteraction> xs{a, empty, drift_only};
  auto f = build_aspect_features(xs, vocab);
  EXPECT_EQ(f.at(key_of(a.interaction)), (AspectFeature{2, -1}));
  EXPECT_EQ(f.at(key_of(empty.interaction)), (AspectFeature{0, 0}));
  EXPECT_EQ(f.at(key_of(drift_only.interaction)), (AspectFeature{0, 0}));
}

TEST(Examples, MissingFeaturesAreZeroAndWidthIsChecked) {
  Corpus c({make_interaction("u", "i", 1, "one two three", 4.0),
            make_interaction("v", "i", 2, "x", 2.0)});
  FeatureMap f{{key_of(c[0]), {1.0, -1.0}}};
  std::vector<std::size_t> all{0, 1};
  auto ex = make_examples(c, all, f, 2);
  EXPECT_EQ(ex[0].feature, (AspectFeature{1.0, -1.0}));
  EXPECT_EQ(ex[1].feature, (AspectFeature{0.0, 0.0}));
  EXPECT_EQ(ex[0].review_words, 3u);
  EXPECT_EQ(ex[0].rating, 4.0);
  EXPECT_THROW(make_examples(c, all, f, 3), Error);
  EXPECT_TRUE(make_examples(c, all, {}, 0)[0].feature.empty());
}

TEST(Split, LatestInteractionsPerUserGoToTest) {
  std::vector<Interaction> xs;
  for (int k = 0; k < 10; ++k) xs.push_back(make_interaction("a", "i" + std::to_string(k), k));
  xs.push_back(make_interaction("b", "i0", 3));
  for (int k = 0; k < 3; ++k) xs.push_back(make_interaction("c", "i" + std::to_string(k), 20 + k));
  Corpus c(xs);
  auto s = chronological_split(c, 0.2);
  EXPECT_EQ(s.train.size() + s.test.size(), c.size());
  std::map<std::string, std::vector<std::int64_t>> test_ts;
  for (auto p : s.test) test_ts[c[p].user_id].push_back(c[p].timestamp);
  EXPECT_EQ(test_ts["a"], (std::vector<std::int64_t>{8, 9}));
  EXPECT_FALSE(test_ts.contains("b"));  // a single interaction always trains
  EXPECT_EQ(test_ts["c"], (std::vector<std::int64_t>{22}));
  EXPECT_THROW(chronological_split(c, 1.0), Error);
}

TEST(Model, PredictionRules) {
  auto m = FactorModel::constant(3.0);
  EXPECT_EQ(m.predict("anyone", "anything", {}), 3.0);

  FactorModel big = FactorModel::constant(6.2);
  EXPECT_EQ(big.predict("u", "i", {}), 5.0);
  EXPECT_EQ(FactorModel::constant(-1.0).predict("u", "i", {}), 1.0);

  FactorModel f;
  f.mu = 3.0;
  f.users = {"u"};
  f.items = {"i"};
  f.user_bias = {0.5};
  f.item_bias = {-0.25};
  f.user_factors = {{1.0, 2.0}};
  f.item_factors = {{0.5, 0.25}};
  f.aspect_weights = {0.1, -0.2};
  f.hyperparams.dim = 2;
  f.rebuild_index();
  std::vector<double> feat{1.0, 2.0};
  EXPECT_DOUBLE_EQ(f.raw_score("u", "i", feat), 3.0 + 0.5 - 0.25 + 1.0 + 0.1 - 0.4);
  EXPECT_DOUBLE_EQ(f.raw_score("stranger", "i", feat), 3.0 - 0.25 + 0.1 - 0.4);
  EXPECT_DOUBLE_EQ(f.raw_score("u", "new", feat), 3.0 + 0.5 + 0.1 - 0.4);
  std::vector<double> wrong{1.0};
  EXPECT_THROW(f.raw_score("u", "i", wrong), Error);
}

TEST(Model, FlattenAndJsonRoundTrip) {
  std::mt19937_64 rng(3);
  auto data = random_examples(rng, 40, 3);
  Hyperparams hp{4, 0.05, 0.01, 3, 9};
  auto m = train(data, hp, {"a", "b", "c"});
  auto flat = m.flatten();
  EXPECT_EQ(flat.size(), 1 + m.users.size() + m.items.size() +
                             4 * (m.users.size() + m.items.size()) + 3);
  FactorModel copy = m;
  for (auto& x : flat) x *= 1.5;
  copy.unflatten(flat);
  EXPECT_EQ(copy.flatten(), flat);
  EXPECT_THROW(copy.unflatten(std::vector<double>{1.0}), Error);

  testing::TempDir dir;
  m.save(dir / "m.json");
  auto back = FactorModel::load(dir / "m.json");
  EXPECT_EQ(back.flatten(), m.flatten());
  EXPECT_EQ(back.hyperparams, m.hyperparams);
  EXPECT_EQ(back.aspect_names, m.aspect_names);
  EXPECT_EQ(back.loss_trace, m.loss_trace);
  EXPECT_EQ(back.predict(data[0].user_id, data[0].item_id, data[0].feature),
            m.predict(data[0].user_id, data[0].item_id, data[0].feature));
  EXPECT_THROW(FactorModel::from_json({{"format", "other"}}), Error);
}

TEST(Objective, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> jitter(0.0, 0.3);
  auto data = random_examples(rng, 30, 3);
  Hyperparams hp{3, 0.07, 0.01, 2, 1};
  auto model = train(data, hp);
  for (int point = 0; point < 10; ++point) {
    auto theta = model.flatten();
    for (auto& x : theta) x += jitter(rng);
    FactorModel m = model;
    m.unflatten(theta);
    auto g = objective_gradient(m, data);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(theta[k]));
      auto plus = theta, minus = theta;
      plus[k] += h;
      minus[k] -= h;
      FactorModel mp = m, mm = m;
      mp.unflatten(plus);
      mm.unflatten(minus);
      const double fd = (objective(mp, data) - objective(mm, data)) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(g[k]), 1e-6});
      EXPECT_LE(std::abs(fd - g[k]) / scale, 1e-4) << "point " << point << " param " << k;
    }
  }
}

TEST(Objective, RegularizesOnlyActiveAspectWeights) {
  FactorModel m = FactorModel::constant(3.0);
  m.aspect_weights = {1.0, 2.0};
  m.hyperparams.lambda = 0.5;
  std::vector<RatingExample> one{example("u", "i", 3.0, {1.0, 0.0})};
  // err = 3 - (3 + 1) = -1; penalty on w_0 only.
  EXPECT_DOUBLE_EQ(objective(m, one), 1.0 + 0.5 * 1.0);
}

TEST(Train, InterpolatesASingleExample) {
  std::vector<RatingExample> one{example("u", "i", 4.5)};
  Hyperparams hp{1, 0.0, 0.05, 400, 0};
  auto m = train(one, hp);
  EXPECT_LT(m.loss_trace.back(), 1e-6);
  EXPECT_NEAR(m.predict("u", "i", {}), 4.5, 1e-3);
}

TEST(Train, DeterministicGivenSeed) {
  std::mt19937_64 rng(5);
  auto data = random_examples(rng, 60, 2);
  Hyperparams hp{4, 0.05, 0.01, 5, 11};
  EXPECT_EQ(train(data, hp).flatten(), train(data, hp).flatten());
  hp.seed = 12;
  EXPECT_NE(train(data, hp).flatten(), train(data, Hyperparams{4, 0.05, 0.01, 5, 11}).flatten());
}

TEST(Train, LossNonincreasingWithSmallStep) {
  std::mt19937_64 rng(29);
  auto data = random_examples(rng, 50, 2);
  Hyperparams hp{3, 0.05, 0.001, 40, 2};
  auto m = train(data, hp);
  ASSERT_EQ(m.loss_trace.size(), 40u);
  for (std::size_t e = 1; e < m.loss_trace.size(); ++e) {
    EXPECT_LE(m.loss_trace[e], m.loss_trace[e - 1] + 1e-9) << "epoch " << e + 1;
  }
}

TEST(Train, Validation) {
  std::vector<RatingExample> none;
  EXPECT_THROW(train(none, {}), Error);
  std::vector<RatingExample> one{example("u", "i", 4.0)};
  try {
    train(one, Hyperparams{0, 0.05, 0.01, 1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
  std::vector<RatingExample> bad{example("u", "i", 6.0)};
  EXPECT_THROW(train(bad, {}), Error);
  try {
    train(one, Hyperparams{2, 0.0, 1e6, 5, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
  }
}

TEST(Evaluate, BasicIdentities) {
  auto m = FactorModel::constant(3.0);
  std::vector<RatingExample> perfect{example("u", "i", 3.0), example("v", "j", 3.0)};
  auto r = evaluate(m, perfect);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_EQ(r.mae, 0.0);
  std::vector<RatingExample> off{example("u", "i", 4.0), example("v", "j", 2.0)};
  r = evaluate(m, off);
  EXPECT_EQ(r.mse, 1.0);
  EXPECT_EQ(r.mae, 1.0);
  EXPECT_EQ(r.n, 2u);
  std::vector<RatingExample> none;
  EXPECT_THROW(evaluate(m, none), Error);
}

TEST(Evaluate, ConstantPredictorMseIsVariance) {
  std::mt19937_64 rng(37);
  auto data = random_examples(rng, 500, 0);
  double mean = 0.0;
  for (const auto& e : data) mean += e.rating;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (const auto& e : data) var += (e.rating - mean) * (e.rating - mean);
  var /= static_cast<double>(data.size());
  auto r = evaluate(FactorModel::constant(mean), data);
  EXPECT_NEAR(r.mse, var, 1e-9);
  EXPECT_LE(r.mae * r.mae, r.mse + 1e-12);
}

TEST(Strata, OmittedRowsAndWeightedIdentity) {
  auto m = FactorModel::constant(3.0);
  std::vector<RatingExample> medium;
  for (int k = 0; k < 12; ++k) medium.push_back(example("u", "i", 1.0 + k % 5, {}, 20));
  auto rows = stratified_eval(m, medium, 10);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_FALSE(rows[0].result.has_value());
  EXPECT_TRUE(rows[1].result.has_value());
  EXPECT_FALSE(rows[2].result.has_value());
  EXPECT_FALSE(rows[3].result.has_value());
  EXPECT_EQ(rows[1].n, 12u);
  const auto csv = strata_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "stratum,n,mse,mae,status");
  EXPECT_NE(csv.find(",0,,,omitted"), std::string::npos);

  std::mt19937_64 rng(43);
  auto data = random_examples(rng, 40, 0);  // review lengths spread over all strata
  auto all = stratified_eval(m, data, 0);
  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& row : all) {
    if (!row.result) continue;
    weighted += row.result->mse * static_cast<double>(row.n);
    n += row.n;
  }
  EXPECT_EQ(n, data.size());
  EXPECT_NEAR(weighted / static_cast<double>(n), evaluate(m, data).mse, 1e-12);
}

TEST(Cer, Examples) {
  EXPECT_EQ(cer(1.5, 1.3, 1.5), 0.0);
  EXPECT_EQ(cer(1.5, 1.3, 1.3), 1.0);
  EXPECT_NEAR(cer(1.50, 1.30, 1.35), 0.75, 1e-12);
  try {
    cer(1.2, 1.2, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UndefinedMetric);
  }
  EXPECT_THROW(cer(NAN, 1.0, 1.0), Error);
}

TEST(Cer, AffineInvariance) {
  // Dyadic inputs keep every rescaled value exact.
  const double m0 = 1.5, mf = 1.25, mp = 1.375;
  const double base = cer(m0, mf, mp);
  for (double alpha : {0.5, 2.0, 4.0}) {
    for (double beta : {-0.5, 0.0, 0.25, 3.0}) {
      EXPECT_EQ(cer(alpha * m0 + beta, alpha * mf + beta, alpha * mp + beta), base);
    }
  }
}

}  // namespace
}  // namespace aspectkit
