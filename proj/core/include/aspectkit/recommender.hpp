#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "aspectkit/corpus.hpp"
#include "aspectkit/extraction.hpp"
#include "aspectkit/vocab.hpp"

namespace aspectkit {

/// Per canonical aspect: positive mentions minus negative mentions.
using AspectFeature = std::vector<double>;
using FeatureMap = std::map<InteractionKey, AspectFeature>;

/// Drifted aspects and neutral mentions contribute nothing.
FeatureMap build_aspect_features(std::span<const AnnotatedInteraction> annotated,
                                 const AspectVocabulary& vocab);

struct RatingExample {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  AspectFeature feature;  // empty for the no-aspect model
  std::size_t review_words = 0;
};

/// Examples for the given corpus positions. Interactions missing from
/// `features` get a zero vector of `aspect_dim`.
std::vector<RatingExample> make_examples(const Corpus& corpus,
                                         std::span<const std::size_t> positions,
                                         const FeatureMap& features, std::size_t aspect_dim);

struct TrainTestSplit {
  std::vector<std::size_t> train;  // corpus positions, ascending
  std::vector<std::size_t> test;
};

/// Per user, the latest round(test_fraction * n_u) interactions go to test,
/// always leaving at least one for training.
TrainTestSplit chronological_split(const Corpus& corpus, double test_fraction = 0.2);

struct Hyperparams {
  std::size_t dim = 16;
  double lambda = 0.05;
  double step = 0.01;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;

  bool operator==(const Hyperparams&) const = default;
};

/// r_hat = mu + b_u + b_i + <P_u, Q_i> + <w, feature>, clamped to [1, 5]
/// at prediction time.
class FactorModel {
 public:
  double mu = 0.0;
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::vector<double> user_bias;
  std::vector<double> item_bias;
  std::vector<std::vector<double>> user_factors;
  std::vector<std::vector<double>> item_factors;
  std::vector<double> aspect_weights;
  std::vector<std::string> aspect_names;
  Hyperparams hyperparams;
  std::vector<double> loss_trace;  // objective after each epoch

  /// Predicts `mu` for everything.
  static FactorModel constant(double mu);

  std::optional<std::size_t> user_index(const std::string& id) const;
  std::optional<std::size_t> item_index(const std::string& id) const;

  /// Unclamped score; unknown users and items contribute zero.
  double raw_score(const std::string& user_id, const std::string& item_id,
                   std::span<const double> feature) const;
  double predict(const std::string& user_id, const std::string& item_id,
                 std::span<const double> feature) const;

  /// Parameters as one vector: mu, user biases, item biases, user factors,
  /// item factors, aspect weights.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> params);

  nlohmann::json to_json() const;
  static FactorModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static FactorModel load(const std::filesystem::path& path);

  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> user_pos_;
  std::unordered_map<std::string, std::size_t> item_pos_;
};

/// J = sum over examples of err^2 + lambda * (b_u^2 + b_i^2 + |P_u|^2 + |Q_i|^2
/// + sum of w_j^2 over the example's nonzero features). mu is not regularized.
double objective(const FactorModel& model, std::span<const RatingExample> examples);

/// Exact gradient of objective() in flatten() layout.
std::vector<double> objective_gradient(const FactorModel& model,
                                       std::span<const RatingExample> examples);

/// SGD on objective(): one example at a time in a seeded order, reshuffled
/// every epoch. mu starts at the mean training rating; factors start at
/// N(0, 0.1). Throws ErrorKind::Numeric when the loss stops being finite.
FactorModel train(std::span<const RatingExample> train_set, const Hyperparams& hp,
                  std::vector<std::string> aspect_names = {});

struct EvalResult {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
  std::optional<LengthStratum> stratum;
};

EvalResult evaluate(const FactorModel& model, std::span<const RatingExample> test_set);

struct StratumResult {
  LengthStratum stratum = LengthStratum::Short;
  std::size_t n = 0;
  std::optional<EvalResult> result;  // absent when n is below the floor
};

inline constexpr std::size_t kDefaultStratumFloor = 10;

/// One row per stratum, always all four.
std::vector<StratumResult> stratified_eval(const FactorModel& model,
                                           std::span<const RatingExample> test_set,
                                           std::size_t min_count = kDefaultStratumFloor);

nlohmann::json to_json(const EvalResult& r);
std::string strata_csv(std::span<const StratumResult> strata);

/// Share of the full-vocabulary MSE reduction reached at one sampling ratio:
/// (mse0 - mse_p) / (mse0 - mse_full).
double cer(double mse0, double mse_full, double mse_p);

}  // namespace aspectkit
