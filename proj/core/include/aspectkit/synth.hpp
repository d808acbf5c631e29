#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspectkit/corpus.hpp"
#include "aspectkit/embedding.hpp"
#include "aspectkit/gateway.hpp"
#include "aspectkit/triple.hpp"

namespace aspectkit {

struct PlantedAspect {
  std::string canonical;
  std::vector<std::string> synonyms;
  std::vector<std::string> positive;  // aspect-specific adjectives
  std::vector<std::string> negative;
};

/// Word lists the generator composes reviews from; ships as
/// data/synth/world.json.
struct SynthLexicon {
  std::vector<PlantedAspect> aspects;
  std::vector<std::string> adverbs;
  std::vector<std::string> positive;  // fallback pools
  std::vector<std::string> negative;
  std::vector<std::string> neutral;
  std::map<std::string, std::string> paraphrase;  // word -> substitute
  std::vector<std::string> templates;             // contain {aspect} and {opinion}
  std::vector<std::string> fillers;
  std::vector<std::string> distractors;           // never planted aspects

  static SynthLexicon load(const std::filesystem::path& path);
  static SynthLexicon builtin();

  /// Throws ErrorKind::Config on overlapping synonym groups, templates
  /// without placeholders, or opinion words missing from the paraphrase table.
  void validate() const;

  /// Synonym -> canonical for the first `n_aspects` groups.
  AliasLexicon aliases(std::size_t n_aspects) const;
};

struct WorldSpec {
  std::size_t n_users = 200;
  std::size_t n_items = 100;
  std::size_t n_interactions = 2000;
  std::size_t n_aspects = 15;  // first groups of the lexicon
  double zipf_s = 1.0;
  std::size_t min_mentions = 1;
  std::size_t max_mentions = 3;
  std::size_t min_fillers = 0;
  std::size_t max_fillers = 4;
  double synonym_rate = 0.2;  // share of mentions written with a synonym
  double neutral_rate = 0.1;
  double aspect_effect = 0.6;
  double rating_noise_sd = 0.3;
  std::map<LengthStratum, double> stratum_noise_sd;  // overrides per stratum
  std::int64_t start_time = 1609459200;
  std::uint64_t seed = 0;

  void validate(const SynthLexicon& lexicon) const;
};

struct TrueMention {
  std::string surface;  // as written in the review
  Triple triple;        // canonical aspect
};

struct GroundTruth {
  std::vector<std::string> aspects;                    // planted canonical names
  std::vector<std::vector<TrueMention>> mentions;      // per corpus position
  std::map<std::string, std::vector<double>> user_preferences;
  std::map<std::string, double> user_bias;
  std::map<std::string, double> item_bias;
  double base_rating = 3.0;
  double aspect_effect = 0.0;

  std::vector<Triple> triples(std::size_t position) const;
  nlohmann::json to_json() const;
};

struct SynthWorld {
  Corpus corpus;
  GroundTruth truth;
};

/// Zipf(s) probabilities over ranks 1..n.
std::vector<double> zipf_probabilities(std::size_t n, double s);

/// Reviews are template sentences, one per mention, interleaved with filler
/// sentences; each mention's opinion phrase appears verbatim. Ratings are
/// clamp(base + b_u + b_i + effect * sum(pref_u[g] * s) + noise, 1, 5).
SynthWorld generate_corpus(const WorldSpec& spec, const SynthLexicon& lexicon);

/// Replaces `level` of the opinion's words (at most all of them that have a
/// table entry) with their substitutes.
std::string paraphrase(const std::string& opinion, std::size_t level,
                       const SynthLexicon& lexicon, std::mt19937_64& rng);

struct ScriptOptions {
  double drift_q = 0.0;
  std::size_t paraphrase_level = 0;
  std::uint64_t seed = 0;
};

/// Scripted answers for both stages. Stage II answers are the true triples,
/// with each aspect swapped for a distractor with probability drift_q and
/// each opinion paraphrased. Stage I answers list each review's surface
/// aspect terms. Randomness is keyed by review text, so equal texts always
/// get equal answers.
ScriptedProvider script_extraction_responses(const Corpus& corpus, const GroundTruth& truth,
                                             const ScriptOptions& options,
                                             const SynthLexicon& lexicon);

}  // namespace aspectkit
