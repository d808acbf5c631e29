#include "aspectkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "aspectkit/error.hpp"
#include "aspectkit/hash.hpp"
#include "aspectkit/parse.hpp"
#include "aspectkit/prompt.hpp"
#include "aspectkit/text.hpp"

namespace aspectkit {

using nlohmann::json;

SynthLexicon SynthLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read synthetic lexicon " + path.string());
  try {
    auto j = json::parse(in);
    if (j.at("format") != "aspectkit-synth-lexicon" || j.at("version") != 1) {
      throw Error(ErrorKind::Config, path.string() + " is not a version 1 synthetic lexicon");
    }
    SynthLexicon lex;
    for (const auto& a : j.at("aspects")) {
      lex.aspects.push_back({a.at("canonical").get<std::string>(),
                             a.at("synonyms").get<std::vector<std::string>>(),
                             a.at("positive").get<std::vector<std::string>>(),
                             a.at("negative").get<std::vector<std::string>>()});
    }
    auto list = [&j](const char* name) { return j.at(name).get<std::vector<std::string>>(); };
    lex.adverbs = list("adverbs");
    lex.positive = list("positive");
    lex.negative = list("negative");
    lex.neutral = list("neutral");
    lex.paraphrase = j.at("paraphrase").get<std::map<std::string, std::string>>();
    lex.templates = list("templates");
    lex.fillers = list("fillers");
    lex.distractors = list("distractors");
    lex.validate();
    return lex;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

SynthLexicon SynthLexicon::builtin() { return load(data_dir() / "synth" / "world.json"); }

void SynthLexicon::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, "lexicon: " + msg); };
  std::set<std::string> terms;
  for (const auto& a : aspects) {
    if (!terms.insert(a.canonical).second) fail("term '" + a.canonical + "' in two groups");
    for (const auto& s : a.synonyms) {
      if (!terms.insert(s).second) fail("term '" + s + "' in two groups");
    }
  }
  for (const auto& d : distractors) {
    if (terms.contains(d)) fail("distractor '" + d + "' is a planted term");
  }
  if (templates.empty() || templates.size() > 50) fail("need 1 to 50 templates");
  for (const auto& t : templates) {
    if (t.find("{aspect}") == std::string::npos || t.find("{opinion}") == std::string::npos) {
      fail("template without placeholders: " + t);
    }
  }
  if (adverbs.size() < 2 || positive.size() < 2 || negative.size() < 2 || neutral.size() < 2) {
    fail("each word pool needs at least two entries");
  }
  if (distractors.empty()) fail("no distractor aspects");
  auto covered = [&](const std::vector<std::string>& words) {
    for (const auto& w : words) {
      if (!paraphrase.contains(w)) fail("no paraphrase for '" + w + "'");
    }
  };
  covered(adverbs);
  covered(positive);
  covered(negative);
  covered(neutral);
  for (const auto& a : aspects) {
    covered(a.positive);
    covered(a.negative);
  }
}

AliasLexicon SynthLexicon::aliases(std::size_t n_aspects) const {
  AliasLexicon out;
  for (std::size_t g = 0; g < std::min(n_aspects, aspects.size()); ++g) {
    for (const auto& s : aspects[g].synonyms) out.alias_to_head[s] = aspects[g].canonical;
  }
  return out;
}

void WorldSpec::validate(const SynthLexicon& lexicon) const {
  std::vector<std::string> problems;
  if (n_users == 0 || n_items == 0) problems.push_back("n_users and n_items must be >= 1");
  if (n_interactions < n_users) problems.push_back("n_interactions must be >= n_users");
  if (n_aspects == 0 || n_aspects > lexicon.aspects.size()) {
    problems.push_back("n_aspects must lie in [1, " + std::to_string(lexicon.aspects.size()) +
                       "]");
  }
  if (!(zipf_s > 0.0)) problems.push_back("zipf_s must be > 0");
  if (min_mentions == 0 || min_mentions > max_mentions) {
    problems.push_back("need 1 <= min_mentions <= max_mentions");
  }
  if (min_fillers > max_fillers) problems.push_back("need min_fillers <= max_fillers");
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(synonym_rate)) problems.push_back("synonym_rate outside [0, 1]");
  if (!in_unit(neutral_rate)) problems.push_back("neutral_rate outside [0, 1]");
  if (!(rating_noise_sd >= 0.0)) problems.push_back("rating_noise_sd must be >= 0");
  for (const auto& [s, sd] : stratum_noise_sd) {
    if (!(sd >= 0.0)) problems.push_back("stratum noise must be >= 0");
  }
  if (!problems.empty()) throw Error(ErrorKind::Config, "world spec: " + join(problems, "; "));
}

std::vector<Triple> GroundTruth::triples(std::size_t position) const {
  std::vector<Triple> out;
  for (const auto& m : mentions.at(position)) out.push_back(m.triple);
  return out;
}

json GroundTruth::to_json() const {
  json per_interaction = json::array();
  for (const auto& ms : mentions) {
    json row = json::array();
    for (const auto& m : ms) {
      row.push_back({{"surface", m.surface},
                     {"aspect", m.triple.aspect},
                     {"opinion", m.triple.opinion},
                     {"sentiment", std::string(to_string(m.triple.sentiment))}});
    }
    per_interaction.push_back(std::move(row));
  }
  return {{"aspects", aspects},
          {"base_rating", base_rating},
          {"aspect_effect", aspect_effect},
          {"user_bias", user_bias},
          {"item_bias", item_bias},
          {"user_preferences", user_preferences},
          {"mentions", std::move(per_interaction)}};
}

std::vector<double> zipf_probabilities(std::size_t n, double s) {
  std::vector<double> p(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) total += p[k] = std::pow(static_cast<double>(k + 1), -s);
  for (auto& x : p) x /= total;
  return p;
}

namespace {

std::string padded_id(char prefix, std::size_t k, std::size_t count) {
  const auto width = std::to_string(count).size();
  auto digits = std::to_string(k);
  return prefix + std::string(width - digits.size(), '0') + digits;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::pair<std::string, std::string> pick_two(const std::vector<std::string>& v,
                                             std::mt19937_64& rng) {
  const auto i = std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng);
  auto j = std::uniform_int_distribution<std::size_t>(0, v.size() - 2)(rng);
  if (j >= i) ++j;
  return {v[i], v[j]};
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string opinion_phrase(const PlantedAspect& aspect, Sentiment s, const SynthLexicon& lex,
                           std::mt19937_64& rng) {
  const std::vector<std::string>* pool = &lex.neutral;
  if (s == Sentiment::Positive) {
    pool = aspect.positive.size() >= 2 ? &aspect.positive : &lex.positive;
  } else if (s == Sentiment::Negative) {
    pool = aspect.negative.size() >= 2 ? &aspect.negative : &lex.negative;
  }
  auto [adv1, adv2] = pick_two(lex.adverbs, rng);
  auto [adj1, adj2] = pick_two(*pool, rng);
  return adv1 + " " + adj1 + " and " + adv2 + " " + adj2;
}

double sign(Sentiment s) {
  if (s == Sentiment::Positive) return 1.0;
  if (s == Sentiment::Negative) return -1.0;
  return 0.0;
}

}  // namespace

SynthWorld generate_corpus(const WorldSpec& spec, const SynthLexicon& lexicon) {
  spec.validate(lexicon);
  const auto seed = std::to_string(spec.seed);
  std::mt19937_64 world_rng(derive_seed("synth-world|" + seed));
  std::normal_distribution<double> bias_dist(0.0, 0.3);
  std::uniform_real_distribution<double> pref_dist(0.5, 1.5);

  GroundTruth truth;
  truth.aspect_effect = spec.aspect_effect;
  for (std::size_t g = 0; g < spec.n_aspects; ++g) {
    truth.aspects.push_back(lexicon.aspects[g].canonical);
  }
  std::vector<std::string> users;
  std::vector<std::string> items;
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    users.push_back(padded_id('u', u, spec.n_users));
    truth.user_bias[users.back()] = bias_dist(world_rng);
    auto& prefs = truth.user_preferences[users.back()];
    for (std::size_t g = 0; g < spec.n_aspects; ++g) prefs.push_back(pref_dist(world_rng));
  }
  for (std::size_t i = 0; i < spec.n_items; ++i) {
    items.push_back(padded_id('i', i, spec.n_items));
    truth.item_bias[items.back()] = bias_dist(world_rng);
  }

  const auto zipf = zipf_probabilities(spec.n_aspects, spec.zipf_s);
  std::vector<Interaction> rows;
  rows.reserve(spec.n_interactions);
  std::int64_t t = spec.start_time;
  for (std::size_t k = 0; k < spec.n_interactions; ++k) {
    std::mt19937_64 rng(derive_seed("synth-interaction|" + seed + "|" + std::to_string(k)));
    std::discrete_distribution<std::size_t> aspect_dist(zipf.begin(), zipf.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Interaction x;
    x.user_id = k < spec.n_users ? users[k] : pick(users, rng);
    x.item_id = pick(items, rng);
    const auto n_mentions =
        std::uniform_int_distribution<std::size_t>(spec.min_mentions, spec.max_mentions)(rng);
    std::vector<TrueMention> mentions;
    std::vector<std::string> sentences;
    double signal = 0.0;
    for (std::size_t m = 0; m < n_mentions; ++m) {
      const auto g = aspect_dist(rng);
      const auto& planted = lexicon.aspects[g];
      std::string surface = planted.canonical;
      if (!planted.synonyms.empty() && unit(rng) < spec.synonym_rate) {
        surface = pick(planted.synonyms, rng);
      }
      Sentiment s = Sentiment::Neutral;
      if (unit(rng) >= spec.neutral_rate) {
        s = unit(rng) < 0.5 ? Sentiment::Positive : Sentiment::Negative;
      }
      auto opinion = opinion_phrase(planted, s, lexicon, rng);
      auto sentence = replace_all(pick(lexicon.templates, rng), "{aspect}", surface);
      sentences.push_back(replace_all(std::move(sentence), "{opinion}", opinion));
      signal += truth.user_preferences[x.user_id][g] * sign(s);
      mentions.push_back({std::move(surface), {planted.canonical, std::move(opinion), s}});
    }
    const auto n_fillers =
        std::uniform_int_distribution<std::size_t>(spec.min_fillers, spec.max_fillers)(rng);
    for (std::size_t f = 0; f < n_fillers; ++f) {
      const auto at = std::uniform_int_distribution<std::size_t>(0, sentences.size())(rng);
      sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(at),
                       pick(lexicon.fillers, rng));
    }
    x.review = join(sentences, " ");

    double sd = spec.rating_noise_sd;
    if (auto it = spec.stratum_noise_sd.find(stratum_of(word_count(x.review)));
        it != spec.stratum_noise_sd.end()) {
      sd = it->second;
    }
    const double noise = sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng) : 0.0;
    x.rating = std::clamp(truth.base_rating + truth.user_bias[x.user_id] +
                              truth.item_bias[x.item_id] + spec.aspect_effect * signal + noise,
                          kMinRating, kMaxRating);
    x.timestamp = t;
    t += 1 + std::uniform_int_distribution<std::int64_t>(0, 7199)(rng);
    rows.push_back(std::move(x));
    truth.mentions.push_back(std::move(mentions));
  }
  return {Corpus(std::move(rows)), std::move(truth)};
}

std::string paraphrase(const std::string& opinion, std::size_t level, const SynthLexicon& lexicon,
                       std::mt19937_64& rng) {
  auto words = split_whitespace(opinion);
  std::vector<std::size_t> slots;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (lexicon.paraphrase.contains(words[w])) slots.push_back(w);
  }
  std::shuffle(slots.begin(), slots.end(), rng);
  for (std::size_t k = 0; k < std::min(level, slots.size()); ++k) {
    words[slots[k]] = lexicon.paraphrase.at(words[slots[k]]);
  }
  return join(words, " ");
}

ScriptedProvider script_extraction_responses(const Corpus& corpus, const GroundTruth& truth,
                                             const ScriptOptions& options,
                                             const SynthLexicon& lexicon) {
  if (truth.mentions.size() != corpus.size()) {
    throw Error(ErrorKind::Input, "ground truth does not match the corpus size");
  }
  if (!(options.drift_q >= 0.0 && options.drift_q <= 1.0)) {
    throw Error(ErrorKind::Config, "drift_q outside [0, 1]");
  }
  ScriptedProvider provider;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const auto key = unit_key(corpus[k].review);
    std::mt19937_64 rng(derive_seed("synth-script|" + std::to_string(options.seed) + "|" + key));
    std::bernoulli_distribution drift(options.drift_q);

    std::vector<Triple> triples;
    std::vector<std::string> surfaces;
    for (const auto& m : truth.mentions[k]) {
      Triple t = m.triple;
      if (drift(rng)) t.aspect = pick(lexicon.distractors, rng);
      t.opinion = paraphrase(t.opinion, options.paraphrase_level, lexicon, rng);
      triples.push_back(std::move(t));
      if (std::find(surfaces.begin(), surfaces.end(), m.surface) == surfaces.end()) {
        surfaces.push_back(m.surface);
      }
    }
    provider.add(PromptKind::Dynamic, key, serialize_triples(triples));
    const auto fragment = "Aspects discussed: " + join(surfaces, ", ") + ".";
    provider.add(PromptKind::Abstract, key, fragment);
    provider.add(PromptKind::Aspect, unit_key(fragment), json(surfaces).dump());
  }
  return provider;
}

}  // namespace aspectkit
