#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspectkit/gateway.hpp"
#include "aspectkit/hallucination.hpp"
#include "aspectkit/recommender.hpp"
#include "aspectkit/synth.hpp"
#include "aspectkit/vocab.hpp"

namespace aspectkit::app {

enum class Command { Ingest, Vocab, Extract, Metrics, RecTrain, RecEval, RecStratified, Cer, Synth };

struct Paths {
  std::filesystem::path input;        // raw reviews for ingest
  std::filesystem::path corpus;
  std::filesystem::path rejects;
  std::filesystem::path vocab;
  std::filesystem::path similarity;
  std::filesystem::path annotations;
  std::filesystem::path checkpoint;
  std::filesystem::path report;
  std::filesystem::path rows;
  std::filesystem::path model;
  std::filesystem::path eval;
  std::filesystem::path strata;
  std::filesystem::path cer;
  std::filesystem::path synth_dir;
  std::filesystem::path script;       // scripted backend responses
  std::filesystem::path aliases;      // alias lexicon for the hashed embedder
  std::filesystem::path embedding_cache;
  std::filesystem::path prompts;      // empty: built-in templates
  std::filesystem::path lexicon;      // empty: built-in synthetic lexicon
};

struct BackendConfig {
  std::string kind = "scripted";  // scripted | http
  std::string endpoint;
  std::string api_key_env = "LLM_API_KEY";
  int max_retries = 4;
  int timeout_ms = 60000;
  std::size_t max_in_flight = 4;
};

struct EmbeddingConfig {
  std::string kind = "hashed";  // hashed | http
  std::size_t dim = HashedNgramProvider::kDefaultDim;
  double alias_weight = 3.0;
  std::string endpoint;
  std::string model;
};

/// Everything a command needs. Precedence, lowest first: built-in defaults,
/// the --config file, command-line flags.
struct RunConfig {
  std::uint64_t seed = 0;  // the one seed every stage derives from
  std::size_t workers = 1;
  bool check = false;

  Paths paths;

  std::size_t min_user = 0;
  std::size_t min_item = 0;
  std::int64_t since = 0;

  VocabularyParams vocab;
  std::size_t abstract_budget = 2048;
  StageSettings stage1;
  StageSettings stage2;

  std::size_t delta = kDefaultSpanDelta;

  Hyperparams rec;
  double test_fraction = 0.2;
  std::size_t stratum_floor = kDefaultStratumFloor;
  bool use_aspects = true;

  std::vector<double> cer_ratios{0.0, 0.1, 0.2, 0.4, 0.8, 1.0};

  WorldSpec world;
  ScriptOptions script;

  BackendConfig backend;
  EmbeddingConfig embedding;

  /// Overlays a config file on the current values. Relative paths resolve
  /// against the file's directory; unknown keys are errors.
  void merge_file(const std::filesystem::path& path);
  void merge_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  /// Propagates the master seed into every stage.
  void apply_seed();

  /// Parameters only: no paths, worker counts or endpoints.
  nlohmann::json params_json() const;
  std::string hash() const;

  /// Every problem that would stop `command`, in one list.
  std::vector<std::string> problems(Command command) const;
};

}  // namespace aspectkit::app
