#include "run_config.hpp"

#include <fstream>
#include <set>

#include "aspectkit/error.hpp"
#include "aspectkit/hash.hpp"

namespace aspectkit::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads the known keys of one config object and remembers the rest as errors.
class Section {
 public:
  Section(const json& root, const char* name, std::vector<std::string>& errors)
      : name_(name), errors_(errors) {
    if (!root.contains(name)) return;
    if (!root.at(name).is_object()) {
      errors_.push_back(name_ + ": expected an object");
      return;
    }
    j_ = &root.at(name);
  }

  ~Section() {
    if (j_ == nullptr) return;
    for (const auto& [key, _] : j_->items()) {
      if (!seen_.contains(key)) errors_.push_back(name_ + "." + key + ": unknown key");
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (j_ == nullptr || !j_->contains(key)) return;
    try {
      out = j_->at(key).get<T>();
    } catch (const json::exception&) {
      errors_.push_back(name_ + "." + key + ": wrong type");
    }
  }

  void path(const char* key, fs::path& out, const fs::path& base) {
    std::string s;
    seen_.insert(key);
    if (j_ == nullptr || !j_->contains(key)) return;
    read(key, s);
    if (s.empty()) return;
    fs::path p(s);
    out = p.is_absolute() ? p : base / p;
  }

  const json* get(const char* key) {
    seen_.insert(key);
    if (j_ == nullptr || !j_->contains(key)) return nullptr;
    return &j_->at(key);
  }

 private:
  std::string name_;
  std::vector<std::string>& errors_;
  const json* j_ = nullptr;
  std::set<std::string> seen_;
};

const std::set<std::string> kSections = {"seed",    "workers", "paths",     "ingest", "vocab",
                                         "extract", "metrics", "rec",       "cer",    "synth",
                                         "backend", "embedding"};

}  // namespace

void RunConfig::merge_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
  merge_json(j, path.parent_path());
}

void RunConfig::merge_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
  std::vector<std::string> errors;
  for (const auto& [key, _] : j.items()) {
    if (!kSections.contains(key)) errors.push_back(key + ": unknown key");
  }
  try {
    if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) workers = j.at("workers").get<std::size_t>();
  } catch (const json::exception&) {
    errors.push_back("seed and workers must be nonnegative integers");
  }
  {
    Section s(j, "paths", errors);
    s.path("input", paths.input, base_dir);
    s.path("corpus", paths.corpus, base_dir);
    s.path("rejects", paths.rejects, base_dir);
    s.path("vocab", paths.vocab, base_dir);
    s.path("similarity", paths.similarity, base_dir);
    s.path("annotations", paths.annotations, base_dir);
    s.path("checkpoint", paths.checkpoint, base_dir);
    s.path("report", paths.report, base_dir);
    s.path("rows", paths.rows, base_dir);
    s.path("model", paths.model, base_dir);
    s.path("eval", paths.eval, base_dir);
    s.path("strata", paths.strata, base_dir);
    s.path("cer", paths.cer, base_dir);
    s.path("synth_dir", paths.synth_dir, base_dir);
    s.path("script", paths.script, base_dir);
    s.path("aliases", paths.aliases, base_dir);
    s.path("embedding_cache", paths.embedding_cache, base_dir);
    s.path("prompts", paths.prompts, base_dir);
    s.path("lexicon", paths.lexicon, base_dir);
  }
  {
    Section s(j, "ingest", errors);
    s.read("min_user", min_user);
    s.read("min_item", min_item);
    s.read("since", since);
  }
  {
    Section s(j, "vocab", errors);
    s.read("p", vocab.ratio);
    s.read("K", vocab.partitions);
    s.read("C", vocab.clusters);
    s.read("abstract_budget", abstract_budget);
    s.read("model_id", stage1.model_id);
    s.read("temperature", stage1.temperature);
    s.read("max_tokens", stage1.max_tokens);
  }
  {
    Section s(j, "extract", errors);
    s.read("model_id", stage2.model_id);
    s.read("temperature", stage2.temperature);
    s.read("max_tokens", stage2.max_tokens);
  }
  {
    Section s(j, "metrics", errors);
    s.read("delta", delta);
  }
  {
    Section s(j, "rec", errors);
    s.read("dim", rec.dim);
    s.read("lambda", rec.lambda);
    s.read("step", rec.step);
    s.read("epochs", rec.epochs);
    s.read("test_fraction", test_fraction);
    s.read("stratum_floor", stratum_floor);
    s.read("aspects", use_aspects);
  }
  {
    Section s(j, "cer", errors);
    s.read("ratios", cer_ratios);
  }
  {
    Section s(j, "synth", errors);
    s.read("n_users", world.n_users);
    s.read("n_items", world.n_items);
    s.read("n_interactions", world.n_interactions);
    s.read("n_aspects", world.n_aspects);
    s.read("zipf_s", world.zipf_s);
    s.read("min_mentions", world.min_mentions);
    s.read("max_mentions", world.max_mentions);
    s.read("min_fillers", world.min_fillers);
    s.read("max_fillers", world.max_fillers);
    s.read("synonym_rate", world.synonym_rate);
    s.read("neutral_rate", world.neutral_rate);
    s.read("aspect_effect", world.aspect_effect);
    s.read("rating_noise_sd", world.rating_noise_sd);
    s.read("start_time", world.start_time);
    s.read("drift_q", script.drift_q);
    s.read("paraphrase_level", script.paraphrase_level);
    if (const auto* noise = s.get("stratum_noise_sd")) {
      std::map<std::string, double> by_name;
      try {
        by_name = noise->get<std::map<std::string, double>>();
      } catch (const json::exception&) {
        errors.push_back("synth.stratum_noise_sd: expected {stratum: sd}");
      }
      for (const auto& [name, sd] : by_name) {
        bool known = false;
        for (auto st : kAllStrata) {
          if (to_string(st) == name) {
            world.stratum_noise_sd[st] = sd;
            known = true;
          }
        }
        if (!known) errors.push_back("synth.stratum_noise_sd." + name + ": unknown stratum");
      }
    }
  }
  {
    Section s(j, "backend", errors);
    s.read("kind", backend.kind);
    s.read("endpoint", backend.endpoint);
    s.read("api_key_env", backend.api_key_env);
    s.read("max_retries", backend.max_retries);
    s.read("timeout_ms", backend.timeout_ms);
    s.read("max_in_flight", backend.max_in_flight);
  }
  {
    Section s(j, "embedding", errors);
    s.read("kind", embedding.kind);
    s.read("dim", embedding.dim);
    s.read("alias_weight", embedding.alias_weight);
    s.read("endpoint", embedding.endpoint);
    s.read("model", embedding.model);
  }
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw Error(ErrorKind::Config, msg);
  }
}

void RunConfig::apply_seed() {
  vocab.seed = seed;
  rec.seed = seed;
  world.seed = seed;
  script.seed = seed;
}

json RunConfig::params_json() const {
  json noise = json::object();
  for (const auto& [st, sd] : world.stratum_noise_sd) noise[std::string(to_string(st))] = sd;
  return {
      {"seed", seed},
      {"ingest", {{"min_user", min_user}, {"min_item", min_item}, {"since", since}}},
      {"vocab",
       {{"p", vocab.ratio},
        {"K", vocab.partitions},
        {"C", vocab.clusters},
        {"abstract_budget", abstract_budget},
        {"model_id", stage1.model_id},
        {"temperature", stage1.temperature},
        {"max_tokens", stage1.max_tokens}}},
      {"extract",
       {{"model_id", stage2.model_id},
        {"temperature", stage2.temperature},
        {"max_tokens", stage2.max_tokens}}},
      {"metrics", {{"delta", delta}}},
      {"rec",
       {{"dim", rec.dim},
        {"lambda", rec.lambda},
        {"step", rec.step},
        {"epochs", rec.epochs},
        {"test_fraction", test_fraction},
        {"stratum_floor", stratum_floor},
        {"aspects", use_aspects}}},
      {"cer", {{"ratios", cer_ratios}}},
      {"synth",
       {{"n_users", world.n_users},
        {"n_items", world.n_items},
        {"n_interactions", world.n_interactions},
        {"n_aspects", world.n_aspects},
        {"zipf_s", world.zipf_s},
        {"min_mentions", world.min_mentions},
        {"max_mentions", world.max_mentions},
        {"min_fillers", world.min_fillers},
        {"max_fillers", world.max_fillers},
        {"synonym_rate", world.synonym_rate},
        {"neutral_rate", world.neutral_rate},
        {"aspect_effect", world.aspect_effect},
        {"rating_noise_sd", world.rating_noise_sd},
        {"stratum_noise_sd", noise},
        {"start_time", world.start_time},
        {"drift_q", script.drift_q},
        {"paraphrase_level", script.paraphrase_level}}},
      {"backend", {{"kind", backend.kind}}},
      {"embedding",
       {{"kind", embedding.kind},
        {"dim", embedding.dim},
        {"alias_weight", embedding.alias_weight},
        {"model", embedding.model}}},
  };
}

std::string RunConfig::hash() const { return short_hash(params_json().dump()); }

namespace {

void need_file(std::vector<std::string>& out, const char* what, const fs::path& p) {
  if (p.empty()) {
    out.push_back(std::string(what) + " path is required");
  } else if (!fs::is_regular_file(p)) {
    out.push_back(std::string(what) + " not found: " + p.string());
  }
}

void need_output(std::vector<std::string>& out, const char* what, const fs::path& p) {
  if (p.empty()) out.push_back(std::string("output path for ") + what + " is required");
}

}  // namespace

std::vector<std::string> RunConfig::problems(Command command) const {
  std::vector<std::string> out;
  if (workers == 0) out.push_back("workers must be >= 1");

  const bool uses_llm = command == Command::Vocab || command == Command::Extract ||
                        command == Command::Cer;
  const bool uses_embedding = command == Command::Vocab || command == Command::Metrics ||
                              command == Command::Cer;
  const bool uses_rec = command == Command::RecTrain || command == Command::RecEval ||
                        command == Command::RecStratified || command == Command::Cer;

  if (uses_llm) {
    if (backend.kind == "scripted") {
      need_file(out, "scripted backend responses", paths.script);
    } else if (backend.kind == "http") {
      if (backend.endpoint.empty()) out.push_back("http backend needs backend.endpoint");
    } else {
      out.push_back("backend must be 'scripted' or 'http', got '" + backend.kind + "'");
    }
    if (backend.max_retries < 0) out.push_back("backend.max_retries must be >= 0");
    if (backend.timeout_ms <= 0) out.push_back("backend.timeout_ms must be > 0");
    for (const auto* s : {&stage1, &stage2}) {
      if (s->max_tokens <= 0) out.push_back("max_tokens must be > 0");
      if (!(s->temperature >= 0.0)) out.push_back("temperature must be >= 0");
    }
    if (!paths.prompts.empty()) need_file(out, "prompt templates", paths.prompts);
  }
  if (command == Command::Vocab || command == Command::Cer) {
    if (!(vocab.ratio > 0.0 && vocab.ratio <= 1.0)) out.push_back("vocab.p must lie in (0, 1]");
    if (vocab.partitions == 0) out.push_back("vocab.K must be >= 1");
    if (vocab.clusters == 0) out.push_back("vocab.C must be >= 1");
    if (abstract_budget == 0) out.push_back("vocab.abstract_budget must be >= 1");
  }
  if (uses_embedding) {
    if (embedding.kind == "hashed") {
      if (embedding.dim == 0) out.push_back("embedding.dim must be >= 1");
      if (!paths.aliases.empty()) need_file(out, "alias lexicon", paths.aliases);
    } else if (embedding.kind == "http") {
      if (embedding.endpoint.empty()) out.push_back("http embedding needs embedding.endpoint");
    } else {
      out.push_back("embedding must be 'hashed' or 'http', got '" + embedding.kind + "'");
    }
  }
  if (uses_rec) {
    if (rec.dim == 0) out.push_back("rec.dim must be >= 1");
    if (!(rec.step > 0.0)) out.push_back("rec.step must be > 0");
    if (!(rec.lambda >= 0.0)) out.push_back("rec.lambda must be >= 0");
    if (rec.epochs == 0) out.push_back("rec.epochs must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      out.push_back("rec.test_fraction must lie in (0, 1)");
    }
  }

  switch (command) {
    case Command::Ingest:
      need_file(out, "input reviews", paths.input);
      need_output(out, "corpus", paths.corpus);
      break;
    case Command::Vocab:
      need_file(out, "corpus", paths.corpus);
      need_output(out, "vocabulary", paths.vocab);
      break;
    case Command::Extract:
      need_file(out, "corpus", paths.corpus);
      need_file(out, "vocabulary", paths.vocab);
      need_output(out, "annotations", paths.annotations);
      break;
    case Command::Metrics:
      need_file(out, "corpus", paths.corpus);
      need_file(out, "vocabulary", paths.vocab);
      need_file(out, "annotations", paths.annotations);
      need_output(out, "metric report", paths.report);
      break;
    case Command::RecTrain:
    case Command::RecEval:
    case Command::RecStratified:
      need_file(out, "corpus", paths.corpus);
      if (use_aspects) {
        need_file(out, "vocabulary", paths.vocab);
        need_file(out, "annotations", paths.annotations);
      }
      if (command == Command::RecTrain) {
        need_output(out, "model", paths.model);
      } else {
        need_file(out, "model", paths.model);
        need_output(out, command == Command::RecEval ? "evaluation" : "strata table",
                    command == Command::RecEval ? paths.eval : paths.strata);
      }
      break;
    case Command::Cer:
      need_file(out, "corpus", paths.corpus);
      need_output(out, "CER curve", paths.cer);
      if (cer_ratios.empty()) out.push_back("cer.ratios must not be empty");
      for (double r : cer_ratios) {
        if (!(r >= 0.0 && r <= 1.0)) out.push_back("cer ratios must lie in [0, 1]");
      }
      break;
    case Command::Synth:
      need_output(out, "synthetic world", paths.synth_dir);
      if (!(script.drift_q >= 0.0 && script.drift_q <= 1.0)) {
        out.push_back("synth.drift_q must lie in [0, 1]");
      }
      if (!paths.lexicon.empty()) need_file(out, "synthetic lexicon", paths.lexicon);
      break;
  }
  return out;
}

}  // namespace aspectkit::app
