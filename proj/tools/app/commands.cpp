#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>

#include "artifacts.hpp"
#include "aspectkit/corpus.hpp"
#include "aspectkit/embedding.hpp"
#include "aspectkit/error.hpp"
#include "aspectkit/extraction.hpp"
#include "aspectkit/gateway.hpp"
#include "aspectkit/hallucination.hpp"
#include "aspectkit/prompt.hpp"
#include "aspectkit/recommender.hpp"
#include "aspectkit/synth.hpp"
#include "aspectkit/version.hpp"
#include "aspectkit/vocab.hpp"

namespace aspectkit::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ArtifactWriter writer_for(const RunConfig& cfg, const std::string& corpus_hash) {
  return ArtifactWriter({cfg.hash(), corpus_hash, std::string(kCodeVersion)}, cfg.check);
}

Corpus load_corpus(const fs::path& path, std::ostream& log) {
  auto loaded = load_reviews(path);
  if (!loaded.rejects.empty()) {
    log << "warning: " << loaded.rejects.size() << " invalid records skipped in " << path.string()
        << '\n';
  }
  return std::move(loaded.corpus);
}

AspectVocabulary load_vocab(const fs::path& path) {
  try {
    return AspectVocabulary::from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Input, path.string() + ": " + e.what());
  }
}

PromptTemplates templates_for(const RunConfig& cfg) {
  return cfg.paths.prompts.empty() ? PromptTemplates::builtin()
                                   : PromptTemplates::load(cfg.paths.prompts);
}

std::unique_ptr<Gateway> gateway_for(const RunConfig& cfg) {
  std::shared_ptr<CompletionBackend> backend;
  if (cfg.backend.kind == "http") {
    HttpBackendConfig http;
    http.endpoint = cfg.backend.endpoint;
    http.api_key_env = cfg.backend.api_key_env;
    http.max_retries = cfg.backend.max_retries;
    http.timeout = std::chrono::milliseconds(cfg.backend.timeout_ms);
    backend = std::make_shared<HttpCompletionBackend>(http);
  } else {
    backend = std::make_shared<ScriptedProvider>(ScriptedProvider::load(cfg.paths.script));
  }
  return std::make_unique<Gateway>(backend, cfg.backend.max_in_flight);
}

std::unique_ptr<EmbeddingProvider> embedder_for(const RunConfig& cfg) {
  std::unique_ptr<EmbeddingProvider> provider;
  if (cfg.embedding.kind == "http") {
    HttpEmbeddingConfig http;
    http.endpoint = cfg.embedding.endpoint;
    http.model = cfg.embedding.model;
    http.api_key_env = cfg.backend.api_key_env;
    provider = std::make_unique<HttpEmbeddingProvider>(http);
  } else {
    AliasLexicon aliases;
    if (!cfg.paths.aliases.empty()) aliases = AliasLexicon::load(cfg.paths.aliases);
    provider = std::make_unique<HashedNgramProvider>(cfg.embedding.dim, std::move(aliases),
                                                     cfg.embedding.alias_weight);
  }
  if (!cfg.paths.embedding_cache.empty() && fs::exists(cfg.paths.embedding_cache)) {
    provider->load_cache(cfg.paths.embedding_cache);
  }
  return provider;
}

void save_embedding_cache(const RunConfig& cfg, const EmbeddingProvider& provider) {
  if (!cfg.paths.embedding_cache.empty()) provider.save_cache(cfg.paths.embedding_cache);
}

fs::path calls_log_path(const fs::path& artifact) { return artifact.string() + ".calls.jsonl"; }

void require_chronological(const Corpus& corpus) {
  if (!is_chronological(corpus)) {
    throw Error(ErrorKind::Input, "corpus is not in chronological order; run `ingest` first");
  }
}

struct RecData {
  std::vector<RatingExample> train;
  std::vector<RatingExample> test;
  std::vector<std::string> aspects;
};

RecData rec_data(const Corpus& corpus, const AspectVocabulary* vocab,
                 std::span<const AnnotatedInteraction> annotated, double test_fraction) {
  const auto split = chronological_split(corpus, test_fraction);
  FeatureMap features;
  std::size_t width = 0;
  RecData out;
  if (vocab != nullptr && !vocab->empty()) {
    features = build_aspect_features(annotated, *vocab);
    width = vocab->size();
    out.aspects = vocab->aspects;
  }
  out.train = make_examples(corpus, split.train, features, width);
  out.test = make_examples(corpus, split.test, features, width);
  if (out.test.empty()) throw Error(ErrorKind::Input, "the split left no test interactions");
  return out;
}

RecData rec_data_for(const RunConfig& cfg, const Corpus& corpus) {
  if (!cfg.use_aspects) return rec_data(corpus, nullptr, {}, cfg.test_fraction);
  auto vocab = load_vocab(cfg.paths.vocab);
  auto annotated = read_annotations(cfg.paths.annotations, corpus);
  return rec_data(corpus, &vocab, annotated, cfg.test_fraction);
}

FactorModel load_model_for(const RunConfig& cfg, const RecData& data) {
  FactorModel model;
  try {
    model = FactorModel::from_json(json::parse(read_file(cfg.paths.model)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Input, cfg.paths.model.string() + ": " + e.what());
  }
  if (model.aspect_names != data.aspects) {
    throw Error(ErrorKind::Input,
                "model was trained with a different aspect vocabulary than the one supplied");
  }
  return model;
}

}  // namespace

void cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  auto loaded = load_reviews(cfg.paths.input);
  auto corpus =
      sort_chronologically(filter_corpus(loaded.corpus, cfg.min_user, cfg.min_item, cfg.since));
  if (corpus.empty()) throw Error(ErrorKind::Input, "no interactions left after filtering");
  auto writer = writer_for(cfg, corpus.id());
  writer.write_text(cfg.paths.corpus, reviews_to_jsonl(corpus));
  if (!cfg.paths.rejects.empty()) {
    writer.write_text(cfg.paths.rejects, rejects_to_jsonl(loaded.rejects));
  }
  log << "ingest: kept " << corpus.size() << " of " << loaded.corpus.size() << " valid records, "
      << loaded.rejects.size() << " rejected\n";
}

void cmd_vocab(const RunConfig& cfg, std::ostream& log) {
  auto corpus = load_corpus(cfg.paths.corpus, log);
  auto gateway = gateway_for(cfg);
  auto provider = embedder_for(cfg);
  const StageOneOptions options{cfg.stage1, cfg.abstract_budget, cfg.workers};
  auto vocab =
      build_vocabulary(corpus, cfg.vocab, *gateway, *provider, templates_for(cfg), options);
  write_file(calls_log_path(cfg.paths.vocab), gateway->calls_to_jsonl());

  auto writer = writer_for(cfg, corpus.id());
  writer.write_json(cfg.paths.vocab, vocab.to_json());
  if (!cfg.paths.similarity.empty()) {
    writer.write_text(cfg.paths.similarity, similarity_csv(vocab.aspects, *provider));
  }
  save_embedding_cache(cfg, *provider);
  log << "vocab: " << vocab.size() << " aspects from " << vocab.params.partitions
      << " partitions\n";
}

void cmd_extract(const RunConfig& cfg, std::ostream& log) {
  auto corpus = load_corpus(cfg.paths.corpus, log);
  require_chronological(corpus);
  auto vocab = load_vocab(cfg.paths.vocab);
  auto gateway = gateway_for(cfg);
  StageTwoOptions options{cfg.stage2, cfg.paths.checkpoint};
  if (cfg.paths.checkpoint.empty()) options.checkpoint = cfg.paths.annotations.string() + ".ckpt";
  auto result = run_stage2(corpus, vocab, *gateway, templates_for(cfg), options);
  write_file(calls_log_path(cfg.paths.annotations), gateway->calls_to_jsonl());

  auto writer = writer_for(cfg, corpus.id());
  writer.write_text(cfg.paths.annotations, annotations_to_jsonl(result.annotated));
  log << "extract: " << result.annotated.size() << " interactions, " << result.failures
      << " failed, " << result.resumed << " resumed from checkpoint\n";
}

void cmd_metrics(const RunConfig& cfg, std::ostream& log) {
  auto corpus = load_corpus(cfg.paths.corpus, log);
  auto vocab = load_vocab(cfg.paths.vocab);
  auto annotated = read_annotations(cfg.paths.annotations, corpus);
  auto provider = embedder_for(cfg);
  auto report = compute_metrics(annotated, vocab, cfg.delta, *provider, corpus.id(), cfg.workers);

  auto writer = writer_for(cfg, corpus.id());
  writer.write_json(cfg.paths.report, report.to_json());
  if (!cfg.paths.rows.empty()) writer.write_text(cfg.paths.rows, report.rows_csv());
  save_embedding_cache(cfg, *provider);
  log << "metrics: ADR " << report.adr << ", OFR " << report.ofr << " over "
      << report.n_interactions << " interactions (" << report.n_skipped_empty << " skipped)\n";
}

void cmd_rec_train(const RunConfig& cfg, std::ostream& log) {
  auto corpus = load_corpus(cfg.paths.corpus, log);
  auto data = rec_data_for(cfg, corpus);
  auto model = train(data.train, cfg.rec, data.aspects);
  auto writer = writer_for(cfg, corpus.id());
  writer.write_json(cfg.paths.model, model.to_json());
  log << "rec train: " << data.train.size() << " examples, final loss "
      << model.loss_trace.back() << '\n';
}

void cmd_rec_eval(const RunConfig& cfg, std::ostream& log) {
  auto corpus = load_corpus(cfg.paths.corpus, log);
  auto data = rec_data_for(cfg, corpus);
  auto model = load_model_for(cfg, data);
  auto result = evaluate(model, data.test);
  auto writer = writer_for(cfg, corpus.id());
  writer.write_json(cfg.paths.eval, to_json(result));
  log << "rec eval: MSE " << result.mse << ", MAE " << result.mae << " on " << result.n
      << " test interactions\n";
}

void cmd_rec_stratified(const RunConfig& cfg, std::ostream& log) {
  auto corpus = load_corpus(cfg.paths.corpus, log);
  auto data = rec_data_for(cfg, corpus);
  auto model = load_model_for(cfg, data);
  auto strata = stratified_eval(model, data.test, cfg.stratum_floor);
  auto writer = writer_for(cfg, corpus.id());
  writer.write_text(cfg.paths.strata, strata_csv(strata));
  std::size_t reported = 0;
  for (const auto& s : strata) reported += s.result ? 1 : 0;
  log << "rec stratified: " << reported << " of " << strata.size() << " strata reported\n";
}

void cmd_cer(const RunConfig& cfg, std::ostream& log) {
  auto corpus = load_corpus(cfg.paths.corpus, log);
  require_chronological(corpus);
  auto gateway = gateway_for(cfg);
  auto provider = embedder_for(cfg);
  const auto templates = templates_for(cfg);
  const StageOneOptions stage1{cfg.stage1, cfg.abstract_budget, cfg.workers};

  // The endpoints anchor the curve, so they are computed even when not requested.
  std::vector<double> ratios = cfg.cer_ratios;
  ratios.push_back(0.0);
  ratios.push_back(1.0);
  std::sort(ratios.begin(), ratios.end());
  ratios.erase(std::unique(ratios.begin(), ratios.end()), ratios.end());

  struct Point {
    double ratio;
    std::size_t vocab_size;
    EvalResult eval;
  };
  std::vector<Point> points;
  for (double p : ratios) {
    AspectVocabulary vocab;
    std::vector<AnnotatedInteraction> annotated;
    if (p > 0.0) {
      auto params = cfg.vocab;
      params.ratio = p;
      vocab = build_vocabulary(corpus, params, *gateway, *provider, templates, stage1);
      annotated = run_stage2(corpus, vocab, *gateway, templates, {cfg.stage2, std::nullopt})
                      .annotated;
    }
    auto data = rec_data(corpus, &vocab, annotated, cfg.test_fraction);
    auto model = train(data.train, cfg.rec, data.aspects);
    points.push_back({p, vocab.size(), evaluate(model, data.test)});
    log << "cer: p=" << p << " vocab " << vocab.size() << " MSE " << points.back().eval.mse
        << '\n';
  }
  const double mse0 = points.front().eval.mse;
  const double mse_full = points.back().eval.mse;

  std::ostringstream csv;
  csv.precision(17);
  csv << "ratio,vocab_size,mse,mae,cer\n";
  for (const auto& pt : points) {
    if (std::find(cfg.cer_ratios.begin(), cfg.cer_ratios.end(), pt.ratio) ==
        cfg.cer_ratios.end()) {
      continue;
    }
    csv << pt.ratio << ',' << pt.vocab_size << ',' << pt.eval.mse << ',' << pt.eval.mae << ','
        << cer(mse0, mse_full, pt.eval.mse) << '\n';
  }
  write_file(calls_log_path(cfg.paths.cer), gateway->calls_to_jsonl());
  auto writer = writer_for(cfg, corpus.id());
  writer.write_text(cfg.paths.cer, csv.str());
  save_embedding_cache(cfg, *provider);
}

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
  const auto lexicon =
      cfg.paths.lexicon.empty() ? SynthLexicon::builtin() : SynthLexicon::load(cfg.paths.lexicon);
  auto world = generate_corpus(cfg.world, lexicon);
  auto script = script_extraction_responses(world.corpus, world.truth, cfg.script, lexicon);
  const auto& dir = cfg.paths.synth_dir;

  auto writer = writer_for(cfg, world.corpus.id());
  writer.write_text(dir / "corpus.jsonl", reviews_to_jsonl(world.corpus));
  writer.write_text(dir / "script.jsonl", script.to_jsonl());
  writer.write_json(dir / "truth.json", world.truth.to_json());
  json aliases = json::object();
  for (const auto& [alias, head] : lexicon.aliases(cfg.world.n_aspects).alias_to_head) {
    aliases[alias] = head;
  }
  writer.write_json(dir / "aliases.json", {{"aliases", aliases}});
  log << "synth: " << world.corpus.size() << " interactions, " << script.size()
      << " scripted responses in " << dir.string() << '\n';
}

void run_command(Command command, const RunConfig& cfg, std::ostream& log) {
  switch (command) {
    case Command::Ingest: return cmd_ingest(cfg, log);
    case Command::Vocab: return cmd_vocab(cfg, log);
    case Command::Extract: return cmd_extract(cfg, log);
    case Command::Metrics: return cmd_metrics(cfg, log);
    case Command::RecTrain: return cmd_rec_train(cfg, log);
    case Command::RecEval: return cmd_rec_eval(cfg, log);
    case Command::RecStratified: return cmd_rec_stratified(cfg, log);
    case Command::Cer: return cmd_cer(cfg, log);
    case Command::Synth: return cmd_synth(cfg, log);
  }
}

}  // namespace aspectkit::app
