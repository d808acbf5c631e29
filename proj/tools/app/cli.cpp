#include <functional>
#include <memory>

#include <CLI11.hpp>

#include "artifacts.hpp"
#include "aspectkit/error.hpp"
#include "aspectkit/version.hpp"
#include "commands.hpp"

namespace aspectkit::app {

namespace {

using Apply = std::function<void(RunConfig&)>;

// Registers a flag whose value overrides the config only when given.
template <typename T, typename Set>
void override_flag(CLI::App* app, std::vector<Apply>& pending, const std::string& name,
                   const std::string& help, Set set) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = app->add_option(name, *value, help);
  pending.push_back([value, opt, set](RunConfig& c) {
    if (opt->count() > 0) set(c, *value);
  });
}

void path_flag(CLI::App* app, std::vector<Apply>& pending, const std::string& name,
               const std::string& help, std::filesystem::path Paths::*member) {
  override_flag<std::string>(app, pending, name, help,
                             [member](RunConfig& c, const std::string& v) { c.paths.*member = v; });
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return kExitConfig;
    case ErrorKind::Input: return kExitInput;
    case ErrorKind::Parse:
    case ErrorKind::Unscripted:
    case ErrorKind::Backend:
    case ErrorKind::Auth:
    case ErrorKind::Unavailable: return kExitBackend;
    case ErrorKind::UndefinedMetric:
    case ErrorKind::Numeric: return kExitMetric;
    case ErrorKind::Checkpoint: return kExitCheckpoint;
  }
  return kExitInternal;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Review aspect mining, hallucination metrics and aspect-aware rating prediction",
               "aspectkit"};
  app.set_version_flag("--version", std::string(kCodeVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration");
  std::vector<Apply> pending;
  override_flag<std::uint64_t>(&app, pending, "--seed", "Master seed for every stage",
                               [](RunConfig& c, std::uint64_t v) { c.seed = v; });
  override_flag<std::size_t>(&app, pending, "--workers", "Worker threads within a stage",
                             [](RunConfig& c, std::size_t v) { c.workers = v; });
  override_flag<std::string>(&app, pending, "--backend", "Completion backend: scripted or http",
                             [](RunConfig& c, const std::string& v) { c.backend.kind = v; });
  override_flag<std::string>(&app, pending, "--endpoint", "Chat-completions URL (http backend)",
                             [](RunConfig& c, const std::string& v) { c.backend.endpoint = v; });
  path_flag(&app, pending, "--script", "Scripted responses (JSON lines)", &Paths::script);
  path_flag(&app, pending, "--aliases", "Alias lexicon for the offline embedder", &Paths::aliases);
  bool check = false;
  app.add_flag("--check", check, "Verify artifacts byte-for-byte against existing files");

  Command command = Command::Ingest;
  auto select = [&command](Command c) { return [&command, c] { command = c; }; };

  auto* ingest = app.add_subcommand("ingest", "Validate, filter and sort a review file");
  ingest->parse_complete_callback(select(Command::Ingest));
  path_flag(ingest, pending, "--input", "Raw reviews (JSON lines)", &Paths::input);
  path_flag(ingest, pending, "--out", "Corpus output", &Paths::corpus);
  path_flag(ingest, pending, "--rejects", "Rejected-records report", &Paths::rejects);
  override_flag<std::size_t>(ingest, pending, "--min-user", "Drop users with at most N records",
                             [](RunConfig& c, std::size_t v) { c.min_user = v; });
  override_flag<std::size_t>(ingest, pending, "--min-item", "Drop items with at most N records",
                             [](RunConfig& c, std::size_t v) { c.min_item = v; });
  override_flag<std::int64_t>(ingest, pending, "--since", "Drop records before this timestamp",
                              [](RunConfig& c, std::int64_t v) { c.since = v; });

  auto* vocab = app.add_subcommand("vocab", "Induce the aspect vocabulary");
  vocab->parse_complete_callback(select(Command::Vocab));
  path_flag(vocab, pending, "--corpus", "Corpus", &Paths::corpus);
  path_flag(vocab, pending, "--out", "Vocabulary output", &Paths::vocab);
  path_flag(vocab, pending, "--similarity", "Pairwise similarity CSV", &Paths::similarity);
  override_flag<double>(vocab, pending, "--p", "Sampling ratio",
                        [](RunConfig& c, double v) { c.vocab.ratio = v; });
  override_flag<std::size_t>(vocab, pending, "--partitions,-K", "Number of partitions",
                             [](RunConfig& c, std::size_t v) { c.vocab.partitions = v; });
  override_flag<std::size_t>(vocab, pending, "--clusters,-C", "Number of clusters",
                             [](RunConfig& c, std::size_t v) { c.vocab.clusters = v; });

  auto* extract = app.add_subcommand("extract", "History-conditioned triple extraction");
  extract->parse_complete_callback(select(Command::Extract));
  path_flag(extract, pending, "--corpus", "Corpus", &Paths::corpus);
  path_flag(extract, pending, "--vocab", "Vocabulary", &Paths::vocab);
  path_flag(extract, pending, "--out", "Annotation output", &Paths::annotations);
  path_flag(extract, pending, "--checkpoint", "Checkpoint (default <out>.ckpt)",
            &Paths::checkpoint);

  auto* metrics = app.add_subcommand("metrics", "Aspect drift and opinion fidelity");
  metrics->parse_complete_callback(select(Command::Metrics));
  path_flag(metrics, pending, "--corpus", "Corpus", &Paths::corpus);
  path_flag(metrics, pending, "--vocab", "Vocabulary", &Paths::vocab);
  path_flag(metrics, pending, "--annotations", "Annotations", &Paths::annotations);
  path_flag(metrics, pending, "--out", "Report output", &Paths::report);
  path_flag(metrics, pending, "--rows", "Per-interaction CSV", &Paths::rows);
  override_flag<std::size_t>(metrics, pending, "--delta", "Span length window",
                             [](RunConfig& c, std::size_t v) { c.delta = v; });

  auto* rec = app.add_subcommand("rec", "Rating prediction");
  rec->require_subcommand(1);
  auto rec_inputs = [&pending](CLI::App* sub) {
    path_flag(sub, pending, "--corpus", "Corpus", &Paths::corpus);
    path_flag(sub, pending, "--vocab", "Vocabulary", &Paths::vocab);
    path_flag(sub, pending, "--annotations", "Annotations", &Paths::annotations);
    path_flag(sub, pending, "--model", "Model file", &Paths::model);
    auto no_aspects = std::make_shared<bool>(false);
    sub->add_flag("--no-aspects", *no_aspects, "Train without aspect features");
    pending.push_back([no_aspects](RunConfig& c) {
      if (*no_aspects) c.use_aspects = false;
    });
  };
  auto* rec_train = rec->add_subcommand("train", "Fit the factor model");
  rec_train->parse_complete_callback(select(Command::RecTrain));
  rec_inputs(rec_train);
  override_flag<std::size_t>(rec_train, pending, "--dim", "Latent dimension",
                             [](RunConfig& c, std::size_t v) { c.rec.dim = v; });
  override_flag<std::size_t>(rec_train, pending, "--epochs", "SGD epochs",
                             [](RunConfig& c, std::size_t v) { c.rec.epochs = v; });
  auto* rec_eval = rec->add_subcommand("eval", "MSE and MAE on the held-out split");
  rec_eval->parse_complete_callback(select(Command::RecEval));
  rec_inputs(rec_eval);
  path_flag(rec_eval, pending, "--out", "Evaluation output", &Paths::eval);
  auto* rec_strat = rec->add_subcommand("stratified", "Evaluation by review length");
  rec_strat->parse_complete_callback(select(Command::RecStratified));
  rec_inputs(rec_strat);
  path_flag(rec_strat, pending, "--out", "Strata CSV", &Paths::strata);
  override_flag<std::size_t>(rec_strat, pending, "--floor", "Minimum stratum size",
                             [](RunConfig& c, std::size_t v) { c.stratum_floor = v; });

  auto* cer_cmd = app.add_subcommand("cer", "Error reduction across vocabulary sampling ratios");
  cer_cmd->parse_complete_callback(select(Command::Cer));
  path_flag(cer_cmd, pending, "--corpus", "Corpus", &Paths::corpus);
  path_flag(cer_cmd, pending, "--out", "CER curve CSV", &Paths::cer);
  override_flag<std::vector<double>>(
      cer_cmd, pending, "--ratios", "Sampling ratios",
      [](RunConfig& c, const std::vector<double>& v) { c.cer_ratios = v; });

  auto* synth = app.add_subcommand("synth", "Generate a synthetic world and its scripts");
  synth->parse_complete_callback(select(Command::Synth));
  path_flag(synth, pending, "--out-dir", "Output directory", &Paths::synth_dir);
  override_flag<std::size_t>(synth, pending, "--n-users", "Users",
                             [](RunConfig& c, std::size_t v) { c.world.n_users = v; });
  override_flag<std::size_t>(synth, pending, "--n-items", "Items",
                             [](RunConfig& c, std::size_t v) { c.world.n_items = v; });
  override_flag<std::size_t>(synth, pending, "--n-interactions", "Interactions",
                             [](RunConfig& c, std::size_t v) { c.world.n_interactions = v; });
  override_flag<double>(synth, pending, "--drift-q", "Aspect drift injection rate",
                        [](RunConfig& c, double v) { c.script.drift_q = v; });
  override_flag<std::size_t>(synth, pending, "--paraphrase-level", "Opinion words substituted",
                             [](RunConfig& c, std::size_t v) { c.script.paraphrase_level = v; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kCodeVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "aspectkit: usage error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const auto& apply : pending) apply(cfg);
    cfg.check = check;
    cfg.apply_seed();
    const auto problems = cfg.problems(command);
    if (!problems.empty()) {
      err << "aspectkit: config error: " << problems.size() << " problem(s)\n";
      for (const auto& p : problems) err << "  - " << p << '\n';
      return kExitConfig;
    }
    run_command(command, cfg, out);
    return kExitOk;
  } catch (const Error& e) {
    err << "aspectkit: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const CheckMismatch& e) {
    err << "aspectkit: check failed: " << e.what() << '\n';
    return kExitCheckMismatch;
  } catch (const std::exception& e) {
    err << "aspectkit: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace aspectkit::app
