#include "aspectkit/extraction.hpp"

#include <fstream>
#include <iterator>

#include "aspectkit/error.hpp"
#include "aspectkit/parse.hpp"
#include "aspectkit/text.hpp"

namespace aspectkit {

using nlohmann::json;

HistoryStore::HistoryStore(const AspectVocabulary& vocab)
    : vocab_(vocab.aspects.begin(), vocab.aspects.end()) {}

std::set<std::string> history_at(const HistoryStore& store, const std::string& user_id,
                                 const std::string& item_id) {
  std::set<std::string> out;
  if (auto it = store.per_user().find(user_id); it != store.per_user().end()) {
    out.insert(it->second.begin(), it->second.end());
  }
  if (auto it = store.per_item().find(item_id); it != store.per_item().end()) {
    out.insert(it->second.begin(), it->second.end());
  }
  return out;
}

void update_history(HistoryStore& store, const std::string& user_id, const std::string& item_id,
                    std::span<const Triple> triples) {
  for (const auto& t : triples) {
    if (!store.vocab_.contains(t.aspect)) continue;
    store.per_user_[user_id].insert(t.aspect);
    store.per_item_[item_id].insert(t.aspect);
  }
}

namespace {

std::vector<std::string> canonical_order(const AspectVocabulary& vocab,
                                         const std::set<std::string>& aspects) {
  std::vector<std::string> out;
  for (const auto& a : vocab.aspects) {
    if (aspects.contains(a)) out.push_back(a);
  }
  return out;
}

std::vector<std::string> drifted_aspects(const AspectVocabulary& vocab,
                                         std::span<const Triple> triples) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : triples) {
    if (!vocab.contains(t.aspect) && seen.insert(t.aspect).second) out.push_back(t.aspect);
  }
  return out;
}

}  // namespace

AnnotatedInteraction extract_triples(const Interaction& x, const AspectVocabulary& vocab,
                                     const HistoryStore& store, Gateway& gateway,
                                     const PromptTemplates& templates,
                                     const StageSettings& settings) {
  if (vocab.empty()) throw Error(ErrorKind::Input, "extraction needs a non-empty vocabulary");
  auto history = history_at(store, x.user_id, x.item_id);

  AnnotatedInteraction out;
  out.interaction = x;
  out.history_snapshot = canonical_order(vocab, history);
  try {
    auto bundle = render_dynamic_prompt(templates, vocab.aspects, history, x.review);
    out.triples = parse_triples(gateway.complete(settings.request(std::move(bundle))));
  } catch (const Error& e) {
    if (e.aborts_run()) throw;
    out.failed = true;
    out.error = std::string(to_string(e.kind())) + ": " + e.what();
    out.triples.clear();
  }
  out.drifted = drifted_aspects(vocab, out.triples);
  return out;
}

json to_json(const AnnotatedInteraction& a) {
  json triples = json::array();
  for (const auto& t : a.triples) {
    triples.push_back({{"aspect", t.aspect},
                       {"opinion", t.opinion},
                       {"sentiment", std::string(to_string(t.sentiment))}});
  }
  json j = {{"user_id", a.interaction.user_id},
            {"item_id", a.interaction.item_id},
            {"timestamp", a.interaction.timestamp},
            {"rating", a.interaction.rating},
            {"triples", std::move(triples)},
            {"history_snapshot", a.history_snapshot},
            {"drifted", a.drifted},
            {"failed", a.failed}};
  if (a.failed) j["error"] = a.error;
  return j;
}

std::string annotation_line(const AnnotatedInteraction& a) { return to_json(a).dump(); }

std::string annotations_to_jsonl(std::span<const AnnotatedInteraction> annotated) {
  std::string out;
  for (const auto& a : annotated) {
    out += annotation_line(a);
    out += '\n';
  }
  return out;
}

namespace {

AnnotatedInteraction from_json(const json& j, const Corpus& corpus) {
  InteractionKey key{j.at("user_id").get<std::string>(), j.at("item_id").get<std::string>(),
                     j.at("timestamp").get<std::int64_t>()};
  auto pos = corpus.find(key);
  if (!pos) throw Error(ErrorKind::Input, "annotation for unknown interaction " + key.to_string());
  AnnotatedInteraction a;
  a.interaction = corpus[*pos];
  for (const auto& t : j.at("triples")) {
    auto s = parse_sentiment(t.at("sentiment").get<std::string>());
    if (!s) throw Error(ErrorKind::Input, "annotation with unknown sentiment");
    a.triples.push_back({t.at("aspect").get<std::string>(), t.at("opinion").get<std::string>(), *s});
  }
  a.history_snapshot = j.at("history_snapshot").get<std::vector<std::string>>();
  a.drifted = j.at("drifted").get<std::vector<std::string>>();
  a.failed = j.at("failed").get<bool>();
  a.error = j.value("error", "");
  return a;
}

// Reads the completed prefix of a checkpoint. A torn final line (no
// trailing newline) is the footprint of an interrupted append; it is cut off
// so the next append starts on a clean line.
std::vector<AnnotatedInteraction> load_checkpoint(const std::filesystem::path& path,
                                                  const Corpus& corpus) {
  std::vector<AnnotatedInteraction> done;
  if (!std::filesystem::exists(path)) return done;
  std::string content;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Checkpoint, "cannot read checkpoint " + path.string());
    content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  auto complete_len = content.rfind('\n');
  complete_len = complete_len == std::string::npos ? 0 : complete_len + 1;
  if (complete_len != content.size()) {
    std::filesystem::resize_file(path, complete_len);
    content.resize(complete_len);
  }

  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    std::string line = content.substr(start, end - start);
    start = end + 1;
    const std::size_t at = done.size();
    AnnotatedInteraction a;
    try {
      a = from_json(json::parse(line), corpus);
    } catch (const std::exception& e) {
      throw Error(ErrorKind::Checkpoint, "checkpoint " + path.string() + " line " +
                                             std::to_string(at + 1) + " is corrupt: " + e.what());
    }
    if (at >= corpus.size() || key_of(a.interaction) != key_of(corpus[at])) {
      throw Error(ErrorKind::Checkpoint, "checkpoint " + path.string() + " line " +
                                             std::to_string(at + 1) +
                                             " does not match the corpus order");
    }
    done.push_back(std::move(a));
  }
  return done;
}

}  // namespace

StageTwoResult run_stage2(const Corpus& corpus, const AspectVocabulary& vocab, Gateway& gateway,
                          const PromptTemplates& templates, const StageTwoOptions& options) {
  if (!is_chronological(corpus)) {
    throw Error(ErrorKind::Input, "stage II requires a chronologically sorted corpus");
  }
  if (vocab.empty()) throw Error(ErrorKind::Input, "stage II needs a non-empty vocabulary");

  StageTwoResult result;
  std::vector<AnnotatedInteraction> done;
  std::ofstream checkpoint;
  if (options.checkpoint) {
    done = load_checkpoint(*options.checkpoint, corpus);
    checkpoint.open(*options.checkpoint, std::ios::binary | std::ios::app);
    if (!checkpoint) {
      throw Error(ErrorKind::Checkpoint, "cannot append to " + options.checkpoint->string());
    }
  }

  HistoryStore store(vocab);
  result.annotated.reserve(corpus.size());
  std::size_t i = 0;
  while (i < corpus.size()) {
    std::size_t group_end = i;
    while (group_end < corpus.size() && corpus[group_end].timestamp == corpus[i].timestamp) {
      ++group_end;
    }
    for (std::size_t k = i; k < group_end; ++k) {
      const auto& x = corpus[k];
      if (k < done.size()) {
        auto expected = canonical_order(vocab, history_at(store, x.user_id, x.item_id));
        if (done[k].history_snapshot != expected) {
          throw Error(ErrorKind::Checkpoint, "checkpoint history for " + key_of(x).to_string() +
                                                 " disagrees with replay; wrong vocabulary?");
        }
        result.annotated.push_back(std::move(done[k]));
        ++result.resumed;
      } else {
        result.annotated.push_back(
            extract_triples(x, vocab, store, gateway, templates, options.settings));
        if (checkpoint.is_open()) {
          checkpoint << annotation_line(result.annotated.back()) << '\n';
          checkpoint.flush();
        }
      }
      if (result.annotated.back().failed) ++result.failures;
    }
    for (std::size_t k = i; k < group_end; ++k) {
      const auto& a = result.annotated[k];
      update_history(store, a.interaction.user_id, a.interaction.item_id, a.triples);
    }
    i = group_end;
  }
  return result;
}

std::vector<AnnotatedInteraction> read_annotations(const std::filesystem::path& path,
                                                   const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Input, "cannot read annotations " + path.string());
  std::vector<AnnotatedInteraction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(from_json(json::parse(line), corpus));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Input,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace aspectkit
