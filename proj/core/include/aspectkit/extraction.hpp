#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspectkit/corpus.hpp"
#include "aspectkit/gateway.hpp"
#include "aspectkit/prompt.hpp"
#include "aspectkit/triple.hpp"
#include "aspectkit/vocab.hpp"

namespace aspectkit {

struct AnnotatedInteraction {
  Interaction interaction;
  std::vector<Triple> triples;
  std::vector<std::string> history_snapshot;  // canonical (vocabulary) order
  std::vector<std::string> drifted;           // aspects outside the vocabulary, first-seen order
  bool failed = false;
  std::string error;

  bool operator==(const AnnotatedInteraction&) const = default;
};

/// Per-user and per-item aspect sets. Only vocabulary aspects are ever
/// stored, and sets only grow.
class HistoryStore {
 public:
  explicit HistoryStore(const AspectVocabulary& vocab);

  const std::map<std::string, std::set<std::string>>& per_user() const noexcept { return per_user_; }
  const std::map<std::string, std::set<std::string>>& per_item() const noexcept { return per_item_; }
  bool in_vocabulary(const std::string& aspect) const { return vocab_.contains(aspect); }

 private:
  friend void update_history(HistoryStore&, const std::string&, const std::string&,
                             std::span<const Triple>);
  std::set<std::string> vocab_;
  std::map<std::string, std::set<std::string>> per_user_;
  std::map<std::string, std::set<std::string>> per_item_;
};

/// per_user[u] union per_item[i]; empty for unseen keys.
std::set<std::string> history_at(const HistoryStore& store, const std::string& user_id,
                                 const std::string& item_id);

/// Adds the in-vocabulary aspects of `triples` to both sides. Drifted
/// aspects never enter the store.
void update_history(HistoryStore& store, const std::string& user_id, const std::string& item_id,
                    std::span<const Triple> triples);

struct StageTwoOptions {
  StageSettings settings;
  /// Append-only JSON-lines checkpoint; completed interactions found there
  /// are replayed instead of re-queried.
  std::optional<std::filesystem::path> checkpoint;
};

/// Single interaction: dynamic prompt over history_at(store, u, i), parse,
/// record drift. Gateway or parse failures produce a failed record; errors
/// that make the backend unusable propagate.
AnnotatedInteraction extract_triples(const Interaction& x, const AspectVocabulary& vocab,
                                     const HistoryStore& store, Gateway& gateway,
                                     const PromptTemplates& templates,
                                     const StageSettings& settings);

struct StageTwoResult {
  std::vector<AnnotatedInteraction> annotated;  // corpus order
  std::size_t failures = 0;
  std::size_t resumed = 0;  // taken from the checkpoint
};

/// Processes a chronologically sorted corpus. Interactions sharing a
/// timestamp do not see each other: history updates are applied once the
/// whole timestamp group has been extracted.
StageTwoResult run_stage2(const Corpus& corpus, const AspectVocabulary& vocab, Gateway& gateway,
                          const PromptTemplates& templates, const StageTwoOptions& options);

nlohmann::json to_json(const AnnotatedInteraction& a);
std::string annotation_line(const AnnotatedInteraction& a);
std::string annotations_to_jsonl(std::span<const AnnotatedInteraction> annotated);

/// Reads an annotation stream; review text and rating come from `corpus`.
std::vector<AnnotatedInteraction> read_annotations(const std::filesystem::path& path,
                                                   const Corpus& corpus);

}  // namespace aspectkit
