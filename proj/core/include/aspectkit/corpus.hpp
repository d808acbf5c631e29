#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aspectkit {

/// One (user, item, rating, review, timestamp) record.
struct Interaction {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::string review;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

/// Identity of an interaction inside a corpus.
struct InteractionKey {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;

  auto operator<=>(const InteractionKey&) const = default;
  std::string to_string() const;
};

InteractionKey key_of(const Interaction& x);

inline constexpr double kMinRating = 1.0;
inline constexpr double kMaxRating = 5.0;

/// Returns the reason the record violates the Interaction invariants, if any.
std::optional<std::string> validate(const Interaction& x);

/// Canonical one-line JSON form; the corpus hash is computed over these lines.
std::string serialize_interaction(const Interaction& x);

/// Ordered interactions with a content hash. Immutable once built.
///
/// Construction enforces the invariants: every record valid and no two
/// records sharing (user_id, item_id, timestamp).
class Corpus {
 public:
  Corpus();
  explicit Corpus(std::vector<Interaction> interactions);

  const std::vector<Interaction>& interactions() const noexcept { return interactions_; }
  const Interaction& operator[](std::size_t i) const { return interactions_[i]; }
  std::size_t size() const noexcept { return interactions_.size(); }
  bool empty() const noexcept { return interactions_.empty(); }
  auto begin() const noexcept { return interactions_.begin(); }
  auto end() const noexcept { return interactions_.end(); }

  /// SHA-256 over the canonical serialization, in order.
  const std::string& id() const noexcept { return id_; }

  std::optional<std::size_t> find(const InteractionKey& key) const;

 private:
  std::vector<Interaction> interactions_;
  std::string id_;
  std::map<InteractionKey, std::size_t> index_;
};

struct Reject {
  std::size_t line_no = 0;  // 1-based
  std::string reason;
};

struct LoadResult {
  Corpus corpus;
  std::vector<Reject> rejects;
};

/// Reads a JSON-lines review file. Invalid records go to `rejects`; the
/// corpus keeps file order. Throws on an unreadable file or when no record
/// survives validation.
LoadResult load_reviews(const std::filesystem::path& path);

void write_reviews(const Corpus& corpus, const std::filesystem::path& path);
std::string reviews_to_jsonl(const Corpus& corpus);
std::string rejects_to_jsonl(const std::vector<Reject>& rejects);

/// Drops interactions before `since`, then removes users with at most
/// `min_user` records and items with at most `min_item` records, repeating
/// until no removal happens.
Corpus filter_corpus(const Corpus& corpus, std::size_t min_user, std::size_t min_item,
                     std::int64_t since);

/// One independent draw of floor(|D|/K) interactions, without replacement.
struct Partition {
  std::size_t index = 1;             // k in [1, K]
  std::vector<std::size_t> members;  // positions in the source corpus, ascending
};

std::vector<Partition> subsample_partitions(const Corpus& corpus, std::size_t k,
                                            std::uint64_t seed);

/// Uniform subset of floor(ratio * |D|) interactions (at least one), kept in
/// corpus order. Deterministic given (corpus id, ratio, seed).
Corpus sample_ratio(const Corpus& corpus, double ratio, std::uint64_t seed);

/// Stable sort by (timestamp, user_id, item_id).
Corpus sort_chronologically(const Corpus& corpus);
bool is_chronological(const Corpus& corpus);

enum class LengthStratum { Short, Medium, Long, ExtraLong };

inline constexpr LengthStratum kAllStrata[] = {LengthStratum::Short, LengthStratum::Medium,
                                               LengthStratum::Long, LengthStratum::ExtraLong};

std::string_view to_string(LengthStratum s) noexcept;

/// Short [1,10], Medium (10,50], Long (50,100], Extra-long (100,inf) words.
/// Boundary counts fall in the lower stratum.
LengthStratum stratum_of(std::size_t words) noexcept;

std::map<LengthStratum, Corpus> stratify_by_length(const Corpus& corpus);

}  // namespace aspectkit
