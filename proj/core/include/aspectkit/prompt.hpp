#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aspectkit {

enum class PromptKind { Abstract, Aspect, Dynamic };

std::string_view to_string(PromptKind kind) noexcept;
PromptKind parse_prompt_kind(std::string_view name);

struct PromptSegment {
  std::string label;
  std::string text;
};

/// A rendered prompt. `rendered` is the segments joined by
/// kSegmentSeparator. `unit_keys` are content keys of the inputs the prompt
/// was built from (one per review, abstract line or review respectively);
/// the scripted backend resolves prompts through them.
struct PromptBundle {
  PromptKind kind = PromptKind::Dynamic;
  std::vector<PromptSegment> segments;
  std::string rendered;
  std::vector<std::string> unit_keys;
  std::vector<std::string> warnings;

  /// Throws std::out_of_range for an unknown label.
  const std::string& segment(std::string_view label) const;
};

inline constexpr std::string_view kSegmentSeparator = "\n\n";
inline constexpr std::string_view kItemSeparator = "\n";

/// Content key used for scripted lookups: short_hash(trim(text)).
std::string unit_key(std::string_view text);

/// Prompt wording, loaded from a versioned JSON template file.
struct PromptTemplates {
  std::string version;
  std::string abstract_instruction;
  std::string aspect_instruction;
  std::string global;          // {{aspects}}
  std::string personal;        // {{history}}
  std::string personal_empty;
  std::string extract;         // {{review}}

  static PromptTemplates load(const std::filesystem::path& path);
  /// Templates shipped under <data dir>/prompts/v1.json.
  static PromptTemplates builtin();
};

/// Resolves the data directory: $ASPECTKIT_DATA_DIR, else the build-tree default.
std::filesystem::path data_dir();

/// Greedy packing of whole reviews into batches of at most `budget`
/// whitespace tokens. A review longer than the budget is truncated to the
/// budget, sits alone in its batch, and leaves a warning on that bundle.
std::vector<PromptBundle> render_abstract_prompt(const PromptTemplates& t,
                                                 std::span<const std::string> reviews,
                                                 std::size_t budget);

PromptBundle render_aspect_prompt(const PromptTemplates& t,
                                  std::span<const std::string> abstracts);

/// Segments [global, personal, extract]. `vocab` is in canonical order; the
/// history is listed in that same order.
PromptBundle render_dynamic_prompt(const PromptTemplates& t, std::span<const std::string> vocab,
                                   const std::set<std::string>& history, std::string_view review);

}  // namespace aspectkit
