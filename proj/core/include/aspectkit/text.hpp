#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace aspectkit {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Trim plus ASCII lowercase. Applied to aspects before counting and to every
// text before embedding.
std::string normalize_text(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);
std::size_t word_count(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Tokenizer shared by span grounding and mean pooling: lowercase, split on
// whitespace, strip leading/trailing punctuation, drop tokens that end up empty.
std::vector<std::string> tokenize(std::string_view text);

// RFC 4180 field: quoted when it contains a comma, quote or line break.
std::string csv_field(std::string_view s);

}  // namespace aspectkit
