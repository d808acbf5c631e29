#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aspectkit/triple.hpp"

namespace aspectkit {

// Model output contract: JSON only. The one lenient step is removing a
// surrounding ``` fence (with or without a language tag); anything else that
// is not the expected shape raises ParseError carrying the raw text.

std::string strip_code_fence(std::string_view text);

/// JSON array of strings -> normalized aspects, empties and repeats dropped
/// (first occurrence wins).
std::vector<std::string> parse_aspect_list(std::string_view text);

/// JSON array of {aspect, opinion, sentiment} objects.
std::vector<Triple> parse_triples(std::string_view text);

std::string serialize_triples(std::span<const Triple> triples);

}  // namespace aspectkit
