#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace aspectkit {

enum class Sentiment { Positive, Negative, Neutral };

std::string_view to_string(Sentiment s) noexcept;
std::optional<Sentiment> parse_sentiment(std::string_view token);

/// One (aspect, opinion, sentiment) extraction result.
struct Triple {
  std::string aspect;   // normalized: lowercase, trimmed
  std::string opinion;  // trimmed, otherwise verbatim
  Sentiment sentiment = Sentiment::Neutral;

  bool operator==(const Triple&) const = default;
};

}  // namespace aspectkit
