#include "aspectkit/triple.hpp"

#include "aspectkit/text.hpp"

namespace aspectkit {

std::string_view to_string(Sentiment s) noexcept {
  switch (s) {
    case Sentiment::Positive: return "positive";
    case Sentiment::Negative: return "negative";
    case Sentiment::Neutral: return "neutral";
  }
  return "neutral";
}

std::optional<Sentiment> parse_sentiment(std::string_view token) {
  auto t = normalize_text(token);
  if (t == "positive") return Sentiment::Positive;
  if (t == "negative") return Sentiment::Negative;
  if (t == "neutral") return Sentiment::Neutral;
  return std::nullopt;
}

}  // namespace aspectkit
