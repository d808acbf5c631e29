#include "aspectkit/parse.hpp"

#include <cctype>
#include <set>

#include <json.hpp>

#include "aspectkit/error.hpp"
#include "aspectkit/text.hpp"

namespace aspectkit {

using nlohmann::json;

std::string strip_code_fence(std::string_view text) {
  std::string s = trim(text);
  constexpr std::string_view fence = "```";
  if (s.rfind(fence, 0) != 0) return s;
  std::size_t i = fence.size();
  while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' ||
                          s[i] == '-')) {
    ++i;
  }
  std::string body = s.substr(i);
  body = trim(body);
  if (body.size() >= fence.size() && body.compare(body.size() - fence.size(), fence.size(), fence) == 0) {
    body.erase(body.size() - fence.size());
  }
  return trim(body);
}

namespace {

json parse_array(std::string_view text, std::string_view what) {
  std::string body = strip_code_fence(text);
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": invalid JSON (" + e.what() + ")", std::string(text));
  }
  if (!j.is_array()) {
    throw ParseError(std::string(what) + ": expected a JSON array", std::string(text));
  }
  return j;
}

}  // namespace

std::vector<std::string> parse_aspect_list(std::string_view text) {
  json arr = parse_array(text, "aspect list");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw ParseError("aspect list: element " + std::to_string(i) + " is not a string",
                       std::string(text));
    }
    auto a = normalize_text(arr[i].get<std::string>());
    if (a.empty() || !seen.insert(a).second) continue;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Triple> parse_triples(std::string_view text) {
  json arr = parse_array(text, "triples");
  std::vector<Triple> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& el = arr[i];
    auto where = "triples: element " + std::to_string(i);
    if (!el.is_object()) throw ParseError(where + " is not an object", std::string(text));
    for (const char* key : {"aspect", "opinion", "sentiment"}) {
      if (!el.contains(key)) throw ParseError(where + " missing key " + key, std::string(text));
      if (!el[key].is_string()) {
        throw ParseError(where + " key " + key + " is not a string", std::string(text));
      }
    }
    Triple t;
    t.aspect = normalize_text(el["aspect"].get<std::string>());
    t.opinion = trim(el["opinion"].get<std::string>());
    auto sentiment = parse_sentiment(el["sentiment"].get<std::string>());
    if (!sentiment) {
      throw ParseError(where + " has unknown sentiment '" + el["sentiment"].get<std::string>() +
                           "'",
                       std::string(text));
    }
    t.sentiment = *sentiment;
    if (t.aspect.empty()) throw ParseError(where + " has an empty aspect", std::string(text));
    if (t.opinion.empty()) throw ParseError(where + " has an empty opinion", std::string(text));
    out.push_back(std::move(t));
  }
  return out;
}

std::string serialize_triples(std::span<const Triple> triples) {
  json arr = json::array();
  for (const auto& t : triples) {
    arr.push_back({{"aspect", t.aspect},
                   {"opinion", t.opinion},
                   {"sentiment", std::string(to_string(t.sentiment))}});
  }
  return arr.dump();
}

}  // namespace aspectkit
