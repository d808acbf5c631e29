#include "aspectkit/prompt.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "aspectkit/error.hpp"
#include "aspectkit/hash.hpp"
#include "aspectkit/text.hpp"
#include "aspectkit/version.hpp"

namespace aspectkit {

using nlohmann::json;

std::string_view to_string(PromptKind kind) noexcept {
  switch (kind) {
    case PromptKind::Abstract: return "abstract";
    case PromptKind::Aspect: return "aspect";
    case PromptKind::Dynamic: return "dynamic";
  }
  return "dynamic";
}

PromptKind parse_prompt_kind(std::string_view name) {
  if (name == "abstract") return PromptKind::Abstract;
  if (name == "aspect") return PromptKind::Aspect;
  if (name == "dynamic") return PromptKind::Dynamic;
  throw Error(ErrorKind::Input, "unknown prompt kind '" + std::string(name) + "'");
}

const std::string& PromptBundle::segment(std::string_view label) const {
  for (const auto& s : segments) {
    if (s.label == label) return s.text;
  }
  throw std::out_of_range("no prompt segment '" + std::string(label) + "'");
}

std::string unit_key(std::string_view text) { return short_hash(trim(text)); }

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("ASPECTKIT_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return std::filesystem::path(std::string(kDefaultDataDir));
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read prompt templates " + path.string());
  try {
    json j = json::parse(in);
    PromptTemplates t;
    t.version = j.at("version").get<std::string>();
    t.abstract_instruction = j.at("abstract").at("instruction").get<std::string>();
    t.aspect_instruction = j.at("aspect").at("instruction").get<std::string>();
    const auto& d = j.at("dynamic");
    t.global = d.at("global").get<std::string>();
    t.personal = d.at("personal").get<std::string>();
    t.personal_empty = d.at("personal_empty").get<std::string>();
    t.extract = d.at("extract").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, "bad prompt template file " + path.string() + ": " + e.what());
  }
}

PromptTemplates PromptTemplates::builtin() { return load(data_dir() / "prompts" / "v1.json"); }

namespace {

std::string substitute(std::string text, std::string_view placeholder, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
  return text;
}

PromptBundle assemble(PromptKind kind, std::vector<PromptSegment> segments) {
  PromptBundle b;
  b.kind = kind;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) b.rendered += kSegmentSeparator;
    b.rendered += segments[i].text;
  }
  b.segments = std::move(segments);
  return b;
}

std::string bullet_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += '\n';
    out += "- " + items[i];
  }
  return out;
}

PromptBundle abstract_bundle(const PromptTemplates& t, const std::vector<std::string>& batch) {
  std::string body;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (i > 0) body += kItemSeparator;
    body += batch[i];
  }
  auto b = assemble(PromptKind::Abstract,
                    {{"instruction", t.abstract_instruction}, {"extract", std::move(body)}});
  for (const auto& r : batch) b.unit_keys.push_back(unit_key(r));
  return b;
}

}  // namespace

std::vector<PromptBundle> render_abstract_prompt(const PromptTemplates& t,
                                                 std::span<const std::string> reviews,
                                                 std::size_t budget) {
  if (reviews.empty()) throw Error(ErrorKind::Input, "abstract prompt needs at least one review");
  if (budget == 0) throw Error(ErrorKind::Config, "abstract token budget must be positive");

  std::vector<PromptBundle> out;
  std::vector<std::string> batch;
  std::size_t used = 0;
  auto flush = [&] {
    if (!batch.empty()) out.push_back(abstract_bundle(t, batch));
    batch.clear();
    used = 0;
  };

  for (std::size_t i = 0; i < reviews.size(); ++i) {
    auto words = split_whitespace(reviews[i]);
    if (words.size() > budget) {
      flush();
      words.resize(budget);
      batch.push_back(join(words, " "));
      flush();
      out.back().warnings.push_back("review " + std::to_string(i) + " truncated to " +
                                    std::to_string(budget) + " tokens");
      continue;
    }
    if (used + words.size() > budget) flush();
    batch.push_back(trim(reviews[i]));
    used += words.size();
  }
  flush();
  return out;
}

PromptBundle render_aspect_prompt(const PromptTemplates& t,
                                  std::span<const std::string> abstracts) {
  if (abstracts.empty()) throw Error(ErrorKind::Input, "aspect prompt needs at least one abstract");
  std::string body;
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < abstracts.size(); ++i) {
    if (i > 0) body += kItemSeparator;
    body += abstracts[i];
    std::size_t start = 0;
    const std::string& a = abstracts[i];
    while (start <= a.size()) {
      auto end = a.find('\n', start);
      if (end == std::string::npos) end = a.size();
      auto line = trim(std::string_view(a).substr(start, end - start));
      if (!line.empty()) keys.push_back(unit_key(line));
      start = end + 1;
    }
  }
  auto b = assemble(PromptKind::Aspect,
                    {{"instruction", t.aspect_instruction}, {"extract", std::move(body)}});
  b.unit_keys = std::move(keys);
  return b;
}

PromptBundle render_dynamic_prompt(const PromptTemplates& t, std::span<const std::string> vocab,
                                   const std::set<std::string>& history, std::string_view review) {
  if (vocab.empty()) throw Error(ErrorKind::Input, "dynamic prompt needs a non-empty vocabulary");

  std::vector<std::string> listed_vocab(vocab.begin(), vocab.end());
  std::vector<std::string> listed_history;
  std::set<std::string> placed;
  for (const auto& a : vocab) {
    if (history.contains(a)) {
      listed_history.push_back(a);
      placed.insert(a);
    }
  }
  for (const auto& a : history) {
    if (!placed.contains(a)) listed_history.push_back(a);
  }

  std::string personal = listed_history.empty()
                             ? t.personal_empty
                             : substitute(t.personal, "{{history}}", bullet_list(listed_history));
  auto b = assemble(PromptKind::Dynamic,
                    {{"global", substitute(t.global, "{{aspects}}", bullet_list(listed_vocab))},
                     {"personal", std::move(personal)},
                     {"extract", substitute(t.extract, "{{review}}", trim(review))}});
  b.unit_keys.push_back(unit_key(review));
  return b;
}

}  // namespace aspectkit
