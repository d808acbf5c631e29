#include "aspectkit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "aspectkit/error.hpp"
#include "aspectkit/hash.hpp"
#include "aspectkit/text.hpp"

namespace aspectkit {

using nlohmann::json;

std::string InteractionKey::to_string() const {
  return user_id + "|" + item_id + "|" + std::to_string(timestamp);
}

InteractionKey key_of(const Interaction& x) { return {x.user_id, x.item_id, x.timestamp}; }

std::optional<std::string> validate(const Interaction& x) {
  if (x.user_id.empty()) return "empty user_id";
  if (x.item_id.empty()) return "empty item_id";
  if (!std::isfinite(x.rating) || x.rating < kMinRating || x.rating > kMaxRating) {
    std::ostringstream os;
    os << "rating " << x.rating << " outside [1,5]";
    return os.str();
  }
  if (x.timestamp < 0) return "negative timestamp";
  if (trim(x.review).empty()) return "empty review text";
  return std::nullopt;
}

std::string serialize_interaction(const Interaction& x) {
  json j = {{"user_id", x.user_id},
            {"item_id", x.item_id},
            {"rating", x.rating},
            {"text", x.review},
            {"timestamp", x.timestamp}};
  return j.dump();
}

Corpus::Corpus() : id_(sha256_hex("")) {}

Corpus::Corpus(std::vector<Interaction> interactions) : interactions_(std::move(interactions)) {
  std::string canonical;
  for (std::size_t i = 0; i < interactions_.size(); ++i) {
    const auto& x = interactions_[i];
    if (auto reason = validate(x)) {
      throw Error(ErrorKind::Input, "interaction " + std::to_string(i) + ": " + *reason);
    }
    if (!index_.emplace(key_of(x), i).second) {
      throw Error(ErrorKind::Input, "duplicate interaction " + key_of(x).to_string());
    }
    canonical += serialize_interaction(x);
    canonical += '\n';
  }
  id_ = sha256_hex(canonical);
}

std::optional<std::size_t> Corpus::find(const InteractionKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::optional<std::string> read_record(const std::string& line, Interaction& out) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error&) {
    return "malformed JSON";
  }
  if (!j.is_object()) return "record is not a JSON object";
  for (const char* key : {"user_id", "item_id", "rating", "text", "timestamp"}) {
    if (!j.contains(key)) return std::string("missing key ") + key;
  }
  if (!j["user_id"].is_string()) return "user_id is not a string";
  if (!j["item_id"].is_string()) return "item_id is not a string";
  if (!j["rating"].is_number()) return "rating is not a number";
  if (!j["text"].is_string()) return "text is not a string";
  if (!j["timestamp"].is_number_integer()) return "timestamp is not an integer";
  out.user_id = j["user_id"].get<std::string>();
  out.item_id = j["item_id"].get<std::string>();
  out.rating = j["rating"].get<double>();
  out.review = j["text"].get<std::string>();
  out.timestamp = j["timestamp"].get<std::int64_t>();
  return validate(out);
}

}  // namespace

LoadResult load_reviews(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Input, "cannot read " + path.string());

  std::vector<Interaction> kept;
  std::vector<Reject> rejects;
  std::map<InteractionKey, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Interaction x;
    if (auto reason = read_record(line, x)) {
      rejects.push_back({line_no, *reason});
      continue;
    }
    auto [it, fresh] = seen.emplace(key_of(x), line_no);
    if (!fresh) {
      rejects.push_back({line_no, "duplicate of line " + std::to_string(it->second)});
      continue;
    }
    kept.push_back(std::move(x));
  }
  if (kept.empty()) {
    throw Error(ErrorKind::Input, "no valid records in " + path.string() + " (" +
                                      std::to_string(rejects.size()) + " rejected)");
  }
  return {Corpus(std::move(kept)), std::move(rejects)};
}

std::string reviews_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& x : corpus) {
    out += serialize_interaction(x);
    out += '\n';
  }
  return out;
}

void write_reviews(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Input, "cannot write " + path.string());
  out << reviews_to_jsonl(corpus);
}

std::string rejects_to_jsonl(const std::vector<Reject>& rejects) {
  std::string out;
  for (const auto& r : rejects) {
    out += json{{"line_no", r.line_no}, {"reason", r.reason}}.dump();
    out += '\n';
  }
  return out;
}

Corpus filter_corpus(const Corpus& corpus, std::size_t min_user, std::size_t min_item,
                     std::int64_t since) {
  std::vector<Interaction> current;
  for (const auto& x : corpus) {
    if (x.timestamp >= since) current.push_back(x);
  }
  for (;;) {
    std::map<std::string, std::size_t> per_user;
    std::map<std::string, std::size_t> per_item;
    for (const auto& x : current) {
      ++per_user[x.user_id];
      ++per_item[x.item_id];
    }
    std::vector<Interaction> next;
    next.reserve(current.size());
    for (auto& x : current) {
      if (per_user[x.user_id] > min_user && per_item[x.item_id] > min_item) {
        next.push_back(std::move(x));
      }
    }
    bool stable = next.size() == current.size();
    current = std::move(next);
    if (stable) break;
  }
  return Corpus(std::move(current));
}

namespace {

std::mt19937_64 seeded_engine(std::string_view label) {
  std::uint64_t s = derive_seed(label);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return std::mt19937_64(seq);
}

std::vector<std::size_t> draw_without_replacement(std::size_t population, std::size_t n,
                                                  std::mt19937_64& rng) {
  std::vector<std::size_t> all(population);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(n);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), n, rng);
  return picked;
}

}  // namespace

std::vector<Partition> subsample_partitions(const Corpus& corpus, std::size_t k,
                                            std::uint64_t seed) {
  if (k == 0) throw Error(ErrorKind::Config, "partition count K must be >= 1");
  if (k > corpus.size()) {
    throw Error(ErrorKind::Config, "partition count K=" + std::to_string(k) +
                                       " exceeds corpus size " + std::to_string(corpus.size()));
  }
  const std::size_t size = corpus.size() / k;
  std::vector<Partition> out;
  out.reserve(k);
  for (std::size_t index = 1; index <= k; ++index) {
    auto rng = seeded_engine("partition|" + corpus.id() + "|" + std::to_string(k) + "|" +
                             std::to_string(seed) + "|" + std::to_string(index));
    out.push_back({index, draw_without_replacement(corpus.size(), size, rng)});
  }
  return out;
}

Corpus sample_ratio(const Corpus& corpus, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw Error(ErrorKind::Config, "sampling ratio must lie in (0, 1]");
  }
  if (ratio == 1.0) return corpus;
  auto n = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(corpus.size())));
  n = std::max<std::size_t>(n, 1);
  std::ostringstream label;
  label << "ratio|" << corpus.id() << "|" << ratio << "|" << seed;
  auto rng = seeded_engine(label.str());
  std::vector<Interaction> picked;
  for (auto i : draw_without_replacement(corpus.size(), n, rng)) picked.push_back(corpus[i]);
  return Corpus(std::move(picked));
}

namespace {

bool chrono_less(const Interaction& a, const Interaction& b) {
  return std::tie(a.timestamp, a.user_id, a.item_id) <
         std::tie(b.timestamp, b.user_id, b.item_id);
}

}  // namespace

Corpus sort_chronologically(const Corpus& corpus) {
  std::vector<Interaction> xs = corpus.interactions();
  std::stable_sort(xs.begin(), xs.end(), chrono_less);
  return Corpus(std::move(xs));
}

bool is_chronological(const Corpus& corpus) {
  const auto& xs = corpus.interactions();
  return std::is_sorted(xs.begin(), xs.end(), chrono_less);
}

std::string_view to_string(LengthStratum s) noexcept {
  switch (s) {
    case LengthStratum::Short: return "short";
    case LengthStratum::Medium: return "medium";
    case LengthStratum::Long: return "long";
    case LengthStratum::ExtraLong: return "extra-long";
  }
  return "unknown";
}

LengthStratum stratum_of(std::size_t words) noexcept {
  if (words <= 10) return LengthStratum::Short;
  if (words <= 50) return LengthStratum::Medium;
  if (words <= 100) return LengthStratum::Long;
  return LengthStratum::ExtraLong;
}

std::map<LengthStratum, Corpus> stratify_by_length(const Corpus& corpus) {
  std::map<LengthStratum, std::vector<Interaction>> buckets;
  for (auto s : kAllStrata) buckets[s];
  for (const auto& x : corpus) buckets[stratum_of(word_count(x.review))].push_back(x);
  std::map<LengthStratum, Corpus> out;
  for (auto& [s, xs] : buckets) out.emplace(s, Corpus(std::move(xs)));
  return out;
}

}  // namespace aspectkit
