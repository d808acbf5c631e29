#include "aspectkit/vocab.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "aspectkit/error.hpp"
#include "aspectkit/parse.hpp"
#include "aspectkit/text.hpp"

namespace aspectkit {

using nlohmann::json;

void AspectCandidateSet::add(std::span<const std::string> aspects) {
  for (const auto& a : aspects) ++counts[a];
}

void AspectCandidateSet::merge(const AspectCandidateSet& other) {
  for (const auto& [a, c] : other.counts) counts[a] += c;
}

std::uint64_t AspectCandidateSet::freq(const std::string& aspect) const {
  auto it = counts.find(aspect);
  return it == counts.end() ? 0 : it->second;
}

std::vector<std::string> AspectCandidateSet::distinct() const {
  std::vector<std::string> out;
  out.reserve(counts.size());
  for (const auto& [a, _] : counts) out.push_back(a);
  return out;
}

bool AspectVocabulary::contains(const std::string& aspect) const {
  return std::find(aspects.begin(), aspects.end(), aspect) != aspects.end();
}

AspectVocabulary AspectVocabulary::from_aspects(std::vector<std::string> aspects) {
  AspectVocabulary v;
  std::set<std::string> seen;
  for (auto& a : aspects) {
    if (!seen.insert(a).second) throw Error(ErrorKind::Input, "duplicate aspect '" + a + "'");
    AspectCluster c;
    c.id = v.clusters.size();
    c.members = {a};
    c.member_freq = {0};
    c.representative = a;
    v.clusters.push_back(std::move(c));
  }
  v.aspects = std::move(aspects);
  return v;
}

json AspectVocabulary::to_json() const {
  json cs = json::array();
  for (const auto& c : clusters) {
    cs.push_back({{"id", c.id},
                  {"representative", c.representative},
                  {"members", c.members},
                  {"member_freq", c.member_freq},
                  {"freq", c.freq}});
  }
  return {{"aspects", aspects},
          {"clusters", std::move(cs)},
          {"params",
           {{"p", params.ratio}, {"K", params.partitions}, {"C", params.clusters},
            {"seed", params.seed}}},
          {"corpus_hash", corpus_hash}};
}

AspectVocabulary AspectVocabulary::from_json(const json& j) {
  try {
    AspectVocabulary v;
    v.aspects = j.at("aspects").get<std::vector<std::string>>();
    for (const auto& c : j.at("clusters")) {
      AspectCluster ac;
      ac.id = c.at("id").get<std::size_t>();
      ac.representative = c.at("representative").get<std::string>();
      ac.members = c.at("members").get<std::vector<std::string>>();
      ac.member_freq = c.value("member_freq", std::vector<std::uint64_t>{});
      ac.freq = c.at("freq").get<std::uint64_t>();
      v.clusters.push_back(std::move(ac));
    }
    const auto& p = j.at("params");
    v.params.ratio = p.at("p").get<double>();
    v.params.partitions = p.at("K").get<std::size_t>();
    v.params.clusters = p.at("C").get<std::size_t>();
    v.params.seed = p.at("seed").get<std::uint64_t>();
    v.corpus_hash = j.value("corpus_hash", "");
    std::set<std::string> seen(v.aspects.begin(), v.aspects.end());
    if (seen.size() != v.aspects.size()) throw Error(ErrorKind::Input, "vocabulary has duplicates");
    return v;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Input, std::string("malformed vocabulary: ") + e.what());
  }
}

namespace {

[[noreturn]] void rethrow_with_partition(std::size_t index) {
  const std::string prefix = "partition " + std::to_string(index) + ": ";
  try {
    throw;
  } catch (const ParseError& e) {
    throw ParseError(prefix + e.what(), e.raw());
  } catch (const Error& e) {
    throw Error(e.kind(), prefix + e.what());
  }
}

std::vector<std::string> aspects_for_partition(const Corpus& corpus, const Partition& part,
                                               Gateway& gateway,
                                               const PromptTemplates& templates,
                                               const StageOneOptions& options) {
  std::vector<std::string> reviews;
  reviews.reserve(part.members.size());
  for (auto m : part.members) reviews.push_back(corpus[m].review);
  std::vector<std::string> abstracts;
  for (auto& bundle : render_abstract_prompt(templates, reviews, options.abstract_budget)) {
    abstracts.push_back(gateway.complete(options.settings.request(std::move(bundle))));
  }
  auto reply = gateway.complete(options.settings.request(render_aspect_prompt(templates, abstracts)));
  return parse_aspect_list(reply);
}

}  // namespace

AspectCandidateSet extract_candidate_aspects(const Corpus& corpus,
                                             std::span<const Partition> partitions,
                                             Gateway& gateway, const PromptTemplates& templates,
                                             const StageOneOptions& options) {
  if (partitions.empty()) throw Error(ErrorKind::Input, "no partitions to extract aspects from");

  std::vector<std::vector<std::string>> lists(partitions.size());
  std::vector<std::exception_ptr> errors(partitions.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < partitions.size(); i = next++) {
      try {
        try {
          lists[i] = aspects_for_partition(corpus, partitions[i], gateway, templates, options);
        } catch (const Error&) {
          rethrow_with_partition(partitions[i].index);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(options.workers, 1, partitions.size());
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  AspectCandidateSet out;
  for (const auto& l : lists) out.add(l);
  return out;
}

std::vector<std::vector<std::size_t>> average_linkage(std::span<const Vector> points,
                                                      std::span<const std::string> labels,
                                                      std::size_t target) {
  const std::size_t n = points.size();
  if (labels.size() != n) throw Error(ErrorKind::Input, "one label per point required");
  if (target == 0) throw Error(ErrorKind::Config, "cluster count must be >= 1");

  struct Group {
    std::vector<std::size_t> members;
    std::string min_label;
    bool alive = true;
  };
  std::vector<Group> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[i] = {{i}, labels[i], true};

  // sum[a][b]: total pairwise cosine distance between groups a and b.
  std::vector<std::vector<double>> sum(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 1.0 - cosine(points[i], points[j]);
      sum[i][j] = sum[j][i] = d;
    }
  }

  std::size_t alive = n;
  while (alive > target) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::string, std::string> best_key;
    std::size_t ba = n;
    std::size_t bb = n;
    for (std::size_t a = 0; a < n; ++a) {
      if (!groups[a].alive) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!groups[b].alive) continue;
        double avg = sum[a][b] / static_cast<double>(groups[a].members.size() *
                                                     groups[b].members.size());
        auto key = std::minmax(groups[a].min_label, groups[b].min_label);
        std::pair<std::string, std::string> k{key.first, key.second};
        if (avg < best || (avg == best && k < best_key)) {
          best = avg;
          best_key = std::move(k);
          ba = a;
          bb = b;
        }
      }
    }
    auto& ga = groups[ba];
    auto& gb = groups[bb];
    ga.members.insert(ga.members.end(), gb.members.begin(), gb.members.end());
    ga.min_label = std::min(ga.min_label, gb.min_label);
    gb.alive = false;
    for (std::size_t c = 0; c < n; ++c) {
      sum[ba][c] += sum[bb][c];
      sum[c][ba] = sum[ba][c];
    }
    --alive;
  }

  std::vector<std::vector<std::size_t>> out;
  for (auto& g : groups) {
    if (!g.alive) continue;
    std::sort(g.members.begin(), g.members.end());
    out.push_back(std::move(g.members));
  }
  return out;
}

std::string select_representative(std::span<const std::string> members,
                                  const AspectCandidateSet& candidates,
                                  EmbeddingProvider& provider) {
  if (members.empty()) throw Error(ErrorKind::Input, "cannot select from an empty cluster");
  if (members.size() == 1) return members.front();

  auto embeddings = provider.embed_batch(members);
  for (auto& e : embeddings) {
    double n = l2_norm(e);
    if (n == 0.0) throw Error(ErrorKind::UndefinedMetric, "zero embedding for aspect");
    for (double& c : e) c /= n;
  }
  std::uint64_t total = 0;
  for (const auto& m : members) total += candidates.freq(m);
  std::vector<double> weight(members.size());
  for (std::size_t j = 0; j < members.size(); ++j) {
    weight[j] = total == 0 ? 1.0 / static_cast<double>(members.size())
                           : static_cast<double>(candidates.freq(members[j])) /
                                 static_cast<double>(total);
  }

  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < members.size(); ++i) {
    double score = 0.0;
    for (std::size_t j = 0; j < members.size(); ++j) {
      score += weight[j] * dot(embeddings[i], embeddings[j]);
    }
    bool better = score > best_score;
    if (!better && score == best_score) {
      auto fi = candidates.freq(members[i]);
      auto fb = candidates.freq(members[best]);
      better = fi > fb || (fi == fb && members[i] < members[best]);
    }
    if (better) {
      best = i;
      best_score = score;
    }
  }
  return members[best];
}

std::vector<AspectCluster> cluster_aspects(const AspectCandidateSet& candidates,
                                           EmbeddingProvider& provider, std::size_t target) {
  if (target == 0) throw Error(ErrorKind::Config, "cluster count C must be >= 1");
  auto terms = candidates.distinct();
  if (terms.empty()) throw Error(ErrorKind::Input, "no candidate aspects to cluster");
  auto points = provider.embed_batch(terms);

  std::vector<AspectCluster> out;
  for (const auto& group : average_linkage(points, terms, target)) {
    AspectCluster c;
    for (auto idx : group) c.members.push_back(terms[idx]);
    std::sort(c.members.begin(), c.members.end());
    for (const auto& m : c.members) {
      c.member_freq.push_back(candidates.freq(m));
      c.freq += candidates.freq(m);
    }
    c.representative = select_representative(c.members, candidates, provider);
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const AspectCluster& a, const AspectCluster& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    return a.representative < b.representative;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

AspectVocabulary build_vocabulary(const Corpus& corpus, const VocabularyParams& params,
                                  Gateway& gateway, EmbeddingProvider& provider,
                                  const PromptTemplates& templates,
                                  const StageOneOptions& options) {
  if (!(params.ratio > 0.0 && params.ratio <= 1.0)) {
    throw Error(ErrorKind::Config, "sampling ratio p must lie in (0, 1]");
  }
  Corpus sample = sample_ratio(corpus, params.ratio, params.seed);
  auto partitions = subsample_partitions(sample, params.partitions, params.seed);
  auto candidates = extract_candidate_aspects(sample, partitions, gateway, templates, options);
  auto clusters = cluster_aspects(candidates, provider, params.clusters);

  AspectVocabulary v;
  for (const auto& c : clusters) v.aspects.push_back(c.representative);
  v.clusters = std::move(clusters);
  v.params = params;
  v.corpus_hash = corpus.id();
  return v;
}

double vocab_overlap(const AspectVocabulary& a, const AspectVocabulary& b, std::size_t top_n) {
  if (top_n == 0) throw Error(ErrorKind::Config, "top-N must be >= 1");
  auto top = [top_n](const AspectVocabulary& v) {
    std::set<std::string> s;
    for (std::size_t i = 0; i < std::min(top_n, v.aspects.size()); ++i) s.insert(v.aspects[i]);
    return s;
  };
  auto ta = top(a);
  auto tb = top(b);
  std::size_t shared = 0;
  for (const auto& x : ta) shared += tb.count(x);
  return static_cast<double>(shared) / static_cast<double>(top_n);
}

std::string similarity_csv(std::span<const std::string> terms, EmbeddingProvider& provider) {
  auto vecs = provider.embed_batch(terms);
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "aspect";
  for (const auto& t : terms) os << ',' << csv_field(t);
  os << '\n';
  for (std::size_t i = 0; i < terms.size(); ++i) {
    os << csv_field(terms[i]);
    for (std::size_t j = 0; j < terms.size(); ++j) os << ',' << cosine(vecs[i], vecs[j]);
    os << '\n';
  }
  return os.str();
}

}  // namespace aspectkit
