#include "aspectkit/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "aspectkit/error.hpp"
#include "aspectkit/hash.hpp"
#include "aspectkit/text.hpp"

namespace aspectkit {

using nlohmann::json;

FeatureMap build_aspect_features(std::span<const AnnotatedInteraction> annotated,
                                 const AspectVocabulary& vocab) {
  std::map<std::string, std::size_t> column;
  for (std::size_t j = 0; j < vocab.aspects.size(); ++j) column[vocab.aspects[j]] = j;
  FeatureMap out;
  for (const auto& a : annotated) {
    AspectFeature f(vocab.size(), 0.0);
    for (const auto& t : a.triples) {
      auto it = column.find(t.aspect);
      if (it == column.end()) continue;
      if (t.sentiment == Sentiment::Positive) f[it->second] += 1.0;
      if (t.sentiment == Sentiment::Negative) f[it->second] -= 1.0;
    }
    out[key_of(a.interaction)] = std::move(f);
  }
  return out;
}

std::vector<RatingExample> make_examples(const Corpus& corpus,
                                         std::span<const std::size_t> positions,
                                         const FeatureMap& features, std::size_t aspect_dim) {
  std::vector<RatingExample> out;
  out.reserve(positions.size());
  for (auto pos : positions) {
    const auto& x = corpus[pos];
    RatingExample e{x.user_id, x.item_id, x.rating, AspectFeature(aspect_dim, 0.0),
                    word_count(x.review)};
    if (auto it = features.find(key_of(x)); it != features.end()) {
      if (it->second.size() != aspect_dim) {
        throw Error(ErrorKind::Input, "feature width " + std::to_string(it->second.size()) +
                                          " for " + key_of(x).to_string() + ", expected " +
                                          std::to_string(aspect_dim));
      }
      e.feature = it->second;
    }
    out.push_back(std::move(e));
  }
  return out;
}

TrainTestSplit chronological_split(const Corpus& corpus, double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::Config, "test fraction must lie in [0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_user[corpus[i].user_id].push_back(i);

  TrainTestSplit split;
  for (auto& [user, positions] : by_user) {
    std::stable_sort(positions.begin(), positions.end(), [&](std::size_t a, std::size_t b) {
      return std::pair(corpus[a].timestamp, corpus[a].item_id) <
             std::pair(corpus[b].timestamp, corpus[b].item_id);
    });
    const auto n = positions.size();
    const auto n_test = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n))));
    split.train.insert(split.train.end(), positions.begin(), positions.end() - n_test);
    split.test.insert(split.test.end(), positions.end() - n_test, positions.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

FactorModel FactorModel::constant(double mu) {
  FactorModel m;
  m.mu = mu;
  return m;
}

void FactorModel::rebuild_index() {
  user_pos_.clear();
  item_pos_.clear();
  for (std::size_t i = 0; i < users.size(); ++i) user_pos_[users[i]] = i;
  for (std::size_t i = 0; i < items.size(); ++i) item_pos_[items[i]] = i;
}

std::optional<std::size_t> FactorModel::user_index(const std::string& id) const {
  auto it = user_pos_.find(id);
  if (it == user_pos_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> FactorModel::item_index(const std::string& id) const {
  auto it = item_pos_.find(id);
  if (it == item_pos_.end()) return std::nullopt;
  return it->second;
}

namespace {

double inner(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void check_feature(const FactorModel& m, std::span<const double> feature) {
  if (!feature.empty() && feature.size() != m.aspect_weights.size()) {
    throw Error(ErrorKind::Input, "feature width " + std::to_string(feature.size()) +
                                      " does not match the model's " +
                                      std::to_string(m.aspect_weights.size()) + " aspects");
  }
}

struct Resolved {
  std::optional<std::size_t> u;
  std::optional<std::size_t> i;
};

double score(const FactorModel& m, const Resolved& r, std::span<const double> feature) {
  double s = m.mu;
  if (r.u) s += m.user_bias[*r.u];
  if (r.i) s += m.item_bias[*r.i];
  if (r.u && r.i) s += inner(m.user_factors[*r.u], m.item_factors[*r.i]);
  if (!feature.empty()) s += inner(m.aspect_weights, feature);
  return s;
}

double penalty(const FactorModel& m, const Resolved& r, std::span<const double> feature) {
  double p = 0.0;
  if (r.u) {
    p += m.user_bias[*r.u] * m.user_bias[*r.u];
    p += inner(m.user_factors[*r.u], m.user_factors[*r.u]);
  }
  if (r.i) {
    p += m.item_bias[*r.i] * m.item_bias[*r.i];
    p += inner(m.item_factors[*r.i], m.item_factors[*r.i]);
  }
  for (std::size_t j = 0; j < feature.size(); ++j) {
    if (feature[j] != 0.0) p += m.aspect_weights[j] * m.aspect_weights[j];
  }
  return p;
}

Resolved resolve(const FactorModel& m, const RatingExample& e) {
  check_feature(m, e.feature);
  return {m.user_index(e.user_id), m.item_index(e.item_id)};
}

struct Layout {
  std::size_t users, items, dim, aspects;
  std::size_t user_bias(std::size_t u) const { return 1 + u; }
  std::size_t item_bias(std::size_t i) const { return 1 + users + i; }
  std::size_t user_factor(std::size_t u) const { return 1 + users + items + u * dim; }
  std::size_t item_factor(std::size_t i) const { return 1 + users + items + (users + i) * dim; }
  std::size_t weight(std::size_t j) const { return 1 + users + items + (users + items) * dim + j; }
  std::size_t size() const { return weight(aspects); }
};

Layout layout_of(const FactorModel& m) {
  return {m.users.size(), m.items.size(), m.hyperparams.dim, m.aspect_weights.size()};
}

// Gradient of one example's term, accumulated into `g` at the layout offsets.
void accumulate_gradient(const FactorModel& m, const Resolved& r, const RatingExample& e,
                         const Layout& L, std::vector<double>& g) {
  const double lambda = m.hyperparams.lambda;
  const double err = e.rating - score(m, r, e.feature);
  g[0] += -2.0 * err;
  if (r.u) g[L.user_bias(*r.u)] += -2.0 * err + 2.0 * lambda * m.user_bias[*r.u];
  if (r.i) g[L.item_bias(*r.i)] += -2.0 * err + 2.0 * lambda * m.item_bias[*r.i];
  if (r.u) {
    const auto& p = m.user_factors[*r.u];
    for (std::size_t k = 0; k < L.dim; ++k) {
      const double q = r.i ? m.item_factors[*r.i][k] : 0.0;
      g[L.user_factor(*r.u) + k] += -2.0 * err * q + 2.0 * lambda * p[k];
    }
  }
  if (r.i) {
    const auto& q = m.item_factors[*r.i];
    for (std::size_t k = 0; k < L.dim; ++k) {
      const double p = r.u ? m.user_factors[*r.u][k] : 0.0;
      g[L.item_factor(*r.i) + k] += -2.0 * err * p + 2.0 * lambda * q[k];
    }
  }
  for (std::size_t j = 0; j < e.feature.size(); ++j) {
    if (e.feature[j] == 0.0) continue;
    g[L.weight(j)] += -2.0 * err * e.feature[j] + 2.0 * lambda * m.aspect_weights[j];
  }
}

}  // namespace

double FactorModel::raw_score(const std::string& user_id, const std::string& item_id,
                              std::span<const double> feature) const {
  check_feature(*this, feature);
  return score(*this, {user_index(user_id), item_index(item_id)}, feature);
}

double FactorModel::predict(const std::string& user_id, const std::string& item_id,
                            std::span<const double> feature) const {
  return std::clamp(raw_score(user_id, item_id, feature), kMinRating, kMaxRating);
}

std::vector<double> FactorModel::flatten() const {
  const auto L = layout_of(*this);
  std::vector<double> out(L.size());
  out[0] = mu;
  for (std::size_t u = 0; u < L.users; ++u) {
    out[L.user_bias(u)] = user_bias[u];
    std::copy(user_factors[u].begin(), user_factors[u].end(), out.begin() + L.user_factor(u));
  }
  for (std::size_t i = 0; i < L.items; ++i) {
    out[L.item_bias(i)] = item_bias[i];
    std::copy(item_factors[i].begin(), item_factors[i].end(), out.begin() + L.item_factor(i));
  }
  std::copy(aspect_weights.begin(), aspect_weights.end(), out.begin() + L.weight(0));
  return out;
}

void FactorModel::unflatten(std::span<const double> params) {
  const auto L = layout_of(*this);
  if (params.size() != L.size()) {
    throw Error(ErrorKind::Input, "parameter vector has " + std::to_string(params.size()) +
                                      " entries, model has " + std::to_string(L.size()));
  }
  mu = params[0];
  for (std::size_t u = 0; u < L.users; ++u) {
    user_bias[u] = params[L.user_bias(u)];
    auto first = params.begin() + static_cast<std::ptrdiff_t>(L.user_factor(u));
    std::copy(first, first + static_cast<std::ptrdiff_t>(L.dim), user_factors[u].begin());
  }
  for (std::size_t i = 0; i < L.items; ++i) {
    item_bias[i] = params[L.item_bias(i)];
    auto first = params.begin() + static_cast<std::ptrdiff_t>(L.item_factor(i));
    std::copy(first, first + static_cast<std::ptrdiff_t>(L.dim), item_factors[i].begin());
  }
  auto first = params.begin() + static_cast<std::ptrdiff_t>(L.weight(0));
  std::copy(first, params.end(), aspect_weights.begin());
}

double objective(const FactorModel& model, std::span<const RatingExample> examples) {
  double j = 0.0;
  for (const auto& e : examples) {
    auto r = resolve(model, e);
    const double err = e.rating - score(model, r, e.feature);
    j += err * err + model.hyperparams.lambda * penalty(model, r, e.feature);
  }
  return j;
}

std::vector<double> objective_gradient(const FactorModel& model,
                                       std::span<const RatingExample> examples) {
  const auto L = layout_of(model);
  std::vector<double> g(L.size(), 0.0);
  for (const auto& e : examples) accumulate_gradient(model, resolve(model, e), e, L, g);
  return g;
}

FactorModel train(std::span<const RatingExample> train_set, const Hyperparams& hp,
                  std::vector<std::string> aspect_names) {
  if (train_set.empty()) throw Error(ErrorKind::Input, "empty training set");
  if (hp.dim == 0) throw Error(ErrorKind::Config, "factor dimension must be >= 1");
  if (!(hp.step > 0.0) || !(hp.lambda >= 0.0)) {
    throw Error(ErrorKind::Config, "step must be > 0 and lambda >= 0");
  }
  const std::size_t n_aspects = train_set.front().feature.size();
  if (!aspect_names.empty() && aspect_names.size() != n_aspects) {
    throw Error(ErrorKind::Input, "aspect names do not match the feature width");
  }

  FactorModel m;
  m.hyperparams = hp;
  m.aspect_names = std::move(aspect_names);
  m.aspect_weights.assign(n_aspects, 0.0);
  std::unordered_set<std::string> seen_users;
  std::unordered_set<std::string> seen_items;
  double total = 0.0;
  for (const auto& e : train_set) {
    if (!(e.rating >= kMinRating && e.rating <= kMaxRating)) {
      throw Error(ErrorKind::Input, "training rating outside [1, 5]");
    }
    if (e.feature.size() != n_aspects) {
      throw Error(ErrorKind::Input, "training examples disagree on the feature width");
    }
    total += e.rating;
    if (seen_users.insert(e.user_id).second) m.users.push_back(e.user_id);
    if (seen_items.insert(e.item_id).second) m.items.push_back(e.item_id);
  }
  m.rebuild_index();
  m.mu = total / static_cast<double>(train_set.size());

  std::mt19937_64 init_rng(derive_seed("factor-init|" + std::to_string(hp.seed)));
  std::normal_distribution<double> normal(0.0, 0.1);
  auto draw = [&] {
    std::vector<double> v(hp.dim);
    for (auto& x : v) x = normal(init_rng);
    return v;
  };
  m.user_bias.assign(m.users.size(), 0.0);
  m.item_bias.assign(m.items.size(), 0.0);
  for (std::size_t u = 0; u < m.users.size(); ++u) m.user_factors.push_back(draw());
  for (std::size_t i = 0; i < m.items.size(); ++i) m.item_factors.push_back(draw());

  std::vector<Resolved> resolved;
  resolved.reserve(train_set.size());
  for (const auto& e : train_set) resolved.push_back(resolve(m, e));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 order_rng(derive_seed("factor-order|" + std::to_string(hp.seed)));
  const double lambda = hp.lambda;
  std::vector<double> p_old(hp.dim);

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (auto idx : order) {
      const auto& e = train_set[idx];
      const auto u = *resolved[idx].u;
      const auto i = *resolved[idx].i;
      const double err = e.rating - score(m, resolved[idx], e.feature);
      auto& p = m.user_factors[u];
      auto& q = m.item_factors[i];
      std::copy(p.begin(), p.end(), p_old.begin());
      m.mu += hp.step * 2.0 * err;
      m.user_bias[u] -= hp.step * (-2.0 * err + 2.0 * lambda * m.user_bias[u]);
      m.item_bias[i] -= hp.step * (-2.0 * err + 2.0 * lambda * m.item_bias[i]);
      for (std::size_t k = 0; k < hp.dim; ++k) {
        p[k] -= hp.step * (-2.0 * err * q[k] + 2.0 * lambda * p[k]);
        q[k] -= hp.step * (-2.0 * err * p_old[k] + 2.0 * lambda * q[k]);
      }
      for (std::size_t j = 0; j < n_aspects; ++j) {
        if (e.feature[j] == 0.0) continue;
        m.aspect_weights[j] -=
            hp.step * (-2.0 * err * e.feature[j] + 2.0 * lambda * m.aspect_weights[j]);
      }
    }
    const double loss = objective(m, train_set);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "training loss became non-finite at epoch " << epoch << " (step " << hp.step
          << ", lambda " << hp.lambda << ", dim " << hp.dim;
      if (!m.loss_trace.empty()) msg << ", previous loss " << m.loss_trace.back();
      msg << "); lower the step size";
      throw Error(ErrorKind::Numeric, msg.str());
    }
    m.loss_trace.push_back(loss);
  }
  return m;
}

EvalResult evaluate(const FactorModel& model, std::span<const RatingExample> test_set) {
  if (test_set.empty()) throw Error(ErrorKind::Input, "empty evaluation set");
  double se = 0.0;
  double ae = 0.0;
  for (const auto& e : test_set) {
    const double err = e.rating - model.predict(e.user_id, e.item_id, e.feature);
    se += err * err;
    ae += std::abs(err);
  }
  const auto n = static_cast<double>(test_set.size());
  return {se / n, ae / n, test_set.size(), std::nullopt};
}

std::vector<StratumResult> stratified_eval(const FactorModel& model,
                                           std::span<const RatingExample> test_set,
                                           std::size_t min_count) {
  std::map<LengthStratum, std::vector<RatingExample>> groups;
  for (const auto& e : test_set) groups[stratum_of(e.review_words)].push_back(e);
  std::vector<StratumResult> out;
  for (auto s : kAllStrata) {
    StratumResult row{s, groups[s].size(), std::nullopt};
    if (row.n > 0 && row.n >= min_count) {
      row.result = evaluate(model, groups[s]);
      row.result->stratum = s;
    }
    out.push_back(std::move(row));
  }
  return out;
}

json to_json(const EvalResult& r) {
  json j = {{"mse", r.mse}, {"mae", r.mae}, {"n", r.n}};
  if (r.stratum) j["stratum"] = std::string(to_string(*r.stratum));
  return j;
}

std::string strata_csv(std::span<const StratumResult> strata) {
  std::ostringstream out;
  out.precision(17);
  out << "stratum,n,mse,mae,status\n";
  for (const auto& s : strata) {
    out << to_string(s.stratum) << ',' << s.n << ',';
    if (s.result) {
      out << s.result->mse << ',' << s.result->mae << ",ok\n";
    } else {
      out << ",,omitted\n";
    }
  }
  return out.str();
}

double cer(double mse0, double mse_full, double mse_p) {
  if (!std::isfinite(mse0) || !std::isfinite(mse_full) || !std::isfinite(mse_p)) {
    throw Error(ErrorKind::Input, "CER inputs must be finite");
  }
  if (mse0 == mse_full) {
    throw Error(ErrorKind::UndefinedMetric,
                "undefined CER: the no-aspect and full-vocabulary MSE are equal");
  }
  return (mse0 - mse_p) / (mse0 - mse_full);
}

json FactorModel::to_json() const {
  auto rows = [this](const std::vector<std::string>& ids, const std::vector<double>& bias,
                     const std::vector<std::vector<double>>& factors) {
    json out = json::array();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      out.push_back({{"id", ids[k]}, {"bias", bias[k]}, {"factors", factors[k]}});
    }
    return out;
  };
  return {{"format", "aspectkit-factor-model"},
          {"version", 1},
          {"hyperparams",
           {{"dim", hyperparams.dim},
            {"lambda", hyperparams.lambda},
            {"step", hyperparams.step},
            {"epochs", hyperparams.epochs},
            {"seed", hyperparams.seed}}},
          {"mu", mu},
          {"users", rows(users, user_bias, user_factors)},
          {"items", rows(items, item_bias, item_factors)},
          {"aspect_names", aspect_names},
          {"aspect_weights", aspect_weights},
          {"loss_trace", loss_trace}};
}

FactorModel FactorModel::from_json(const json& j) {
  try {
    if (j.at("format") != "aspectkit-factor-model" || j.at("version") != 1) {
      throw Error(ErrorKind::Input, "not a version 1 factor model");
    }
    FactorModel m;
    const auto& h = j.at("hyperparams");
    m.hyperparams = {h.at("dim").get<std::size_t>(), h.at("lambda").get<double>(),
                     h.at("step").get<double>(), h.at("epochs").get<std::size_t>(),
                     h.at("seed").get<std::uint64_t>()};
    m.mu = j.at("mu").get<double>();
    auto read_rows = [&m](const json& rows, std::vector<std::string>& ids,
                          std::vector<double>& bias, std::vector<std::vector<double>>& factors) {
      for (const auto& r : rows) {
        ids.push_back(r.at("id").get<std::string>());
        bias.push_back(r.at("bias").get<double>());
        factors.push_back(r.at("factors").get<std::vector<double>>());
        if (factors.back().size() != m.hyperparams.dim) {
          throw Error(ErrorKind::Input, "factor width does not match dim");
        }
      }
    };
    read_rows(j.at("users"), m.users, m.user_bias, m.user_factors);
    read_rows(j.at("items"), m.items, m.item_bias, m.item_factors);
    m.aspect_names = j.at("aspect_names").get<std::vector<std::string>>();
    m.aspect_weights = j.at("aspect_weights").get<std::vector<double>>();
    m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    if (!m.aspect_names.empty() && m.aspect_names.size() != m.aspect_weights.size()) {
      throw Error(ErrorKind::Input, "aspect names do not match aspect weights");
    }
    for (double v : m.flatten()) {
      if (!std::isfinite(v)) throw Error(ErrorKind::Input, "non-finite model parameter");
    }
    m.rebuild_index();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Input, std::string("malformed factor model: ") + e.what());
  }
}

void FactorModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Input, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

FactorModel FactorModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Input, "cannot read " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Input, path.string() + ": " + e.what());
  }
}

}  // namespace aspectkit
