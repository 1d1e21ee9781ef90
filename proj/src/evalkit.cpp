#include "attnrec/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "attnrec/errors.hpp"
#include "attnrec/parallel.hpp"

namespace attnrec {

using nlohmann::json;

std::vector<EvalUser> make_eval_users(const TrainTestSplit& split, std::int64_t boundary) {
  std::vector<EvalUser> users;
  users.reserve(split.test.size());
  for (const auto& pair : split.test) {
    const UserHistory& h = split.train.at(pair.user);
    EvalUser u;
    u.user_id = h.user_id;
    u.history = h.events;
    u.observed = distinct_items(h.events);
    u.test_items = pair.items;
    u.now = boundary;
    u.touched.insert(u.observed.begin(), u.observed.end());
    u.touched.insert(u.test_items.begin(), u.test_items.end());
    users.push_back(std::move(u));
  }
  return users;
}

std::vector<int> CandidatePool::candidates() const {
  std::vector<int> out(positives);
  out.insert(out.end(), negatives.begin(), negatives.end());
  return out;
}

CandidatePool CandidatePool::truncated(std::size_t n_negatives) const {
  if (n_negatives > negatives.size()) throw ConfigError("pool holds fewer negatives than requested");
  CandidatePool p = *this;
  p.negatives.resize(n_negatives);
  return p;
}

PoolSet build_pools(std::span<const EvalUser> users, const AliasTable& table, std::size_t n_negatives,
                    std::uint64_t seed) {
  if (n_negatives < 1) throw ConfigError("n_negatives must be >= 1");
  PoolSet out;
  for (std::size_t u = 0; u < users.size(); ++u) {
    CandidatePool pool;
    pool.user = u;
    pool.positives = users[u].test_items;
    pool.gamma = table.source().gamma;
    pool.seed = seed;
    Rng rng = Rng::stream(seed, u);
    try {
      pool.negatives = sample_negatives(table, n_negatives, users[u].touched, rng);
    } catch (const ConfigError&) {
      ++out.skipped;
      continue;
    }
    out.pools.push_back(std::move(pool));
  }
  return out;
}

double ndcg(std::span<const int> ranked, const std::unordered_set<int>& relevant) {
  if (relevant.empty()) return 0.0;
  double dcg = 0.0;
  for (std::size_t p = 0; p < ranked.size(); ++p) {
    if (relevant.contains(ranked[p])) dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t p = 0; p < relevant.size(); ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg / idcg;
}

double recall_at_k(std::span<const int> ranked, const std::unordered_set<int>& relevant, std::size_t k) {
  if (relevant.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p) hits += relevant.contains(ranked[p]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

std::vector<int> rank_by_scores(std::span<const int> candidates, std::span<const double> scores) {
  if (candidates.size() != scores.size()) throw ConfigError("rank: candidates and scores differ in length");
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : candidates[a] < candidates[b];
  });
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(candidates[i]);
  return out;
}

std::vector<int> rank_candidates(const Scorer& scorer, const EvalUser& user, const CandidatePool& pool) {
  const auto cands = pool.candidates();
  const auto scores = scorer(user, cands);
  return rank_by_scores(cands, scores);
}

const ModelMetrics& MetricsCell::model(const std::string& name) const {
  for (const auto& m : models) {
    if (m.model == name) return m;
  }
  throw ConfigError("no metrics for model " + name);
}

const MetricsCell& MetricsReport::cell(double gamma, std::size_t n_negatives) const {
  for (const auto& c : cells) {
    if (c.gamma == gamma && c.n_negatives == n_negatives) return c;
  }
  throw ConfigError("no metrics cell for the requested pool setting");
}

namespace {

void finalize_means(ModelMetrics& m) {
  const auto n = static_cast<double>(m.ndcg.size());
  m.mean_ndcg = n > 0 ? std::accumulate(m.ndcg.begin(), m.ndcg.end(), 0.0) / n : 0.0;
  m.mean_recall.clear();
  for (const auto& r : m.recall) m.mean_recall.push_back(n > 0 ? std::accumulate(r.begin(), r.end(), 0.0) / n : 0.0);
}

// Metrics of one user for every pool size, from scores over the largest pool
// (positives first, then negatives in draw order).
void score_user_nested(const std::vector<double>& scores, const CandidatePool& pool,
                       std::span<const std::size_t> n_grid, std::span<const std::size_t> k_grid,
                       std::vector<double>& ndcg_out, std::vector<std::vector<double>>& recall_out) {
  const std::unordered_set<int> relevant(pool.positives.begin(), pool.positives.end());
  const auto all = pool.candidates();
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    const std::size_t n_cand = pool.positives.size() + n_grid[g];
    const auto ranked = rank_by_scores(std::span(all).first(n_cand), std::span(scores).first(n_cand));
    ndcg_out[g] = ndcg(ranked, relevant);
    for (std::size_t k = 0; k < k_grid.size(); ++k) recall_out[g][k] = recall_at_k(ranked, relevant, k_grid[k]);
  }
}

}  // namespace

std::vector<MetricsCell> evaluate_nested(std::span<const NamedScorer> models, std::span<const EvalUser> users,
                                         const PoolSet& pools, std::span<const std::size_t> n_grid,
                                         std::span<const std::size_t> k_grid, int threads) {
  const std::size_t n_users = pools.pools.size();
  std::vector<MetricsCell> cells(n_grid.size());
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    cells[g].n_negatives = n_grid[g];
    cells[g].skipped_users = pools.skipped;
    cells[g].gamma = n_users ? pools.pools.front().gamma : 0.0;
    for (const auto& p : pools.pools) {
      if (p.negatives.size() < n_grid[g]) throw ConfigError("pool smaller than requested negatives");
      cells[g].users.push_back(users[p.user].user_id);
    }
  }
  for (const auto& model : models) {
    // [user][grid] and [user][grid][k]
    std::vector<std::vector<double>> nd(n_users, std::vector<double>(n_grid.size()));
    std::vector<std::vector<std::vector<double>>> rc(
        n_users, std::vector<std::vector<double>>(n_grid.size(), std::vector<double>(k_grid.size())));
    parallel_for(n_users, threads, [&](std::size_t i) {
      const CandidatePool& pool = pools.pools[i];
      const auto cands = pool.candidates();
      const auto scores = model.score(users[pool.user], cands);
      if (scores.size() != cands.size()) throw ConfigError("scorer " + model.name + " returned wrong length");
      score_user_nested(scores, pool, n_grid, k_grid, nd[i], rc[i]);
    });
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
      ModelMetrics m;
      m.model = model.name;
      m.ndcg.resize(n_users);
      m.recall.assign(k_grid.size(), std::vector<double>(n_users));
      for (std::size_t i = 0; i < n_users; ++i) {
        m.ndcg[i] = nd[i][g];
        for (std::size_t k = 0; k < k_grid.size(); ++k) m.recall[k][i] = rc[i][g][k];
      }
      finalize_means(m);
      cells[g].models.push_back(std::move(m));
    }
  }
  return cells;
}

MetricsCell evaluate(std::span<const NamedScorer> models, std::span<const EvalUser> users,
                     std::span<const CandidatePool> pools, std::span<const std::size_t> k_grid, int threads) {
  MetricsCell cell;
  if (!pools.empty()) {
    cell.gamma = pools.front().gamma;
    cell.n_negatives = pools.front().negatives.size();
  }
  for (const auto& p : pools) cell.users.push_back(users[p.user].user_id);
  for (const auto& model : models) {
    ModelMetrics m;
    m.model = model.name;
    m.ndcg.resize(pools.size());
    m.recall.assign(k_grid.size(), std::vector<double>(pools.size()));
    parallel_for(pools.size(), threads, [&](std::size_t i) {
      const auto ranked = rank_candidates(model.score, users[pools[i].user], pools[i]);
      const std::unordered_set<int> relevant(pools[i].positives.begin(), pools[i].positives.end());
      m.ndcg[i] = ndcg(ranked, relevant);
      for (std::size_t k = 0; k < k_grid.size(); ++k) m.recall[k][i] = recall_at_k(ranked, relevant, k_grid[k]);
    });
    finalize_means(m);
    cell.models.push_back(std::move(m));
  }
  return cell;
}

double paired_significance(std::span<const double> a, std::span<const double> b, std::size_t n_resamples,
                           std::uint64_t seed) {
  if (a.size() != b.size()) throw ConfigError("paired_significance: vectors differ in length");
  if (a.empty() || n_resamples == 0) throw ConfigError("paired_significance: empty input");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double observed = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  Rng rng(seed);
  std::size_t extreme = 0;
  for (std::size_t r = 0; r < n_resamples; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += d[rng.index(n)];
    const double mean = sum / static_cast<double>(n);
    if (std::abs(mean - observed) >= std::abs(observed)) ++extreme;
  }
  return static_cast<double>(1 + extreme) / static_cast<double>(1 + n_resamples);
}

std::string report_to_json(const MetricsReport& report) {
  json j;
  j["k_grid"] = report.k_grid;
  j["seed"] = report.seed;
  j["n_resamples"] = report.n_resamples;
  json cells = json::array();
  for (const auto& c : report.cells) {
    json jc;
    jc["gamma"] = c.gamma;
    jc["n_negatives"] = c.n_negatives;
    jc["users"] = c.users;
    jc["skipped_users"] = c.skipped_users;
    json models = json::array();
    for (const auto& m : c.models) {
      models.push_back(json{{"model", m.model},
                            {"mean_ndcg", m.mean_ndcg},
                            {"mean_recall", m.mean_recall},
                            {"ndcg", m.ndcg},
                            {"recall", m.recall}});
    }
    jc["models"] = std::move(models);
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  json sig = json::array();
  for (const auto& s : report.significance) {
    sig.push_back(json{{"gamma", s.gamma},
                       {"n_negatives", s.n_negatives},
                       {"metric", s.metric},
                       {"model_a", s.model_a},
                       {"model_b", s.model_b},
                       {"mean_difference", s.mean_difference},
                       {"p_value", s.p_value}});
  }
  j["significance"] = std::move(sig);
  return j.dump(1) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  MetricsReport r;
  try {
    const json j = json::parse(text);
    r.k_grid = j.at("k_grid").get<std::vector<std::size_t>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_resamples = j.at("n_resamples").get<std::size_t>();
    for (const auto& jc : j.at("cells")) {
      MetricsCell c;
      c.gamma = jc.at("gamma").get<double>();
      c.n_negatives = jc.at("n_negatives").get<std::size_t>();
      c.users = jc.at("users").get<std::vector<std::string>>();
      c.skipped_users = jc.at("skipped_users").get<std::size_t>();
      for (const auto& jm : jc.at("models")) {
        ModelMetrics m;
        m.model = jm.at("model").get<std::string>();
        m.mean_ndcg = jm.at("mean_ndcg").get<double>();
        m.mean_recall = jm.at("mean_recall").get<std::vector<double>>();
        m.ndcg = jm.at("ndcg").get<std::vector<double>>();
        m.recall = jm.at("recall").get<std::vector<std::vector<double>>>();
        c.models.push_back(std::move(m));
      }
      r.cells.push_back(std::move(c));
    }
    for (const auto& js : j.at("significance")) {
      SignificanceResult s;
      s.gamma = js.at("gamma").get<double>();
      s.n_negatives = js.at("n_negatives").get<std::size_t>();
      s.metric = js.at("metric").get<std::string>();
      s.model_a = js.at("model_a").get<std::string>();
      s.model_b = js.at("model_b").get<std::string>();
      s.mean_difference = js.at("mean_difference").get<double>();
      s.p_value = js.at("p_value").get<double>();
      r.significance.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("report json: ") + e.what());
  }
  return r;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << body;
  if (!out) throw DataError("write failed: " + path);
}

constexpr const char* kCsvHeader = "model,gamma,n_negatives,metric,K,value\n";

std::string csv_row(const std::string& model, const MetricsCell& c, const char* metric, const std::string& k,
                    double value) {
  return model + "," + fmt_double(c.gamma) + "," + std::to_string(c.n_negatives) + "," + metric + "," + k + "," +
         fmt_double(value) + "\n";
}

bool is_depth_variant(const std::string& name) { return name.rfind("attention_k", 0) == 0; }

}  // namespace

std::vector<std::string> emit_report(const MetricsReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  const std::string json_path = (std::filesystem::path(dir) / "report.json").string();
  write_text(json_path, report_to_json(report));
  written.push_back(json_path);

  std::string fig2 = kCsvHeader;
  std::string fig3 = kCsvHeader;
  std::string fig4 = kCsvHeader;
  bool any_depth = false;
  for (const auto& c : report.cells) {
    for (const auto& m : c.models) {
      fig2 += csv_row(m.model, c, "ndcg", "", m.mean_ndcg);
      if (c.gamma == 1.0) {
        for (std::size_t k = 0; k < report.k_grid.size(); ++k) {
          fig3 += csv_row(m.model, c, "recall", std::to_string(report.k_grid[k]), m.mean_recall[k]);
        }
      }
      if (is_depth_variant(m.model) && c.gamma == 1.0) {
        any_depth = true;
        fig4 += csv_row(m.model, c, "ndcg", "", m.mean_ndcg);
        for (std::size_t k = 0; k < report.k_grid.size(); ++k) {
          fig4 += csv_row(m.model, c, "recall", std::to_string(report.k_grid[k]), m.mean_recall[k]);
        }
      }
    }
  }
  auto put = [&](const char* name, const std::string& body) {
    const std::string path = (std::filesystem::path(dir) / name).string();
    write_text(path, body);
    written.push_back(path);
  };
  put("fig2_ndcg.csv", fig2);
  put("fig3_recall.csv", fig3);
  if (any_depth) put("fig4_depth.csv", fig4);
  return written;
}

}  // namespace attnrec
