#include "attnrec/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "attnrec/attention.hpp"
#include "attnrec/cma_es.hpp"
#include "attnrec/dan.hpp"
#include "attnrec/errors.hpp"
#include "attnrec/trainer.hpp"

namespace attnrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDecayScale = 1.0 / 86400.0;  // weighted-sum decay is searched in units of 1/day
constexpr double kMaxLogParam = 30.0;

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << body;
  if (!out) throw DataError("write failed: " + path);
}

void require_file(const std::string& path, std::string_view producer) {
  if (!fs::exists(path)) throw DataError(path + " is missing; run '" + std::string(producer) + "' first");
}

// Distinct items, most recent first, at most `cap` of them (0: all).
std::vector<int> recent_items(std::span<const Event> events, std::size_t cap) {
  std::vector<int> out;
  std::unordered_set<int> seen;
  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    if (cap > 0 && out.size() >= cap) break;
    if (seen.insert(it->item).second) out.push_back(it->item);
  }
  return out;
}

bool wants(const RunConfig& c, std::string_view model) {
  return std::find(c.eval.models.begin(), c.eval.models.end(), model) != c.eval.models.end();
}

std::string ablation_name(int depth) { return "attention_k" + std::to_string(depth); }

json train_log_json(const std::vector<TrainLogEntry>& log) {
  json arr = json::array();
  for (const auto& e : log) {
    arr.push_back(json{{"update", e.update},
                       {"holdout_loss", e.holdout_loss},
                       {"train_loss", e.train_loss},
                       {"lr", e.lr},
                       {"improved", e.improved},
                       {"reduced", e.reduced}});
  }
  return arr;
}

template <typename Result>
void write_train_log(const std::string& path, const Result& r) {
  std::string body;
  for (const auto& e : train_log_json(r.log)) body += e.dump() + "\n";
  write_file(path, body);
}

WeightedSumParams ws_from_vector(const VectorXr& x) {
  auto ex = [](double v) { return std::exp(std::clamp(v, -kMaxLogParam, kMaxLogParam)); };
  WeightedSumParams p;
  p.decay = ex(x(0)) * kDecayScale;
  for (int a = 0; a < kNumActions; ++a) p.type_weight[static_cast<std::size_t>(a)] = ex(x(a + 1));
  return p;
}

std::string pool_digest(const PoolSet& pools) {
  std::string bytes;
  for (const auto& p : pools.pools) {
    bytes += std::to_string(p.user) + ":";
    for (int i : p.positives) bytes += std::to_string(i) + ",";
    bytes += "|";
    for (int i : p.negatives) bytes += std::to_string(i) + ",";
    bytes += "\n";
  }
  return sha256_hex(bytes);
}

}  // namespace

EventLog::EventLog(const std::string& path, bool echo) : echo_(echo) {
  if (!path.empty()) {
    fs::create_directories(fs::path(path).parent_path().empty() ? fs::path(".") : fs::path(path).parent_path());
    file_ = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*file_) throw DataError("cannot open log " + path);
  }
}

void EventLog::emit(std::string_view stage, std::string_view event, json fields) {
  json line = json::object();
  line["ts"] = iso_now();
  line["stage"] = stage;
  line["event"] = event;
  for (auto& [k, v] : fields.items()) line[k] = v;
  const std::string text = line.dump();
  if (file_) {
    *file_ << text << '\n';
    file_->flush();
  }
  if (echo_) std::cerr << text << '\n';
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

std::int64_t auto_boundary(const Corpus& corpus, double test_fraction) {
  std::vector<std::int64_t> ts;
  for (const auto& h : corpus.histories) {
    for (const auto& e : h.events) ts.push_back(e.timestamp);
  }
  if (ts.empty()) throw DataError("corpus has no events");
  std::sort(ts.begin(), ts.end());
  const auto idx = static_cast<std::size_t>(std::floor((1.0 - test_fraction) * static_cast<double>(ts.size())));
  return ts[std::min(idx, ts.size() - 1)];
}

std::vector<std::string> model_names(const RunConfig& c) {
  std::vector<std::string> names = c.eval.models;
  for (int k : c.model.depth_ablation) names.push_back(ablation_name(k));
  return names;
}

Pipeline::Pipeline(RunConfig config, EventLog* log) : config_(std::move(config)), log_(log) {
  config_.validate();
  config_.train.threads = config_.run.threads;
}

std::string Pipeline::path(std::string_view name) const { return (fs::path(config_.run.out_dir) / name).string(); }

void Pipeline::log(std::string_view stage, std::string_view event, json fields) {
  if (log_) log_->emit(stage, event, std::move(fields));
}

void Pipeline::begin(std::string_view name) {
  fs::create_directories(config_.run.out_dir);
  write_file(path(".partial"), std::string(name) + "\n");
  log(name, "start", json{{"config_hash", sha256_hex(config_.canonical())}});
}

void Pipeline::finish(std::string_view name) {
  write_manifest(config_, std::string(name));
  fs::remove(path(".partial"));
  log(name, "done");
}

void Pipeline::synth() {
  const SynthData d = synth_generate(config_.synth);
  fs::create_directories(config_.run.out_dir);
  write_log(d.corpus, path("raw.tsv"));
  log("synth", "written", json{{"events", d.events.size()}, {"users", d.corpus.histories.size()},
                              {"items", d.corpus.vocab.size()}});
}

void Pipeline::ingest() {
  const std::string input = config_.data.source == "log" ? config_.data.log_path : path("raw.tsv");
  if (!fs::exists(input)) throw DataError("input log " + input + " does not exist");
  const Corpus c = attnrec::ingest(input, config_.data.min_user_events, config_.data.min_item_count);
  fs::create_directories(config_.run.out_dir);
  write_log(c, path("events.tsv"));
  write_vocabulary(c.vocab, path("vocab.tsv"));
  data_.reset();
  log("ingest", "written", json{{"users", c.histories.size()}, {"items", c.vocab.size()}});
}

const Dataset& Pipeline::data() {
  if (data_) return *data_;
  require_file(path("events.tsv"), "ingest");
  Dataset d;
  d.corpus = attnrec::ingest(path("events.tsv"), 1, 1);
  d.boundary = config_.data.boundary > 0 ? config_.data.boundary : auto_boundary(d.corpus, config_.data.test_fraction);
  d.split = train_test_split(d.corpus.histories, d.boundary);
  if (d.split.test.empty()) throw DataError("no user has test items at or after boundary " + std::to_string(d.boundary));
  const auto n_items = static_cast<std::size_t>(d.corpus.vocab.size());
  d.user_counts = item_user_counts(d.split.train, n_items);
  d.event_counts.assign(n_items, 0);
  for (const auto& h : d.split.train) {
    for (const auto& e : h.events) ++d.event_counts[static_cast<std::size_t>(e.item)];
  }
  log("data", "split", json{{"boundary", d.boundary}, {"train_users", d.split.train.size()},
                            {"test_users", d.split.test.size()}});
  data_ = std::move(d);
  return *data_;
}

void Pipeline::embed() {
  const Dataset& d = data();
  std::vector<std::int64_t> counts(d.event_counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = std::max<std::int64_t>(1, d.event_counts[i]);
  const Vocabulary vocab(d.corpus.vocab.ids(), counts);
  const EmbeddingTable table = train_embeddings(vocab, d.split.train, config_.embed);
  save_embeddings(table, path("embeddings.txt"));
  log("embed", "written", json{{"items", table.size()}, {"dim", table.dim()}});
}

EmbeddingTable Pipeline::load_table() {
  require_file(path("embeddings.txt"), "embed");
  return align_embeddings(load_embeddings(path("embeddings.txt")), data().corpus.vocab);
}

std::vector<SplitInstance> Pipeline::training_instances() {
  std::vector<SplitInstance> out;
  for (const auto& h : data().split.train) {
    if (auto s = temporal_split(h, config_.train.n_future, config_.model.max_history)) out.push_back(std::move(*s));
  }
  if (out.size() < 2) throw DataError("fewer than two users have enough training items for a split");
  return out;
}

void Pipeline::train_attention_depth(int depth, const std::string& name, const std::vector<SplitInstance>& train,
                                     const std::vector<SplitInstance>& holdout, const EmbeddingTable& table) {
  const AliasTable noise(build_distribution(data().user_counts, config_.train.gamma));
  AttentionModel model{AttentionShape{static_cast<int>(table.dim()), config_.model.attention.hidden, depth}};
  const auto r = train_model(model, train, holdout, table, noise, config_.train);
  save_attention(r.params, path(name + ".ckpt"));
  write_train_log(path("train_" + name + ".jsonl"), r);
  for (const auto& e : r.log) {
    if (e.reduced) log("train", "lr_reduced", json{{"model", name}, {"update", e.update}, {"lr", e.lr}});
  }
  log("train", "finished", json{{"model", name}, {"updates", r.updates}, {"reductions", r.reductions},
                                {"initial_holdout", r.initial_holdout}, {"best_holdout", r.best_holdout}});
}

void Pipeline::train(ModelKind kind) {
  const EmbeddingTable table = load_table();
  auto [train, holdout] = split_holdout(training_instances(), config_.holdout.fraction, config_.holdout.cap,
                                        config_.train.seed);
  log("train", "instances", json{{"train", train.size()}, {"holdout", holdout.size()}});
  if (kind == ModelKind::attention) {
    train_attention_depth(config_.model.attention.depth, "attention", train, holdout, table);
    for (int k : config_.model.depth_ablation) {
      if (k != config_.model.attention.depth) train_attention_depth(k, ablation_name(k), train, holdout, table);
    }
    return;
  }
  const AliasTable noise(build_distribution(data().user_counts, config_.train.gamma));
  DanModel model{DanShape{static_cast<int>(table.dim()), config_.model.dan.hidden, config_.model.dan.layers}};
  const auto r = train_model(model, train, holdout, table, noise, config_.train);
  save_dan(r.params, path("dan.ckpt"));
  write_train_log(path("train_dan.jsonl"), r);
  for (const auto& e : r.log) {
    if (e.reduced) log("train", "lr_reduced", json{{"model", "dan"}, {"update", e.update}, {"lr", e.lr}});
  }
  log("train", "finished", json{{"model", "dan"}, {"updates", r.updates}, {"reductions", r.reductions},
                                {"initial_holdout", r.initial_holdout}, {"best_holdout", r.best_holdout}});
}

void Pipeline::tune_weighted_sum() {
  const EmbeddingTable table = load_table();
  const Dataset& d = data();
  auto held = split_holdout(training_instances(), config_.holdout.fraction, config_.holdout.cap, config_.train.seed)
                  .second;
  std::map<std::string, const UserHistory*> by_id;
  for (const auto& h : d.split.train) by_id[h.user_id] = &h;
  std::vector<EvalUser> users;
  for (const auto& inst : held) {
    const auto es = split_events(*by_id.at(inst.user_id), config_.train.n_future);
    if (!es) continue;
    EvalUser u;
    u.user_id = inst.user_id;
    u.history = es->observed;
    u.observed = distinct_items(es->observed);
    u.test_items = es->future;
    u.now = es->observed.back().timestamp;
    u.touched.insert(u.observed.begin(), u.observed.end());
    u.touched.insert(u.test_items.begin(), u.test_items.end());
    users.push_back(std::move(u));
  }
  const AliasTable dist(build_distribution(d.user_counts, config_.weighted_sum.gamma));
  const PoolSet pools = build_pools(users, dist, static_cast<std::size_t>(config_.weighted_sum.n_negatives),
                                    config_.weighted_sum.seed);
  if (pools.pools.empty()) throw DataError("weighted-sum tuning: no holdout user has a feasible pool");
  const std::size_t k_grid[] = {10};
  auto objective = [&](const VectorXr& x) {
    const WeightedSumParams p = ws_from_vector(x);
    const NamedScorer scorer{"weighted_sum", [&](const EvalUser& u, std::span<const int> cands) {
                               const VectorXr uv = weighted_user_vector(table, u.history, p, u.now);
                               std::vector<double> s;
                               s.reserve(cands.size());
                               for (int c : cands) s.push_back(cosine(uv, table.target.row(c).transpose()));
                               return s;
                             }};
    const MetricsCell cell = attnrec::evaluate(std::span(&scorer, 1), users, pools.pools, k_grid, 1);
    return 1.0 - cell.models.front().mean_ndcg;
  };
  CmaEsConfig cma;
  cma.population = config_.weighted_sum.population;
  cma.iterations = config_.weighted_sum.iterations;
  cma.sigma0 = config_.weighted_sum.sigma0;
  cma.seed = config_.weighted_sum.seed;
  cma.threads = config_.run.threads;
  VectorXr x0 = VectorXr::Zero(1 + kNumActions);
  const CmaEsResult r = cma_es_optimize(objective, x0, cma);
  const WeightedSumParams best = ws_from_vector(r.best);
  save_weighted_sum(best, path("weighted_sum.txt"));
  log("tune-ws", "finished", json{{"users", pools.pools.size()}, {"start_ndcg", 1.0 - r.start_value},
                                  {"best_ndcg", 1.0 - r.best_value}, {"evaluations", r.evaluations}});
}

MetricsReport Pipeline::evaluate() {
  const EmbeddingTable table = load_table();
  const Dataset& d = data();
  const std::vector<EvalUser> users = make_eval_users(d.split, d.boundary);
  const std::size_t cap = config_.model.max_history;

  auto popularity = [&d](std::span<const int> cands) {
    std::vector<double> s;
    s.reserve(cands.size());
    for (int c : cands) s.push_back(static_cast<double>(d.event_counts[static_cast<std::size_t>(c)]));
    return s;
  };
  std::vector<NamedScorer> models;
  for (const auto& name : config_.eval.models) {
    if (name == "popularity") {
      models.push_back({name, [popularity](const EvalUser&, std::span<const int> c) { return popularity(c); }});
    } else if (name == "last_item") {
      models.push_back({name, [&table, popularity](const EvalUser& u, std::span<const int> cands) {
                          if (u.history.empty()) return popularity(cands);
                          std::vector<double> s;
                          for (int c : cands) s.push_back(last_item_score(table, u.history, c));
                          return s;
                        }});
    } else if (name == "weighted_sum") {
      require_file(path("weighted_sum.txt"), "tune-ws");
      const WeightedSumParams p = load_weighted_sum(path("weighted_sum.txt"));
      models.push_back({name, [&table, p, popularity](const EvalUser& u, std::span<const int> cands) {
                          if (u.history.empty()) return popularity(cands);
                          const VectorXr uv = weighted_user_vector(table, u.history, p, u.now);
                          std::vector<double> s;
                          for (int c : cands) s.push_back(cosine(uv, table.target.row(c).transpose()));
                          return s;
                        }});
    } else if (name == "dan") {
      require_file(path("dan.ckpt"), "train --model dan");
      auto params = std::make_shared<DanParams<double>>(load_dan(path("dan.ckpt"), table.dim()));
      models.push_back({name, [&table, params, cap, popularity](const EvalUser& u, std::span<const int> cands) {
                          const auto hist = recent_items(u.history, cap);
                          if (hist.empty()) return popularity(cands);
                          const VectorXr uv = dan_user_vector(*params, hist, table).user;
                          const VectorXr logits = gather_rows<double>(table, cands) * uv;
                          return std::vector<double>(logits.data(), logits.data() + logits.size());
                        }});
    }
  }
  auto attention_scorer = [&](const std::string& file) {
    auto params = std::make_shared<AttentionParams<double>>(load_attention(file, table.dim()));
    return [&table, params, cap, popularity](const EvalUser& u, std::span<const int> cands) {
      const auto hist = recent_items(u.history, cap);
      if (hist.empty()) return popularity(cands);
      const auto cache = prepare_history(*params, hist, table);
      const VectorXr logits = forward_cached(*params, cache, gather_rows<double>(table, cands)).logits;
      return std::vector<double>(logits.data(), logits.data() + logits.size());
    };
  };
  if (wants(config_, "attention") || !config_.model.depth_ablation.empty()) require_file(path("attention.ckpt"), "train");
  if (wants(config_, "attention")) models.push_back({"attention", attention_scorer(path("attention.ckpt"))});
  for (int k : config_.model.depth_ablation) {
    const std::string file = k == config_.model.attention.depth ? path("attention.ckpt") : path(ablation_name(k) + ".ckpt");
    require_file(file, "train");
    models.push_back({ablation_name(k), attention_scorer(file)});
  }

  MetricsReport report;
  report.k_grid = config_.eval.k_grid;
  report.seed = config_.eval.seed;
  report.n_resamples = config_.eval.bootstrap;
  const std::size_t max_neg = *std::max_element(config_.eval.n_negatives.begin(), config_.eval.n_negatives.end());
  std::vector<std::size_t> n_grid = config_.eval.n_negatives;
  std::sort(n_grid.begin(), n_grid.end());
  for (std::size_t gi = 0; gi < config_.eval.gammas.size(); ++gi) {
    const double gamma = config_.eval.gammas[gi];
    const AliasTable dist(build_distribution(d.user_counts, gamma));
    const PoolSet pools = build_pools(users, dist, max_neg, mix_seed(config_.eval.seed + gi));
    log("evaluate", "pools", json{{"gamma", gamma}, {"users", pools.pools.size()}, {"skipped", pools.skipped},
                                  {"sha256", pool_digest(pools)}});
    if (pools.pools.empty()) throw DataError("no user admits a pool of " + std::to_string(max_neg) + " negatives");
    auto cells = evaluate_nested(models, users, pools, n_grid, config_.eval.k_grid, config_.run.threads);
    for (auto& c : cells) report.cells.push_back(std::move(c));
  }

  std::vector<std::pair<std::string, std::string>> pairs{{"attention", "dan"},
                                                         {"dan", "popularity"},
                                                         {"attention", "popularity"},
                                                         {"attention", "last_item"},
                                                         {"attention", "weighted_sum"}};
  for (std::size_t i = 1; i < config_.model.depth_ablation.size(); ++i) {
    pairs.emplace_back(ablation_name(config_.model.depth_ablation[i]), ablation_name(config_.model.depth_ablation[i - 1]));
  }
  for (const auto& c : report.cells) {
    auto has = [&c](const std::string& n) {
      return std::any_of(c.models.begin(), c.models.end(), [&n](const ModelMetrics& m) { return m.model == n; });
    };
    for (const auto& [a, b] : pairs) {
      if (!has(a) || !has(b)) continue;
      SignificanceResult s;
      s.gamma = c.gamma;
      s.n_negatives = c.n_negatives;
      s.metric = "ndcg";
      s.model_a = a;
      s.model_b = b;
      s.mean_difference = c.model(a).mean_ndcg - c.model(b).mean_ndcg;
      s.p_value = paired_significance(c.model(a).ndcg, c.model(b).ndcg, config_.eval.bootstrap, config_.eval.seed);
      report.significance.push_back(std::move(s));
    }
  }
  emit_report(report, path("report"));
  for (const auto& c : report.cells) {
    json means = json::object();
    for (const auto& m : c.models) means[m.model] = m.mean_ndcg;
    log("evaluate", "cell", json{{"gamma", c.gamma}, {"n_negatives", c.n_negatives}, {"mean_ndcg", means}});
  }
  return report;
}

MetricsReport Pipeline::run_all() {
  if (config_.data.source == "synth") synth();
  ingest();
  embed();
  if (wants(config_, "attention") || !config_.model.depth_ablation.empty()) train(ModelKind::attention);
  if (wants(config_, "dan")) train(ModelKind::dan);
  if (wants(config_, "weighted_sum")) tune_weighted_sum();
  return evaluate();
}

void write_manifest(const RunConfig& config, const std::string& command) {
  const fs::path dir(config.run.out_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir);
    const auto name = rel.generic_string();
    if (name == "manifest.json" || name == "log.jsonl" || name == ".partial") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  json artifacts = json::object();
  for (const auto& rel : files) artifacts[rel.generic_string()] = sha256_file((dir / rel).string());
  json cfg = json::object();
  std::istringstream lines(config.canonical());
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    cfg[line.substr(0, eq)] = line.substr(eq + 1);
  }
  json m;
  m["command"] = command;
  m["config_hash"] = sha256_hex(config.canonical());
  m["config"] = std::move(cfg);
  m["seeds"] = json{{"synth", config.synth.seed},
                    {"embed", config.embed.seed},
                    {"train", config.train.seed},
                    {"weighted_sum", config.weighted_sum.seed},
                    {"eval", config.eval.seed}};
  m["threads"] = config.run.threads;
  m["artifacts"] = std::move(artifacts);
  write_file((dir / "manifest.json").string(), m.dump(1) + "\n");
}

}  // namespace attnrec
