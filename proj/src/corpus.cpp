#include "attnrec/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "attnrec/errors.hpp"
#include "attnrec/rng.hpp"

namespace attnrec {

namespace {

constexpr std::string_view kActionNames[kNumActions] = {"purchase", "view", "stream_video", "stream_music"};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    fn(line_no, line);
    pos = end + 1;
  }
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": " + what);
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << body;
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace

std::string_view to_string(Action a) { return kActionNames[static_cast<int>(a)]; }

std::optional<Action> parse_action(std::string_view s) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionNames[i] == s) return static_cast<Action>(i);
  }
  return std::nullopt;
}

Vocabulary::Vocabulary(std::vector<std::string> ids, std::vector<std::int64_t> counts)
    : ids_(std::move(ids)), counts_(std::move(counts)) {
  if (ids_.size() != counts_.size()) throw DataError("vocabulary: ids/counts length mismatch");
  lookup_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i].empty()) throw DataError("vocabulary: empty item id");
    if (counts_[i] < 1) throw DataError("vocabulary: non-positive count for " + ids_[i]);
    if (!lookup_.emplace(ids_[i], static_cast<int>(i)).second) {
      throw DataError("vocabulary: duplicate item id " + ids_[i]);
    }
  }
}

std::optional<int> Vocabulary::index(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<InteractionEvent> parse_log(std::string_view text) {
  std::vector<InteractionEvent> events;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty() || line.front() == '#') return;
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      line_error(line_no, "expected 4 tab-separated fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) line_error(line_no, "empty user or item id");
    const auto action = parse_action(fields[2]);
    if (!action) line_error(line_no, "unknown action '" + std::string(fields[2]) + "'");
    std::int64_t ts = 0;
    const auto* first = fields[3].data();
    const auto* last = first + fields[3].size();
    const auto [ptr, ec] = std::from_chars(first, last, ts);
    if (ec != std::errc() || ptr != last) line_error(line_no, "bad timestamp '" + std::string(fields[3]) + "'");
    if (ts < 0) line_error(line_no, "negative timestamp");
    events.push_back(InteractionEvent{std::string(fields[0]), std::string(fields[1]), *action, ts});
  });
  return events;
}

std::vector<InteractionEvent> read_log(const std::string& path) { return parse_log(read_file(path)); }

Corpus build_corpus(std::span<const InteractionEvent> events, int min_user_events, int min_item_count) {
  if (min_user_events < 1 || min_item_count < 1) throw ConfigError("ingest thresholds must be >= 1");

  // Per-user event positions in input order.
  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < events.size(); ++i) by_user[events[i].user_id].push_back(i);

  std::vector<char> keep(events.size(), 1);
  for (bool changed = true; changed;) {
    changed = false;
    std::unordered_map<std::string_view, std::int64_t> item_count;
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (keep[i]) ++item_count[events[i].item_id];
    }
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (keep[i] && item_count[events[i].item_id] < min_item_count) {
        keep[i] = 0;
        changed = true;
      }
    }
    for (const auto& [user, positions] : by_user) {
      const auto n = std::count_if(positions.begin(), positions.end(), [&](std::size_t p) { return keep[p]; });
      if (n > 0 && n < min_user_events) {
        for (std::size_t p : positions) keep[p] = 0;
        changed = true;
      }
    }
  }

  std::map<std::string_view, std::int64_t> counts;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (keep[i]) ++counts[events[i].item_id];
  }
  if (counts.empty()) throw DataError("no interactions left after filtering");

  std::vector<std::string> ids;
  std::vector<std::int64_t> cnt;
  ids.reserve(counts.size());
  cnt.reserve(counts.size());
  for (const auto& [id, c] : counts) {
    ids.emplace_back(id);
    cnt.push_back(c);
  }
  Corpus corpus;
  corpus.vocab = Vocabulary(std::move(ids), std::move(cnt));

  for (const auto& [user, positions] : by_user) {
    UserHistory h;
    h.user_id = user;
    for (std::size_t p : positions) {
      if (!keep[p]) continue;
      h.events.push_back(Event{*corpus.vocab.index(events[p].item_id), events[p].action, events[p].timestamp});
    }
    if (h.events.empty()) continue;
    std::stable_sort(h.events.begin(), h.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    corpus.histories.push_back(std::move(h));
  }
  return corpus;
}

Corpus ingest(const std::string& path, int min_user_events, int min_item_count) {
  const auto events = read_log(path);
  return build_corpus(events, min_user_events, min_item_count);
}

void write_log(const Corpus& corpus, const std::string& path) {
  std::ostringstream os;
  for (const auto& h : corpus.histories) {
    for (const auto& e : h.events) {
      os << h.user_id << '\t' << corpus.vocab.id(e.item) << '\t' << to_string(e.action) << '\t' << e.timestamp
         << '\n';
    }
  }
  write_file(path, os.str());
}

void write_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ostringstream os;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    os << i << '\t' << vocab.ids()[i] << '\t' << vocab.counts()[i] << '\n';
  }
  write_file(path, os.str());
}

Vocabulary read_vocabulary(const std::string& path) {
  std::vector<std::string> ids;
  std::vector<std::int64_t> counts;
  for_each_line(read_file(path), [&](std::size_t line_no, std::string_view line) {
    if (line.empty()) return;
    const auto f = split_tabs(line);
    if (f.size() != 3) line_error(line_no, "expected index<TAB>item_id<TAB>count");
    std::size_t idx = 0;
    std::int64_t c = 0;
    auto r1 = std::from_chars(f[0].data(), f[0].data() + f[0].size(), idx);
    auto r2 = std::from_chars(f[2].data(), f[2].data() + f[2].size(), c);
    if (r1.ec != std::errc() || r1.ptr != f[0].data() + f[0].size() || r2.ec != std::errc() ||
        r2.ptr != f[2].data() + f[2].size()) {
      line_error(line_no, "bad number");
    }
    if (idx != ids.size()) line_error(line_no, "indices must be dense and ascending");
    ids.emplace_back(f[1]);
    counts.push_back(c);
  });
  return Vocabulary(std::move(ids), std::move(counts));
}

std::vector<std::int64_t> item_user_counts(std::span<const UserHistory> histories, std::size_t n_items) {
  std::vector<std::int64_t> counts(n_items, 0);
  std::vector<std::size_t> last_user(n_items, SIZE_MAX);
  for (std::size_t u = 0; u < histories.size(); ++u) {
    for (const auto& e : histories[u].events) {
      const auto i = static_cast<std::size_t>(e.item);
      if (i >= n_items) throw DataError("item index out of range");
      if (last_user[i] != u) {
        last_user[i] = u;
        ++counts[i];
      }
    }
  }
  return counts;
}

std::vector<int> distinct_items(std::span<const Event> events) {
  std::vector<int> out;
  std::unordered_set<int> seen;
  for (const auto& e : events) {
    if (seen.insert(e.item).second) out.push_back(e.item);
  }
  return out;
}

std::optional<EventSplit> split_events(const UserHistory& history, int n_future) {
  if (n_future < 1) throw ConfigError("n_future must be >= 1");
  const auto& ev = history.events;
  std::unordered_set<int> future_set;
  std::size_t cut = ev.size();
  while (cut > 0 && future_set.size() < static_cast<std::size_t>(n_future)) {
    --cut;
    future_set.insert(ev[cut].item);
  }
  if (future_set.size() < static_cast<std::size_t>(n_future)) return std::nullopt;

  EventSplit split;
  split.future = distinct_items(std::span(ev).subspan(cut));
  for (std::size_t i = 0; i < cut; ++i) {
    if (!future_set.contains(ev[i].item)) split.observed.push_back(ev[i]);
  }
  if (split.observed.empty()) return std::nullopt;
  return split;
}

std::optional<SplitInstance> temporal_split(const UserHistory& history, int n_future, std::size_t max_observed) {
  auto split = split_events(history, n_future);
  if (!split) return std::nullopt;
  SplitInstance inst;
  inst.user_id = history.user_id;
  inst.future = std::move(split->future);
  inst.observed = distinct_items(split->observed);
  if (max_observed > 0 && inst.observed.size() > max_observed) {
    // Keep the items with the latest last occurrence.
    std::unordered_set<int> recent;
    for (auto it = split->observed.rbegin(); it != split->observed.rend() && recent.size() < max_observed; ++it) {
      recent.insert(it->item);
    }
    std::erase_if(inst.observed, [&](int item) { return !recent.contains(item); });
  }
  return inst;
}

TrainTestSplit train_test_split(std::span<const UserHistory> histories, std::int64_t boundary) {
  TrainTestSplit out;
  for (const auto& h : histories) {
    UserHistory train{h.user_id, {}};
    std::vector<Event> test;
    for (const auto& e : h.events) {
      (e.timestamp < boundary ? train.events : test).push_back(e);
    }
    if (train.events.empty()) continue;
    std::unordered_set<int> seen;
    for (const auto& e : train.events) seen.insert(e.item);
    TestPair pair;
    pair.user = out.train.size();
    for (int item : distinct_items(test)) {
      if (!seen.contains(item)) pair.items.push_back(item);
    }
    out.train.push_back(std::move(train));
    if (!pair.items.empty()) out.test.push_back(std::move(pair));
  }
  return out;
}

int synth_cluster_of(int item, int n_items, int n_clusters) {
  // Block c starts at floor(c * n / C); invert for the largest such start <= item.
  return static_cast<int>(((static_cast<std::int64_t>(item) + 1) * n_clusters - 1) / n_items);
}

SynthData synth_generate(const SynthConfig& cfg) {
  if (cfg.n_users < 1 || cfg.n_items < 1 || cfg.n_clusters < 1 || cfg.events_per_user < 1) {
    throw ConfigError("synth: all sizes must be >= 1");
  }
  if (cfg.n_clusters > cfg.n_items) throw ConfigError("synth: n_clusters must not exceed n_items");
  if (!(cfg.concentration > 0.0)) throw ConfigError("synth: concentration must be > 0");

  std::vector<int> block_start(static_cast<std::size_t>(cfg.n_clusters) + 1);
  for (int c = 0; c <= cfg.n_clusters; ++c) {
    block_start[static_cast<std::size_t>(c)] =
        static_cast<int>(static_cast<std::int64_t>(c) * cfg.n_items / cfg.n_clusters);
  }

  char buf[32];
  auto item_id = [&](int i) {
    std::snprintf(buf, sizeof buf, "i%06d", i);
    return std::string(buf);
  };

  Rng rng(cfg.seed);
  SynthData data;
  data.events.reserve(static_cast<std::size_t>(cfg.n_users) * static_cast<std::size_t>(cfg.events_per_user));
  std::vector<double> pref(static_cast<std::size_t>(cfg.n_clusters));
  for (int u = 0; u < cfg.n_users; ++u) {
    if (std::isinf(cfg.concentration)) {
      std::fill(pref.begin(), pref.end(), 1.0 / cfg.n_clusters);
    } else {
      double total = 0.0;
      for (auto& p : pref) total += (p = rng.gamma(cfg.concentration));
      if (total > 0.0) {
        for (auto& p : pref) p /= total;
      } else {
        // Every gamma draw underflowed; fall back to a single random cluster.
        std::fill(pref.begin(), pref.end(), 0.0);
        pref[rng.index(pref.size())] = 1.0;
      }
    }
    std::snprintf(buf, sizeof buf, "u%06d", u);
    const std::string user(buf);
    for (int j = 0; j < cfg.events_per_user; ++j) {
      const double r = rng.uniform();
      double acc = 0.0;
      int cluster = cfg.n_clusters - 1;
      for (int c = 0; c < cfg.n_clusters; ++c) {
        acc += pref[static_cast<std::size_t>(c)];
        if (r < acc) {
          cluster = c;
          break;
        }
      }
      const int lo = block_start[static_cast<std::size_t>(cluster)];
      const int hi = block_start[static_cast<std::size_t>(cluster) + 1];
      const int item = lo + static_cast<int>(rng.index(static_cast<std::uint64_t>(hi - lo)));
      // Action mix carries no signal: 60% view, 20% purchase, 10% each stream type.
      const double a = rng.uniform();
      const Action action = a < 0.6 ? Action::view
                            : a < 0.8 ? Action::purchase
                            : a < 0.9 ? Action::stream_video
                                      : Action::stream_music;
      data.events.push_back(InteractionEvent{user, item_id(item), action,
                                             static_cast<std::int64_t>(j) * kSynthEventSpacing + u % 3600});
    }
  }

  data.corpus = build_corpus(data.events, 1, 1);
  data.item_cluster.resize(data.corpus.vocab.size());
  for (std::size_t i = 0; i < data.corpus.vocab.size(); ++i) {
    const int raw = std::stoi(data.corpus.vocab.id(static_cast<int>(i)).substr(1));
    data.item_cluster[i] = synth_cluster_of(raw, cfg.n_items, cfg.n_clusters);
  }
  return data;
}

}  // namespace attnrec
