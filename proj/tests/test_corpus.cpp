#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "attnrec/corpus.hpp"
#include "attnrec/errors.hpp"

using namespace attnrec;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("attnrec_corpus_" + name)).string();
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

UserHistory history_of(const std::vector<int>& items) {
  UserHistory h{"u", {}};
  for (std::size_t t = 0; t < items.size(); ++t) h.events.push_back(Event{items[t], Action::view, static_cast<std::int64_t>(t)});
  return h;
}

}  // namespace

TEST_CASE("ingest: single user, thresholds 1/1") {
  const auto path = temp_path("one.tsv");
  write_text(path, "# header comment\nu1\ta\tview\t30\nu1\tb\tpurchase\t10\n\nu1\tc\tstream_music\t20\n");
  const Corpus c = ingest(path, 1, 1);
  REQUIRE(c.histories.size() == 1);
  const auto& ev = c.histories[0].events;
  REQUIRE(ev.size() == 3);
  CHECK(ev[0].timestamp == 10);
  CHECK(ev[1].timestamp == 20);
  CHECK(ev[2].timestamp == 30);
  CHECK(c.vocab.id(ev[0].item) == "b");
  CHECK(ev[0].action == Action::purchase);
}

TEST_CASE("ingest: descending input becomes ascending, ties keep input order") {
  const auto events = parse_log("u\tx\tview\t5\nu\ty\tview\t5\nu\tz\tview\t1\n");
  const Corpus c = build_corpus(events, 1, 1);
  const auto& ev = c.histories[0].events;
  CHECK(c.vocab.id(ev[0].item) == "z");
  CHECK(c.vocab.id(ev[1].item) == "x");
  CHECK(c.vocab.id(ev[2].item) == "y");
}

TEST_CASE("ingest: rare items are dropped everywhere") {
  const auto events = parse_log(
      "u1\ta\tview\t1\nu1\tb\tview\t2\nu1\tonce\tview\t3\n"
      "u2\ta\tview\t1\nu2\tb\tview\t2\nu2\ta\tview\t4\n");
  const Corpus c = build_corpus(events, 1, 2);
  CHECK_FALSE(c.vocab.index("once").has_value());
  for (const auto& h : c.histories) {
    for (const auto& e : h.events) CHECK(c.vocab.id(e.item) != "once");
  }
  CHECK(c.vocab.count(*c.vocab.index("a")) == 3);
}

TEST_CASE("ingest: counts reflect post-filter frequencies and users below threshold go") {
  const auto events = parse_log("u1\ta\tview\t1\nu1\tb\tview\t2\nu1\tc\tview\t3\nu2\ta\tview\t1\n");
  const Corpus c = build_corpus(events, 2, 1);
  REQUIRE(c.histories.size() == 1);
  CHECK(c.histories[0].user_id == "u1");
  CHECK(c.vocab.count(*c.vocab.index("a")) == 1);
}

TEST_CASE("ingest errors") {
  CHECK_THROWS_WITH_AS(parse_log("u\ta\tview\t1\nu\tb\tview\n"), doctest::Contains("line 2"), DataError);
  CHECK_THROWS_WITH_AS(parse_log("u\ta\tclick\t1\n"), doctest::Contains("line 1"), DataError);
  CHECK_THROWS_WITH_AS(parse_log("\n\nu\ta\tview\tnope\n"), doctest::Contains("line 3"), DataError);
  CHECK_THROWS_AS(parse_log("u\ta\tview\t-4\n"), DataError);
  const auto events = parse_log("u\ta\tview\t1\n");
  CHECK_THROWS_AS(build_corpus(events, 1, 5), DataError);
  CHECK_THROWS_AS(ingest(temp_path("does_not_exist.tsv")), DataError);
}

TEST_CASE("ingest is idempotent") {
  SynthConfig cfg;
  cfg.n_users = 60;
  cfg.n_items = 80;
  cfg.n_clusters = 4;
  cfg.events_per_user = 6;
  const auto data = synth_generate(cfg);
  const Corpus first = build_corpus(data.events, 4, 3);
  const auto p = temp_path("idem.tsv");
  write_log(first, p);
  const Corpus second = ingest(p, 4, 3);
  CHECK(second.vocab == first.vocab);
  CHECK(second.histories == first.histories);
}

TEST_CASE("vocabulary file round trip") {
  const Vocabulary v({"a", "b", "c"}, {3, 1, 7});
  const auto p = temp_path("vocab.tsv");
  write_vocabulary(v, p);
  CHECK(read_vocabulary(p) == v);
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  CHECK(line == "0\ta\t3");
  CHECK_THROWS_AS(Vocabulary({"a", "a"}, {1, 1}), DataError);
  CHECK_THROWS_AS(Vocabulary({"a"}, {0}), DataError);
}

TEST_CASE("temporal_split examples") {
  std::vector<int> fifteen(15);
  for (int i = 0; i < 15; ++i) fifteen[static_cast<std::size_t>(i)] = i;
  auto s = temporal_split(history_of(fifteen), 10);
  REQUIRE(s.has_value());
  CHECK(s->observed == std::vector<int>{0, 1, 2, 3, 4});
  std::vector<int> fut(s->future);
  std::sort(fut.begin(), fut.end());
  CHECK(fut == std::vector<int>{5, 6, 7, 8, 9, 10, 11, 12, 13, 14});

  CHECK_FALSE(temporal_split(history_of({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 10).has_value());

  // a, b, a, c with one future item
  s = temporal_split(history_of({0, 1, 0, 2}), 1);
  REQUIRE(s.has_value());
  CHECK(s->future == std::vector<int>{2});
  CHECK(s->observed == std::vector<int>{0, 1});

  // overlap is resolved in favour of the future
  s = temporal_split(history_of({0, 1, 2, 0}), 1);
  REQUIRE(s.has_value());
  CHECK(s->future == std::vector<int>{0});
  CHECK(s->observed == std::vector<int>{1, 2});
}

TEST_CASE("temporal_split caps the observed set to recent items") {
  const auto s = temporal_split(history_of({0, 1, 2, 3, 1, 4}), 1, 2);
  REQUIRE(s.has_value());
  std::vector<int> obs(s->observed);
  std::sort(obs.begin(), obs.end());
  CHECK(obs == std::vector<int>{1, 3});
}

TEST_CASE("split invariants over a synthetic corpus") {
  SynthConfig cfg;
  cfg.n_users = 300;
  cfg.n_items = 50;
  cfg.n_clusters = 5;
  cfg.events_per_user = 25;
  const auto data = synth_generate(cfg);
  int produced = 0;
  for (const auto& h : data.corpus.histories) {
    const auto es = split_events(h, 4);
    if (!es) continue;
    ++produced;
    const auto s = temporal_split(h, 4);
    REQUIRE(s.has_value());
    CHECK(s->future.size() == 4);
    CHECK(!s->observed.empty());
    const std::set<int> fut(s->future.begin(), s->future.end());
    for (int o : s->observed) CHECK_FALSE(fut.contains(o));
    std::int64_t last_obs = -1;
    for (const auto& e : es->observed) last_obs = std::max(last_obs, e.timestamp);
    for (int f : s->future) {
      std::int64_t last_f = -1;
      for (const auto& e : h.events) {
        if (e.item == f) last_f = std::max(last_f, e.timestamp);
      }
      CHECK(last_f > last_obs);
    }
  }
  CHECK(produced > 250);
}

TEST_CASE("train_test_split") {
  UserHistory a{"a", {{0, Action::view, 1}, {1, Action::view, 2}, {0, Action::view, 10}, {2, Action::view, 11}}};
  UserHistory b{"b", {{0, Action::view, 1}, {1, Action::view, 2}}};
  UserHistory c{"c", {{3, Action::view, 10}}};
  UserHistory d{"d", {{1, Action::view, 3}, {2, Action::view, 10}}};
  const std::vector<UserHistory> all{a, b, c, d};
  const auto split = train_test_split(all, 10);
  REQUIRE(split.train.size() == 3);  // c has no training events
  REQUIRE(split.test.size() == 2);   // b has nothing at or after the boundary
  const auto& ta = split.test[0];
  CHECK(split.train[ta.user].user_id == "a");
  CHECK(ta.items == std::vector<int>{2});  // item 0 was seen in training
  const auto& td = split.test[1];
  CHECK(split.train[td.user].user_id == "d");
  CHECK(td.items == std::vector<int>{2});  // event exactly at the boundary is test
  for (const auto& h : split.train) {
    for (const auto& e : h.events) CHECK(e.timestamp < 10);
  }
}

TEST_CASE("train_test_split never leaks training items") {
  SynthConfig cfg;
  cfg.n_users = 200;
  cfg.n_items = 60;
  cfg.n_clusters = 6;
  cfg.events_per_user = 20;
  const auto data = synth_generate(cfg);
  const auto split = train_test_split(data.corpus.histories, 12 * kSynthEventSpacing);
  CHECK(!split.test.empty());
  for (const auto& p : split.test) {
    const auto& h = split.train[p.user];
    CHECK(!p.items.empty());
    for (int i : p.items) {
      CHECK(std::none_of(h.events.begin(), h.events.end(), [i](const Event& e) { return e.item == i; }));
    }
  }
}

TEST_CASE("synth_generate") {
  SynthConfig cfg;
  cfg.n_users = 50;
  cfg.n_items = 40;
  cfg.n_clusters = 4;
  cfg.events_per_user = 12;
  const auto a = synth_generate(cfg);
  const auto b = synth_generate(cfg);
  CHECK(a.corpus.histories == b.corpus.histories);
  CHECK(a.corpus.vocab == b.corpus.vocab);
  std::size_t n = 0;
  for (const auto& h : a.corpus.histories) {
    n += h.events.size();
    for (std::size_t t = 1; t < h.events.size(); ++t) CHECK(h.events[t].timestamp > h.events[t - 1].timestamp);
  }
  CHECK(n == 50 * 12);
  cfg.seed = 2;
  CHECK_FALSE(synth_generate(cfg).corpus.histories == a.corpus.histories);

  cfg.n_clusters = 41;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
  cfg.n_clusters = 0;
  CHECK_THROWS_AS(synth_generate(cfg), ConfigError);
}

TEST_CASE("synth clusters are contiguous even blocks") {
  CHECK(synth_cluster_of(0, 10, 3) == 0);
  CHECK(synth_cluster_of(9, 10, 3) == 2);
  for (int n : {7, 10, 500}) {
    for (int c : {1, 3, 7}) {
      std::vector<int> size(static_cast<std::size_t>(c));
      int prev = 0;
      for (int i = 0; i < n; ++i) {
        const int k = synth_cluster_of(i, n, c);
        CHECK(k >= prev);
        prev = k;
        ++size[static_cast<std::size_t>(k)];
      }
      CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
    }
  }
  SynthConfig cfg;
  cfg.n_users = 10;
  cfg.n_items = 30;
  cfg.n_clusters = 1;
  const auto d = synth_generate(cfg);
  for (int k : d.item_cluster) CHECK(k == 0);
}

TEST_CASE("synth uniform preferences give uniform cluster usage") {
  SynthConfig cfg;
  cfg.n_users = 2000;
  cfg.n_items = 100;
  cfg.n_clusters = 10;
  cfg.events_per_user = 50;
  cfg.concentration = std::numeric_limits<double>::infinity();
  const auto d = synth_generate(cfg);
  std::vector<double> usage(10, 0.0);
  double total = 0;
  for (const auto& h : d.corpus.histories) {
    for (const auto& e : h.events) {
      usage[static_cast<std::size_t>(d.item_cluster[static_cast<std::size_t>(e.item)])] += 1;
      total += 1;
    }
  }
  CHECK(total == 100000);
  double l1 = 0;
  for (double u : usage) l1 += std::abs(u / total - 0.1);
  CHECK(l1 < 0.02);
}
