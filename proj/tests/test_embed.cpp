#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "attnrec/corpus.hpp"
#include "attnrec/embed.hpp"
#include "attnrec/errors.hpp"

using namespace attnrec;

namespace {

EmbeddingTable small_table() {
  EmbeddingTable t;
  t.ids = {"a", "b", "c"};
  t.target.resize(3, 2);
  t.target << 0.1, 0.2, -0.3, 0.5, 0.7, -0.1;
  t.context.resize(3, 2);
  t.context << 0.4, 0.4, 0.3, -0.1, -0.2, 0.4;
  return t;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("attnrec_embed_" + name)).string();
}

}  // namespace

TEST_CASE("extract_pairs windows") {
  const std::vector<int> seq{1, 2, 3};
  const auto p1 = extract_pairs(seq, 1);
  CHECK(p1 == std::vector<std::pair<int, int>>{{1, 2}, {2, 1}, {2, 3}, {3, 2}});
  CHECK(extract_pairs(seq, 2).size() == 6);
  CHECK(extract_pairs(seq, 10).size() == 6);

  const std::vector<int> rep{4, 4, 5};
  CHECK(extract_pairs(rep, 1) == std::vector<std::pair<int, int>>{{4, 5}, {5, 4}});
  CHECK(extract_pairs(std::vector<int>{7}, 3).empty());
  CHECK_THROWS_AS(extract_pairs(seq, 0), ConfigError);
}

TEST_CASE("sg_loss hand value") {
  EmbeddingTable t = small_table();
  const int negs[1] = {2};
  // x_c = (0.1, 0.2); context row 1 gives 0.01, negative row 2 gives 0.06
  CHECK(sg_loss(t, 0, 1, negs) == doctest::Approx(1.41175679358400320794).epsilon(1e-14));

  t.context.setZero();
  const int three[3] = {1, 2, 1};
  CHECK(sg_loss(t, 0, 2, three) == doctest::Approx(4 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("sg_gradient matches central differences") {
  EmbeddingTable t = small_table();
  const int negs[3] = {2, 1, 2};
  const auto g = sg_gradient(t, 0, 1, negs);
  const double eps = 1e-6;
  for (Eigen::Index j = 0; j < 2; ++j) {
    EmbeddingTable up = t, down = t;
    up.target(0, j) += eps;
    down.target(0, j) -= eps;
    const double num = (sg_loss(up, 0, 1, negs) - sg_loss(down, 0, 1, negs)) / (2 * eps);
    CHECK(g.center(j) == doctest::Approx(num).epsilon(1e-7));
  }
  REQUIRE(g.context_items.size() == 2);
  for (std::size_t k = 0; k < g.context_items.size(); ++k) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      EmbeddingTable up = t, down = t;
      up.context(g.context_items[k], j) += eps;
      down.context(g.context_items[k], j) -= eps;
      const double num = (sg_loss(up, 0, 1, negs) - sg_loss(down, 0, 1, negs)) / (2 * eps);
      CHECK(g.context_grads[k](j) == doctest::Approx(num).epsilon(1e-7));
    }
  }
}

TEST_CASE("sg_step lowers the loss for a small rate") {
  EmbeddingTable t = small_table();
  const int negs[1] = {2};
  const double before = sg_loss(t, 0, 1, negs);
  CHECK(sg_step(t, 0, 1, negs, 0.01) == before);
  CHECK(sg_loss(t, 0, 1, negs) < before);
  // the third target row is untouched
  CHECK(t.target(2, 0) == 0.7);
}

TEST_CASE("init_embeddings range") {
  Rng rng(3);
  const auto t = init_embeddings({"x", "y", "z", "w"}, 16, rng);
  CHECK(t.target.rows() == 4);
  CHECK(t.target.cwiseAbs().maxCoeff() <= 0.5 / 16);
  CHECK(t.context.isZero());
}

TEST_CASE("embedding text round trip") {
  EmbeddingTable t = small_table();
  t.target(1, 1) = 1.0 / 3.0;
  const auto path = temp_path("rt.txt");
  save_embeddings(t, path);
  const auto back = load_embeddings(path);
  CHECK(back.ids == t.ids);
  CHECK(back.dim() == 2);
  CHECK((back.target - t.target).cwiseAbs().maxCoeff() < 1e-8);
  std::filesystem::remove(path);
}

TEST_CASE("embedding parse errors") {
  CHECK_THROWS_AS(parse_embeddings(""), DataError);
  CHECK_THROWS_AS(parse_embeddings("2 2\na 1 2\n"), DataError);
  CHECK_THROWS_AS(parse_embeddings("1 2\na 1\n"), DataError);
  CHECK_THROWS_AS(parse_embeddings("1 2\na 1 x\n"), DataError);
  CHECK_THROWS_AS(parse_embeddings("x 2\n"), DataError);
  CHECK(parse_embeddings("1 2\na 1 2\n").target(0, 1) == 2.0);
}

TEST_CASE("align_embeddings") {
  const auto t = parse_embeddings("2 1\nb 2\na 1\n");
  const Vocabulary v({"a", "b"}, {1, 1});
  const auto a = align_embeddings(t, v);
  CHECK(a.ids == std::vector<std::string>{"a", "b"});
  CHECK(a.target(0, 0) == 1.0);
  CHECK(a.target(1, 0) == 2.0);
  const Vocabulary missing({"a", "c"}, {1, 1});
  CHECK_THROWS_AS(align_embeddings(t, missing), DataError);
}

TEST_CASE("train_embeddings is deterministic and groups co-occurring items") {
  SynthConfig sc;
  sc.n_users = 300;
  sc.n_items = 40;
  sc.n_clusters = 4;
  sc.events_per_user = 20;
  sc.concentration = 0.05;
  const auto data = synth_generate(sc);
  SkipGramConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 3;
  const auto a = train_embeddings(data.corpus.vocab, data.corpus.histories, cfg);
  const auto b = train_embeddings(data.corpus.vocab, data.corpus.histories, cfg);
  CHECK(a.target == b.target);

  double same = 0, diff = 0;
  int n_same = 0, n_diff = 0;
  const auto n = static_cast<int>(a.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double c = a.vec(i).dot(a.vec(j)) / (a.vec(i).norm() * a.vec(j).norm());
      if (data.item_cluster[static_cast<std::size_t>(i)] == data.item_cluster[static_cast<std::size_t>(j)]) {
        same += c;
        ++n_same;
      } else {
        diff += c;
        ++n_diff;
      }
    }
  }
  CHECK(same / n_same > diff / n_diff + 0.2);

  cfg.dim = 0;
  CHECK_THROWS_AS(train_embeddings(data.corpus.vocab, data.corpus.histories, cfg), ConfigError);
}

TEST_CASE("single-item corpus leaves the initial vectors") {
  const Vocabulary v({"only"}, {4});
  UserHistory h{"u", {{0, Action::view, 1}, {0, Action::view, 2}}};
  SkipGramConfig cfg;
  cfg.dim = 4;
  const auto t = train_embeddings(v, std::vector<UserHistory>{h}, cfg);
  Rng rng(cfg.seed);
  Rng init = rng.split();
  CHECK(t.target == init_embeddings({"only"}, 4, init).target);
}

TEST_CASE("repeated steps on one pair lower the loss monotonically") {
  Rng rng(2);
  auto t = init_embeddings({"a", "b", "c"}, 4, rng);
  const int negs[2] = {2, 2};
  double prev = sg_loss(t, 0, 1, negs);
  for (int i = 0; i < 200; ++i) {
    sg_step(t, 0, 1, negs, 0.5);
    const double now = sg_loss(t, 0, 1, negs);
    CHECK(now < prev);
    prev = now;
  }
  CHECK(logistic(t.target.row(0).dot(t.context.row(1))) > 0.9);
}
