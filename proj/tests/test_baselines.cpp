#include <doctest.h>

#include <cmath>

#include "attnrec/baselines.hpp"
#include "attnrec/errors.hpp"

using namespace attnrec;

namespace {

EmbeddingTable table4() {
  EmbeddingTable t;
  t.ids = {"a", "b", "c", "d"};
  t.target.resize(4, 2);
  t.target << 1, 0, 0, 1, 1, 1, 1, 2;
  t.context = MatrixXr::Zero(4, 2);
  return t;
}

}  // namespace

TEST_CASE("popularity ranking") {
  const std::vector<std::int64_t> counts{5, 9, 5, 1};
  CHECK(popularity_rank(counts, std::vector<int>{0, 1, 2, 3}) == std::vector<int>{1, 0, 2, 3});
  CHECK(popularity_rank(counts, std::vector<int>{3, 2, 0}) == std::vector<int>{0, 2, 3});
  CHECK(popularity_rank(counts, std::vector<int>{}).empty());
}

TEST_CASE("cosine") {
  const Eigen::Vector2d a(1, 0), b(0, 2), c(3, 0);
  CHECK(cosine(a, b) == 0.0);
  CHECK(cosine(a, c) == 1.0);
  CHECK(cosine(a, -c) == -1.0);
  CHECK_THROWS_AS(cosine(a, Eigen::Vector2d::Zero()), ConfigError);
}

TEST_CASE("last item uses the latest event") {
  const auto t = table4();
  const std::vector<Event> h{{0, Action::view, 5}, {1, Action::view, 9}, {2, Action::view, 1}};
  CHECK(last_item_score(t, h, 1) == doctest::Approx(1.0));
  CHECK(last_item_score(t, h, 0) == doctest::Approx(0.0));
  const std::vector<Event> tie{{0, Action::view, 9}, {1, Action::view, 9}};
  CHECK(last_item_score(t, tie, 1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(last_item_score(t, std::vector<Event>{}, 0), ConfigError);
}

TEST_CASE("weighted sum hand values") {
  const auto t = table4();
  const std::vector<Event> h{{0, Action::view, 0}, {1, Action::purchase, 10}};
  WeightedSumParams p;
  p.decay = 0.1;
  p.type_weight = {2.0, 1.0, 1.0, 1.0};
  CHECK(weighted_sum_score(t, h, p, 10, 2) == doctest::Approx(0.8233589781815336447).epsilon(1e-14));
  CHECK(weighted_sum_score(t, h, p, 1000, 3) == doctest::Approx(0.9605727831572575464).epsilon(1e-14));

  WeightedSumParams flat;
  const VectorXr mean = weighted_user_vector(t, h, flat, 10);
  CHECK(mean(0) == 0.5);
  CHECK(mean(1) == 0.5);
}

TEST_CASE("weighted sum is invariant to now and to history order") {
  const auto t = table4();
  const std::vector<Event> h{{0, Action::view, 0}, {3, Action::stream_music, 4}, {1, Action::purchase, 10}};
  const std::vector<Event> r{h[2], h[0], h[1]};
  WeightedSumParams p;
  p.decay = 0.05;
  p.type_weight = {3.0, 1.0, 0.5, 2.0};
  for (int q = 0; q < 4; ++q) {
    const double s = weighted_sum_score(t, h, p, 10, q);
    CHECK(weighted_sum_score(t, r, p, 10, q) == s);
    CHECK(weighted_sum_score(t, h, p, 1000000, q) == s);
  }
  p.decay = 1e6;
  CHECK(weighted_sum_score(t, h, p, 10, 1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(weighted_user_vector(t, h, p, 9), ConfigError);
}

TEST_CASE("weighted sum zero-weight fallback and validation") {
  const auto t = table4();
  const std::vector<Event> h{{0, Action::view, 0}, {1, Action::view, 1}};
  WeightedSumParams p;
  p.type_weight = {1.0, 0.0, 0.0, 0.0};
  const VectorXr v = weighted_user_vector(t, h, p, 1);
  CHECK(v(0) == 0.5);
  p.type_weight = {0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.type_weight = {1.0, -1.0, 0.0, 0.0};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.type_weight = {1.0, 1.0, 1.0, 1.0};
  p.decay = -1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("weighted sum parameter text round trip") {
  WeightedSumParams p;
  p.decay = 1.0 / 86400.0 / 3.0;
  p.type_weight = {0.1, 7.25, 1e-9, 3.0};
  CHECK(parse_weighted_sum(format_weighted_sum(p)) == p);
  CHECK_THROWS_AS(parse_weighted_sum("decay=abc\n"), DataError);
  CHECK_THROWS_AS(parse_weighted_sum("bogus=1\n"), DataError);
  CHECK_THROWS_AS(parse_weighted_sum("decay\n"), DataError);
  CHECK_THROWS_AS(parse_weighted_sum("decay=-2\n"), DataError);
  CHECK(parse_weighted_sum("# comment\ndecay=0.5\n").decay == 0.5);
}
