#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "attnrec/dan.hpp"
#include "attnrec/errors.hpp"

using namespace attnrec;

namespace {

EmbeddingTable hand_table() {
  EmbeddingTable t;
  t.ids = {"x0", "x1", "q"};
  t.target.resize(3, 2);
  t.target << 1.0, 0.0, 0.0, 1.0, 0.5, -0.5;
  t.context = MatrixXr::Zero(3, 2);
  return t;
}

EmbeddingTable random_table(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingTable t;
  for (int i = 0; i < n; ++i) t.ids.push_back("i" + std::to_string(i));
  t.target.resize(n, d);
  for (Eigen::Index i = 0; i < t.target.size(); ++i) t.target.data()[i] = rng.normal();
  t.context = MatrixXr::Zero(n, d);
  return t;
}

}  // namespace

TEST_CASE("layout") {
  const DanShape s{4, 6, 2};
  CHECK(dan_layout(s).size() == (24 + 6) + (36 + 6) + (24 + 4));
  DanParams<double> p(s);
  CHECK(p.n_layers() == 3);
  CHECK(p.weight(0).rows() == 6);
  CHECK(p.weight(2).rows() == 4);
}

TEST_CASE("hand-traced forward with a clipped unit") {
  DanParams<double> p(DanShape{2, 2, 1});
  p.weight(0) << 1, -1, 2, 1;
  p.bias(0) << 0.1, -2.2;
  p.weight(1) << 1, 0, 0.5, -1;
  p.bias(1) << 0, 0.1;
  const auto t = hand_table();
  const std::vector<int> hist{0, 1};
  const auto tr = dan_user_vector(p, hist, t);
  CHECK(tr.mean(0) == 0.5);
  CHECK(tr.post[1](1) == 0.0);
  CHECK(tr.user(0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(tr.user(1) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(dan_score(p, t, hist, 2) == doctest::Approx(0.4937503255004895658).epsilon(1e-14));
}

TEST_CASE("history order and duplicates do not change scores") {
  const auto t = random_table(12, 4, 1);
  Rng rng(2);
  const auto p = init_dan(DanShape{4, 5, 2}, rng);
  const std::vector<int> a{1, 5, 9};
  const std::vector<int> b{9, 1, 5, 5};
  for (int q = 0; q < 12; ++q) CHECK(dan_score(p, t, a, q) == dan_score(p, t, b, q));
}

TEST_CASE("gradient matches central differences") {
  const auto t = random_table(20, 5, 3);
  Rng rng(4);
  DanParams<double> p(DanShape{5, 6, 2});
  for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values(i) = 0.4 * rng.normal();
  const SplitInstance inst{"u", {0, 3, 5, 7}, {9, 11}};
  const std::vector<int> negs{12, 13, 14, 15};
  VectorXr grad = VectorXr::Zero(p.values.size());
  dan_instance_loss(p, inst, negs, t, &grad);
  const auto wide = p.cast<long double>();
  auto loss = [&](const Vector<long double>& v) {
    DanParams<long double> q = wide;
    q.values = v;
    return dan_instance_loss(q, inst, negs, t);
  };
  Rng coords(5);
  const auto rep = finite_diff_check<long double>(loss, wide.values, grad, 1e-5L, 1e-5, 200, coords);
  CHECK(rep.coords_checked == static_cast<std::size_t>(p.values.size()));
  CHECK(rep.passed());
}

TEST_CASE("instance loss validation") {
  const auto t = random_table(10, 3, 8);
  DanParams<double> zero(DanShape{3, 3, 1});
  const SplitInstance inst{"u", {0, 1}, {2}};
  CHECK(dan_instance_loss(zero, inst, std::vector<int>{4, 5}, t) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(dan_instance_loss(zero, inst, std::vector<int>{2}, t), ConfigError);
  CHECK_THROWS_AS(dan_scores(zero, std::vector<int>{}, std::vector<int>{1}, t), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(6);
  const auto p = init_dan(DanShape{4, 7, 3}, rng);
  const auto path = (std::filesystem::temp_directory_path() / "attnrec_dan.ckpt").string();
  save_dan(p, path);
  const auto back = load_dan(path, 4);
  CHECK(back.shape() == p.shape());
  CHECK(back.values == p.values);
  CHECK_THROWS_AS(load_dan(path, 5), DataError);
  CHECK_THROWS_AS(load_attention(path, 4), DataError);
  std::filesystem::remove(path);
}
