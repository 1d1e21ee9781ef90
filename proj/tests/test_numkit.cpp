#include <doctest.h>

#include <cmath>

#include "attnrec/numkit.hpp"
#include "attnrec/param_layout.hpp"

using namespace attnrec;

TEST_CASE("affine") {
  VectorXr x(3);
  x << 1.5, -2.0, 0.25;
  CHECK((affine(MatrixXr::Identity(3, 3), VectorXr::Zero(3), x) - x).norm() == 0.0);

  VectorXr c(2);
  c << 3.0, -1.0;
  CHECK((affine(MatrixXr::Zero(2, 3), c, x) - c).norm() == 0.0);

  MatrixXr W(2, 2);
  W << 1, 2, 3, 4;
  VectorXr b(2), one(2);
  b << 1, 0;
  one << 1, 1;
  const VectorXr y = affine(W, b, one);
  CHECK(y(0) == 4.0);
  CHECK(y(1) == 7.0);

  CHECK_THROWS_AS(affine(W, b, x), ConfigError);
}

TEST_CASE("softmax") {
  VectorXr s(2);
  s << 0, 0;
  auto p = softmax(s);
  CHECK(p(0) == doctest::Approx(0.5));
  CHECK(p(1) == doctest::Approx(0.5));

  CHECK(softmax(VectorXr::Constant(1, 3.0))(0) == 1.0);

  s << 1000, 0;
  p = softmax(s);
  CHECK(p.allFinite());
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) < 1e-300);

  CHECK_THROWS_AS(softmax(VectorXr(0)), ConfigError);
}

TEST_CASE("softmax properties on random inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.index(20));
    VectorXr s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = 10.0 * rng.normal();
    const VectorXr p = softmax(s);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK(p.maxCoeff() <= 1.0);
    CHECK(p.minCoeff() >= 0.0);
    const VectorXr shifted = softmax(VectorXr(s.array() + 37.5));
    CHECK((shifted - p).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("logistic") {
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(2.0) == doctest::Approx(0.880797077977882).epsilon(1e-14));
  for (double x : {-30.0, -3.0, -0.1, 0.7, 5.0, 40.0}) CHECK(logistic(-x) == doctest::Approx(1.0 - logistic(x)));
  CHECK(logistic(-800.0) >= 0.0);
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(log_logistic(0.0) == doctest::Approx(std::log(0.5)));
}

TEST_CASE("adam: zero gradient is the identity") {
  AdamState<double> st(3, 0.1);
  st.m << 0.5, -0.2, 0.1;
  st.v << 0.3, 0.2, 0.1;
  st.t = 7;
  VectorXr p(3);
  p << 1, 2, 3;
  const VectorXr before = p;
  const VectorXr zero = VectorXr::Zero(3);
  adam_step(st, p, zero);
  CHECK(p == before);
  CHECK(st.t == 7);
}

TEST_CASE("adam: first step has magnitude lr") {
  for (double g : {1e-3, 0.5, -4.0, 250.0}) {
    AdamState<double> st(1, 0.002);
    VectorXr p = VectorXr::Zero(1);
    VectorXr grad = VectorXr::Constant(1, g);
    adam_step(st, p, grad);
    CHECK(std::abs(p(0)) == doctest::Approx(0.002 * std::abs(g) / (std::abs(g) + 1e-8)).epsilon(1e-12));
    CHECK(std::abs(p(0)) == doctest::Approx(0.002).epsilon(1e-5));
    CHECK((p(0) < 0) == (g > 0));
  }
}

TEST_CASE("adam: two steps against hand-computed accumulators") {
  AdamState<double> st(1, 0.1);
  VectorXr p = VectorXr::Constant(1, 1.0);
  VectorXr g1 = VectorXr::Constant(1, 2.0), g2 = VectorXr::Constant(1, -1.0);
  adam_step(st, p, g1);
  adam_step(st, p, g2);
  // m1 = 0.2, v1 = 0.004; m2 = 0.08, v2 = 0.004996
  CHECK(st.m(0) == doctest::Approx(0.08));
  CHECK(st.v(0) == doctest::Approx(0.004996));
  const double step1 = 0.1 * (0.2 / 0.1) / (std::sqrt(0.004 / 0.001) + 1e-8);
  const double step2 = 0.1 * (0.08 / 0.19) / (std::sqrt(0.004996 / (1 - 0.999 * 0.999)) + 1e-8);
  CHECK(p(0) == doctest::Approx(1.0 - step1 - step2).epsilon(1e-12));
}

TEST_CASE("adam rejects non-finite gradients") {
  AdamState<double> st(2);
  VectorXr p = VectorXr::Zero(2);
  VectorXr g(2);
  g << 1.0, std::nan("");
  CHECK_THROWS_AS(adam_step(st, p, g), NumericError);
}

TEST_CASE("clip_global_norm") {
  VectorXr g(2);
  g << 3, 4;
  CHECK(clip_global_norm(g, 10.0) == 5.0);
  CHECK(g.norm() == 5.0);
  g << 12, 16;
  clip_global_norm(g, 10.0);
  CHECK(g.norm() == doctest::Approx(10.0).epsilon(1e-15));
  const VectorXr once = g;
  clip_global_norm(g, 10.0);
  CHECK((g - once).norm() < 1e-15);
  VectorXr z = VectorXr::Zero(4);
  clip_global_norm(z, 10.0);
  CHECK(z.norm() == 0.0);

  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    VectorXr r(6);
    for (int i = 0; i < 6; ++i) r(i) = 5.0 * rng.normal();
    const double before = r.norm();
    clip_global_norm(r, 4.0);
    CHECK(r.norm() <= before + 1e-12);
  }
}

TEST_CASE("orthogonal_init") {
  Rng rng(1);
  for (auto [r, c] : {std::pair{5, 5}, {4, 2}, {2, 4}, {128, 64}, {6, 8}}) {
    const MatrixXr q = orthogonal_init(r, c, rng);
    CHECK(q.rows() == r);
    CHECK(q.cols() == c);
    const MatrixXr gram = r >= c ? MatrixXr(q.transpose() * q) : MatrixXr(q * q.transpose());
    CHECK((gram - MatrixXr::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-6);
  }
  Rng a(42), b(42);
  CHECK(orthogonal_init(7, 3, a) == orthogonal_init(7, 3, b));
}

TEST_CASE("finite_diff_check: quadratic") {
  Rng rng(2);
  VectorXr x(300);
  for (int i = 0; i < 300; ++i) x(i) = rng.normal();
  auto loss = [](const Vector<long double>& v) { return 0.5L * v.squaredNorm(); };
  const Vector<long double> wide = x.cast<long double>();
  const auto rep = finite_diff_check<long double>(loss, wide, x, 1e-5L, 1e-9, 200, rng);
  CHECK(rep.coords_checked == 200);
  CHECK(rep.max_rel_error < 1e-9);
}

TEST_CASE("finite_diff_check: logistic loss") {
  Rng rng(4);
  // loss(theta) = -[y log s(a.theta) + (1-y) log(1 - s(a.theta))], gradient (s - y) a
  VectorXr a(5), theta(5);
  for (int i = 0; i < 5; ++i) {
    a(i) = rng.normal();
    theta(i) = rng.normal();
  }
  const double y = 1.0;
  auto loss = [&](const VectorXr& t) { return softplus(-a.dot(t)); };
  const VectorXr grad = (logistic(a.dot(theta)) - y) * a;
  CHECK(finite_diff_check<double>(loss, theta, grad, 1e-5, 1e-6, 200, rng).passed());
  const VectorXr wrong = 1.1 * grad;
  CHECK_FALSE(finite_diff_check<double>(loss, theta, wrong, 1e-5, 1e-6, 200, rng).passed());
}

TEST_CASE("param layout maps blocks row-major") {
  ParamLayout layout;
  layout.add("A", 2, 3);
  layout.add("b", 2, 1);
  CHECK(layout.size() == 8);
  VectorXr flat = VectorXr::LinSpaced(8, 0, 7);
  auto A = layout.map(0, flat);
  CHECK(A(1, 0) == 3.0);
  auto b = layout.map(1, flat);
  CHECK(b(1, 0) == 7.0);
  A(0, 2) = -1;
  CHECK(flat(2) == -1.0);
}
