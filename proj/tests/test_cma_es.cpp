#include <doctest.h>

#include <cmath>
#include <limits>

#include "attnrec/cma_es.hpp"
#include "attnrec/errors.hpp"

using namespace attnrec;

TEST_CASE("default population") {
  CHECK(default_population(1) == 4);
  CHECK(default_population(5) == 8);
  CHECK(default_population(10) == 10);
}

TEST_CASE("sphere in five dimensions") {
  VectorXr target(5);
  target << 1.0, -2.0, 0.5, 3.0, -1.5;
  CmaEsConfig cfg;
  cfg.iterations = 200;
  cfg.seed = 7;
  const auto r = cma_es_optimize([&](const VectorXr& x) { return (x - target).squaredNorm(); }, VectorXr::Zero(5), cfg);
  CHECK((r.best - target).norm() < 1e-3);
  CHECK(r.start_value == doctest::Approx(target.squaredNorm()));
  CHECK(r.best_history.size() == 200);
  for (std::size_t i = 1; i < r.best_history.size(); ++i) CHECK(r.best_history[i] <= r.best_history[i - 1]);
  CHECK(r.evaluations == 1 + 200 * 8);
}

TEST_CASE("rosenbrock makes progress") {
  auto rosen = [](const VectorXr& x) {
    return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
  };
  CmaEsConfig cfg;
  cfg.iterations = 400;
  cfg.sigma0 = 0.5;
  const auto r = cma_es_optimize(rosen, VectorXr::Constant(2, -1.0), cfg);
  CHECK(r.best_value < 1e-6);
}

TEST_CASE("determinism and thread-count invariance") {
  auto f = [](const VectorXr& x) { return x.array().abs().sum() + std::sin(x(0)); };
  CmaEsConfig cfg;
  cfg.iterations = 30;
  cfg.seed = 3;
  const auto a = cma_es_optimize(f, VectorXr::Ones(3), cfg);
  const auto b = cma_es_optimize(f, VectorXr::Ones(3), cfg);
  cfg.threads = 3;
  const auto c = cma_es_optimize(f, VectorXr::Ones(3), cfg);
  CHECK(a.best == b.best);
  CHECK(a.best == c.best);
  CHECK(a.best_history == c.best_history);
}

TEST_CASE("non-finite values never become best") {
  auto f = [](const VectorXr& x) {
    return x(0) > 0.5 ? std::numeric_limits<double>::quiet_NaN() : (x(0) + 1.0) * (x(0) + 1.0);
  };
  CmaEsConfig cfg;
  cfg.iterations = 60;
  const auto r = cma_es_optimize(f, VectorXr::Zero(1), cfg);
  CHECK(std::isfinite(r.best_value));
  CHECK(r.best(0) <= 0.5);
  CHECK(r.best_value < 1e-4);
}

TEST_CASE("zero iterations returns the start point") {
  CmaEsConfig cfg;
  cfg.iterations = 0;
  const auto r = cma_es_optimize([](const VectorXr& x) { return x.squaredNorm(); }, VectorXr::Ones(2), cfg);
  CHECK(r.best == VectorXr::Ones(2));
  CHECK(r.best_value == 2.0);
}

TEST_CASE("bad configurations") {
  auto f = [](const VectorXr& x) { return x.squaredNorm(); };
  CmaEsConfig cfg;
  CHECK_THROWS_AS(cma_es_optimize(f, VectorXr(0), cfg), ConfigError);
  cfg.sigma0 = 0.0;
  CHECK_THROWS_AS(cma_es_optimize(f, VectorXr::Ones(2), cfg), ConfigError);
  cfg = CmaEsConfig{};
  cfg.population = 1;
  CHECK_THROWS_AS(cma_es_optimize(f, VectorXr::Ones(2), cfg), ConfigError);
}
