#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "attnrec/config.hpp"
#include "attnrec/errors.hpp"

using namespace attnrec;

TEST_CASE("defaults validate and keys are unique") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  const auto keys = config_keys();
  const std::set<std::string> uniq(keys.begin(), keys.end());
  CHECK(uniq.size() == keys.size());
  CHECK(uniq.contains("train.lr"));
  CHECK(uniq.contains("eval.n_negatives"));
  CHECK(c.eval.n_negatives == std::vector<std::size_t>{100, 500, 1000});
  CHECK(c.train.learning_rate == 0.002);
  CHECK(c.train.decay == 0.8);
}

TEST_CASE("sections, comments and lists") {
  RunConfig c;
  apply_config_text(c,
                    "# comment\n"
                    "[train]\n"
                    "lr = 0.01\n"
                    "exclude_observed = true\n"
                    "; another comment\n"
                    "[eval]\n"
                    "gammas = 0, 0.5\n"
                    "models = popularity,attention\n"
                    "[model]\n"
                    "depth_ablation = 1,2,4\n");
  CHECK(c.train.learning_rate == 0.01);
  CHECK(c.train.exclude_observed);
  CHECK(c.eval.gammas == std::vector<double>{0.0, 0.5});
  CHECK(c.eval.models == std::vector<std::string>{"popularity", "attention"});
  CHECK(c.model.depth_ablation == std::vector<int>{1, 2, 4});
}

TEST_CASE("canonical text round trips") {
  RunConfig c;
  apply_override(c, "train.lr=0.0031");
  apply_override(c, "eval.k=1,3");
  apply_override(c, "data.source=log");
  apply_override(c, "data.log_path=/tmp/x.tsv");
  RunConfig d;
  apply_config_text(d, c.canonical());
  CHECK(d.canonical() == c.canonical());
  CHECK(RunConfig{}.canonical() != c.canonical());
}

TEST_CASE("errors carry their origin") {
  RunConfig c;
  try {
    apply_config_text(c, "[train]\nlr = 0.1\nbogus = 3\n", "my.conf");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("my.conf:3") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_text(c, "[train\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "[train]\nlr\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "[train]\nlr = fast\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "[train]\nbatch = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "[train]\nexclude_observed = maybe\n"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.lr"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "nope.key=1"), ConfigError);
}

TEST_CASE("validation rejects bad values") {
  const std::vector<std::string> bad{"train.lr=0",         "train.decay=1",      "eval.gammas=1.5",
                                     "eval.models=magic",  "run.threads=0",      "data.source=csv",
                                     "synth.clusters=600", "embed.dim=0",        "holdout.fraction=1",
                                     "eval.n_negatives=0", "model.depth=0",      "weighted_sum.sigma0=0"};
  for (const auto& o : bad) {
    INFO(o);
    CHECK_THROWS_AS(load_run_config("", {o}), ConfigError);
  }
  CHECK_THROWS_AS(load_run_config("", {"data.source=log"}), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/attnrec.conf", {}), ConfigError);
}

TEST_CASE("file then overrides") {
  const auto path = (std::filesystem::temp_directory_path() / "attnrec_cfg.conf").string();
  {
    std::ofstream out(path);
    out << "[train]\nlr = 0.5\nbatch = 8\n";
  }
  const auto c = load_run_config(path, {"train.lr=0.25"});
  CHECK(c.train.learning_rate == 0.25);
  CHECK(c.train.batch_size == 8);
  std::filesystem::remove(path);
}
