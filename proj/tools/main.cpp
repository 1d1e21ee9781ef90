// attnrec: command-line driver for the recommendation pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "attnrec/cma_es.hpp"
#include "attnrec/errors.hpp"
#include "attnrec/gradcheck.hpp"
#include "attnrec/pipeline.hpp"

using namespace attnrec;

namespace {

int sphere_self_test() {
  VectorXr target(5);
  target << 1.0, -2.0, 0.5, 3.0, -1.5;
  CmaEsConfig cfg;
  cfg.iterations = 200;
  cfg.seed = 7;
  const auto r = cma_es_optimize([&](const VectorXr& x) { return (x - target).squaredNorm(); }, VectorXr::Zero(5), cfg);
  const double dist = (r.best - target).norm();
  std::printf("sphere self-test: |best - x*| = %.3e (%s)\n", dist, dist < 1e-3 ? "ok" : "FAILED");
  return dist < 1e-3 ? 0 : 3;
}

int grad_check(std::uint64_t seed) {
  GradCheckOptions o;
  o.seed = seed;
  bool ok = true;
  for (const auto& c : run_grad_checks(o)) {
    std::printf("%-14s instances=%zu coords=%zu max_rel_error=%.3e %s\n", c.name.c_str(), c.instances,
                c.report.coords_checked, c.report.max_rel_error, c.report.passed() ? "ok" : "FAILED");
    ok = ok && c.report.passed();
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-based collaborative filtering pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration file");
    sub->add_option("--set", overrides, "Override as section.key=value (repeatable)");
    sub->add_flag("-q,--quiet", quiet, "Do not echo log events to stderr");
  };

  auto* synth = app.add_subcommand("synth", "Generate a planted-cluster interaction log");
  auto* ingest = app.add_subcommand("ingest", "Filter a log and build the vocabulary");
  auto* embed = app.add_subcommand("embed", "Train skip-gram item embeddings");
  auto* train = app.add_subcommand("train", "Train the attention model or the DAN baseline");
  std::string model = "attn";
  train->add_option("-m,--model", model, "attn or dan")->check(CLI::IsMember({"attn", "dan"}));
  auto* tune = app.add_subcommand("tune-ws", "Tune the weighted-sum baseline with CMA-ES");
  bool sphere = false;
  tune->add_flag("--self-test", sphere, "Only run the CMA-ES sphere-function check");
  auto* evaluate = app.add_subcommand("evaluate", "Rank candidate pools and emit the report");
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
  auto* grad = app.add_subcommand("grad-check", "Finite-difference checks of the model gradients");
  std::uint64_t grad_seed = 1;
  grad->add_option("--seed", grad_seed, "Random seed");
  auto* keys = app.add_subcommand("config-keys", "List every configuration key with its default");
  for (auto* sub : {synth, ingest, embed, train, tune, evaluate, pipeline}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (grad->parsed()) return grad_check(grad_seed);
    if (keys->parsed()) {
      std::cout << RunConfig{}.canonical();
      return 0;
    }
    if (tune->parsed() && sphere) return sphere_self_test();

    const RunConfig config = load_run_config(config_path, overrides);
    std::filesystem::create_directories(config.run.out_dir);
    EventLog log((std::filesystem::path(config.run.out_dir) / "log.jsonl").string(), !quiet);
    Pipeline p(config, &log);
    if (synth->parsed()) p.stage("synth", [&] { p.synth(); });
    if (ingest->parsed()) p.stage("ingest", [&] { p.ingest(); });
    if (embed->parsed()) p.stage("embed", [&] { p.embed(); });
    if (train->parsed()) {
      p.stage("train", [&] { p.train(model == "attn" ? ModelKind::attention : ModelKind::dan); });
    }
    if (tune->parsed()) p.stage("tune-ws", [&] { p.tune_weighted_sum(); });
    if (evaluate->parsed()) p.stage("evaluate", [&] { p.evaluate(); });
    if (pipeline->parsed()) p.stage("pipeline", [&] { p.run_all(); });
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
}
