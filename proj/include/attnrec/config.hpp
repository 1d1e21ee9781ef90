#pragma once

// Run configuration: sectioned key=value text, `--set section.key=value`
// overrides, full validation before any work starts.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "attnrec/attention.hpp"
#include "attnrec/cma_es.hpp"
#include "attnrec/corpus.hpp"
#include "attnrec/dan.hpp"
#include "attnrec/embed.hpp"
#include "attnrec/trainer.hpp"

namespace attnrec {

struct RunSection {
  std::string out_dir = "run";
  int threads = 1;
};

struct DataSection {
  std::string source = "synth";  // synth | log
  std::string log_path;          // raw log when source = log
  int min_user_events = kDefaultMinUserEvents;
  int min_item_count = kDefaultMinItemCount;
  std::int64_t boundary = 0;     // 0: chosen from test_fraction
  double test_fraction = 0.2;    // share of events at or after an automatic boundary
};

struct ModelSection {
  AttentionShape attention;
  std::vector<int> depth_ablation;  // extra attention depths, reported as attention_k<N>
  DanShape dan;
  std::size_t max_history = 200;
};

struct HoldoutSection {
  double fraction = 0.05;
  std::size_t cap = 2000;
};

struct WeightedSumSection {
  int iterations = 30;
  int population = 0;
  double sigma0 = 1.0;
  int n_negatives = 100;
  double gamma = 0.75;
  std::uint64_t seed = 1;
};

struct EvalSection {
  std::vector<double> gammas{0.0, 0.75, 1.0};
  std::vector<std::size_t> n_negatives{100, 500, 1000};
  std::vector<std::size_t> k_grid{1, 5, 10, 20, 50};
  std::vector<std::string> models{"popularity", "last_item", "weighted_sum", "dan", "attention"};
  std::size_t bootstrap = 10000;
  std::uint64_t seed = 1;
};

struct RunConfig {
  RunSection run;
  DataSection data;
  SynthConfig synth;
  SkipGramConfig embed;
  ModelSection model;
  TrainConfig train;
  HoldoutSection holdout;
  WeightedSumSection weighted_sum;
  EvalSection eval;

  /// Throws ConfigError naming the first offending key.
  void validate() const;
  /// Every key as section.key=value, one per line, in a fixed order.
  std::string canonical() const;
};

/// Applies "[section]" / "key = value" text on top of `config`.
void apply_config_text(RunConfig& config, std::string_view text, const std::string& origin = "config");
/// Applies one "section.key=value" override.
void apply_override(RunConfig& config, std::string_view assignment);

/// Defaults, then the file (if non-empty), then overrides; validated.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

std::vector<std::string> config_keys();

}  // namespace attnrec
