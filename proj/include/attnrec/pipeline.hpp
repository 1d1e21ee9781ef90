#pragma once

// Stage orchestration over one output directory: synthetic data or log
// ingest, embeddings, model training, weighted-sum tuning and evaluation.
// Every stage writes a `.partial` marker while it runs and refreshes
// manifest.json when it finishes.

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "attnrec/baselines.hpp"
#include "attnrec/config.hpp"
#include "attnrec/evalkit.hpp"

namespace attnrec {

/// JSON-lines event log: {"ts","stage","event",...}.
class EventLog {
 public:
  EventLog() = default;
  EventLog(const std::string& path, bool echo);
  void emit(std::string_view stage, std::string_view event, nlohmann::json fields = nlohmann::json::object());

 private:
  std::unique_ptr<std::ofstream> file_;
  bool echo_ = false;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

enum class ModelKind { attention, dan };

struct Dataset {
  Corpus corpus;
  std::int64_t boundary = 0;
  TrainTestSplit split;
  std::vector<std::int64_t> user_counts;   // distinct training users per item
  std::vector<std::int64_t> event_counts;  // training-period interactions per item
};

/// Timestamp such that roughly `test_fraction` of events fall at or after it.
std::int64_t auto_boundary(const Corpus& corpus, double test_fraction);

class Pipeline {
 public:
  Pipeline(RunConfig config, EventLog* log);

  const RunConfig& config() const { return config_; }
  std::string path(std::string_view name) const;

  void synth();
  void ingest();
  void embed();
  void train(ModelKind kind);
  void tune_weighted_sum();
  MetricsReport evaluate();
  MetricsReport run_all();

  /// Runs `name` between a `.partial` marker and a manifest refresh.
  template <typename Fn>
  auto stage(std::string_view name, Fn&& fn) {
    begin(name);
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish(name);
    } else {
      auto out = fn();
      finish(name);
      return out;
    }
  }

  const Dataset& data();

 private:
  void begin(std::string_view name);
  void finish(std::string_view name);
  void log(std::string_view stage, std::string_view event, nlohmann::json fields = nlohmann::json::object());
  EmbeddingTable load_table();
  std::vector<SplitInstance> training_instances();
  void train_attention_depth(int depth, const std::string& name, const std::vector<SplitInstance>& train,
                             const std::vector<SplitInstance>& holdout, const EmbeddingTable& table);

  RunConfig config_;
  EventLog* log_;
  std::optional<Dataset> data_;
};

/// Writes manifest.json for `dir`: config hash, seeds and SHA-256 of every
/// artifact except the manifest, the event log and the partial marker.
void write_manifest(const RunConfig& config, const std::string& command);

std::vector<std::string> model_names(const RunConfig& config);

}  // namespace attnrec
