#pragma once

// Minibatch training shared by the attention model and the DAN baseline:
// Adam, global-norm clipping, holdout assessment every `eval_period` updates,
// learning-rate decay on plateaus and termination after a fixed number of
// decays. Returns the parameters with the best holdout objective.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "attnrec/attention.hpp"
#include "attnrec/corpus.hpp"
#include "attnrec/dan.hpp"
#include "attnrec/embed.hpp"
#include "attnrec/numkit.hpp"
#include "attnrec/parallel.hpp"
#include "attnrec/sampler.hpp"

namespace attnrec {

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double clip_norm = 10.0;
  int patience = 5;          // non-improving assessments before a decay
  double decay = 0.8;
  int max_reductions = 20;   // stop once this many decays happened
  long eval_period = 0;      // 0: max(50, n_train / batch / 10)
  double min_improvement = 0.0;  // holdout must drop by more than this to count
  long max_updates = 0;      // 0: no cap
  int n_future = 10;
  int n_negatives = 100;
  double gamma = 0.75;
  bool exclude_observed = false;   // also keep O_u out of the negatives
  bool resample_negatives = true;  // per minibatch; false draws once per instance
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
  long resolved_eval_period(std::size_t n_train) const;
};

// Tracks the holdout objective and decides when to decay and when to stop.
// The learning rate after j decays is initial * decay^j.
class PlateauSchedule {
 public:
  PlateauSchedule(double initial_lr, int patience, double decay, int max_reductions, double min_improvement = 0.0);

  struct Outcome {
    bool improved = false;
    bool reduced = false;
    bool stop = false;
  };

  Outcome observe(double objective);

  double lr() const { return lr_; }
  int reductions() const { return reductions_; }
  double best() const { return best_; }

 private:
  double initial_lr_;
  double lr_;
  int patience_;
  double decay_;
  int max_reductions_;
  double min_improvement_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
  int reductions_ = 0;
};

struct TrainLogEntry {
  long update = 0;
  double holdout_loss = 0.0;
  double train_loss = 0.0;  // mean over minibatches since the previous assessment
  double lr = 0.0;          // rate in effect after this assessment
  bool improved = false;
  bool reduced = false;
};

template <typename Params>
struct TrainResult {
  Params params;
  std::vector<TrainLogEntry> log;
  double initial_holdout = 0.0;
  double best_holdout = 0.0;
  long updates = 0;
  int reductions = 0;
};

// Adapters binding a model to the trainer.
struct AttentionModel {
  AttentionShape shape;
  using Params = AttentionParams<double>;
  Params init(Rng& rng) const { return init_attention(shape, rng); }
  double loss(const Params& p, const SplitInstance& inst, std::span<const int> negs, const EmbeddingTable& table,
              VectorXr* grad) const {
    return attention_instance_loss(p, inst, negs, table, grad);
  }
};

struct DanModel {
  DanShape shape;
  using Params = DanParams<double>;
  Params init(Rng& rng) const { return init_dan(shape, rng); }
  double loss(const Params& p, const SplitInstance& inst, std::span<const int> negs, const EmbeddingTable& table,
              VectorXr* grad) const {
    return dan_instance_loss(p, inst, negs, table, grad);
  }
};

/// Deterministic holdout selection: `fraction` of instances (at least one,
/// at most `cap`) chosen by a seeded shuffle. Returns (train, holdout).
std::pair<std::vector<SplitInstance>, std::vector<SplitInstance>> split_holdout(std::vector<SplitInstance> instances,
                                                                                double fraction, std::size_t cap,
                                                                                std::uint64_t seed);

std::vector<int> draw_training_negatives(const AliasTable& noise, const SplitInstance& inst, int k,
                                         bool exclude_observed, Rng& rng);

template <typename Model>
double mean_instance_loss(const Model& model, const typename Model::Params& params,
                          std::span<const SplitInstance> instances, std::span<const std::vector<int>> negatives,
                          const EmbeddingTable& table, int threads) {
  std::vector<double> losses(instances.size());
  parallel_for(instances.size(), threads, [&](std::size_t i) {
    losses[i] = model.loss(params, instances[i], negatives[i], table, nullptr);
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(instances.size());
}

template <typename Model>
TrainResult<typename Model::Params> train_model(const Model& model, std::span<const SplitInstance> train,
                                                std::span<const SplitInstance> holdout, const EmbeddingTable& table,
                                                const AliasTable& noise, const TrainConfig& cfg) {
  using Params = typename Model::Params;
  cfg.validate();
  if (train.empty() || holdout.empty()) throw ConfigError("train: need at least one training and one holdout instance");

  Rng init_rng = Rng::stream(cfg.seed, 1);
  Rng holdout_rng = Rng::stream(cfg.seed, 2);
  Rng rng = Rng::stream(cfg.seed, 3);

  Params params = model.init(init_rng);
  const Eigen::Index n_params = params.values.size();

  std::vector<std::vector<int>> holdout_negs;
  holdout_negs.reserve(holdout.size());
  for (const auto& inst : holdout) {
    holdout_negs.push_back(draw_training_negatives(noise, inst, cfg.n_negatives, cfg.exclude_observed, holdout_rng));
  }
  std::vector<std::vector<int>> fixed_negs;
  if (!cfg.resample_negatives) {
    fixed_negs.reserve(train.size());
    for (const auto& inst : train) {
      fixed_negs.push_back(draw_training_negatives(noise, inst, cfg.n_negatives, cfg.exclude_observed, rng));
    }
  }

  const long eval_period = cfg.resolved_eval_period(train.size());
  PlateauSchedule schedule(cfg.learning_rate, cfg.patience, cfg.decay, cfg.max_reductions, cfg.min_improvement);
  AdamState<double> adam(n_params, cfg.learning_rate);
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;

  TrainResult<Params> result;
  result.params = params;

  auto assess = [&](long update, double train_loss) {
    const double h = mean_instance_loss(model, params, holdout, holdout_negs, table, cfg.threads);
    if (!std::isfinite(h)) {
      throw NumericError("holdout loss is not finite at update " + std::to_string(update));
    }
    const auto outcome = schedule.observe(h);
    if (outcome.improved) result.params = params;
    result.log.push_back(TrainLogEntry{update, h, train_loss, schedule.lr(), outcome.improved, outcome.reduced});
    adam.lr = schedule.lr();
    return outcome.stop;
  };

  result.initial_holdout = mean_instance_loss(model, params, holdout, holdout_negs, table, cfg.threads);
  schedule.observe(result.initial_holdout);
  result.params = params;
  result.log.push_back(TrainLogEntry{0, result.initial_holdout, 0.0, schedule.lr(), true, false});

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<VectorXr> grads(batch, VectorXr::Zero(n_params));
  std::vector<double> losses(batch);
  std::vector<std::vector<int>> batch_negs(batch);
  VectorXr total(n_params);

  long update = 0;
  double window_loss = 0.0;
  long window_batches = 0;
  bool stop = false;
  while (!stop) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size() && !stop; start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t idx = order[start + b];
        batch_negs[b] = cfg.resample_negatives ? draw_training_negatives(noise, train[idx], cfg.n_negatives,
                                                                         cfg.exclude_observed, rng)
                                               : fixed_negs[idx];
      }
      parallel_for(n, cfg.threads, [&](std::size_t b) {
        grads[b].setZero();
        losses[b] = model.loss(params, train[order[start + b]], batch_negs[b], table, &grads[b]);
      });
      total.setZero();
      double batch_loss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        total += grads[b];
        batch_loss += losses[b];
      }
      total /= static_cast<double>(n);
      batch_loss /= static_cast<double>(n);
      if (!std::isfinite(batch_loss) || !total.allFinite()) {
        throw NumericError("non-finite training loss at update " + std::to_string(update) + " (first instance user " +
                           train[order[start]].user_id + ")");
      }
      clip_global_norm(total, cfg.clip_norm);
      adam_step(adam, params.values, total);
      ++update;
      window_loss += batch_loss;
      ++window_batches;
      if (update % eval_period == 0) {
        stop = assess(update, window_loss / static_cast<double>(window_batches));
        window_loss = 0.0;
        window_batches = 0;
      }
      if (cfg.max_updates > 0 && update >= cfg.max_updates) stop = true;
    }
  }
  result.best_holdout = schedule.best();
  result.updates = update;
  result.reductions = schedule.reductions();
  return result;
}

}  // namespace attnrec
