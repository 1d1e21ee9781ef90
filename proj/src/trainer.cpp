#include "attnrec/trainer.hpp"

#include <algorithm>

namespace attnrec {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be > 0");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (!(decay > 0.0 && decay < 1.0)) throw ConfigError("train.decay must be in (0, 1)");
  if (max_reductions < 1) throw ConfigError("train.max_reductions must be >= 1");
  if (eval_period < 0) throw ConfigError("train.eval_period must be >= 0");
  if (!(min_improvement >= 0.0)) throw ConfigError("train.min_improvement must be >= 0");
  if (max_updates < 0) throw ConfigError("train.max_updates must be >= 0");
  if (n_future < 1) throw ConfigError("train.n_future must be >= 1");
  if (n_negatives < 1) throw ConfigError("train.n_negatives must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("train.gamma must be in [0, 1]");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

long TrainConfig::resolved_eval_period(std::size_t n_train) const {
  if (eval_period > 0) return eval_period;
  return std::max<long>(50, static_cast<long>(n_train) / batch_size / 10);
}

PlateauSchedule::PlateauSchedule(double initial_lr, int patience, double decay, int max_reductions,
                                 double min_improvement)
    : initial_lr_(initial_lr),
      lr_(initial_lr),
      patience_(patience),
      decay_(decay),
      max_reductions_(max_reductions),
      min_improvement_(min_improvement) {}

PlateauSchedule::Outcome PlateauSchedule::observe(double objective) {
  Outcome out;
  if (objective < best_ - min_improvement_) {
    best_ = objective;
    stale_ = 0;
    out.improved = true;
    return out;
  }
  if (++stale_ >= patience_) {
    stale_ = 0;
    ++reductions_;
    lr_ = initial_lr_ * std::pow(decay_, reductions_);
    out.reduced = true;
    out.stop = reductions_ >= max_reductions_;
  }
  return out;
}

std::pair<std::vector<SplitInstance>, std::vector<SplitInstance>> split_holdout(std::vector<SplitInstance> instances,
                                                                                double fraction, std::size_t cap,
                                                                                std::uint64_t seed) {
  if (instances.size() < 2) throw ConfigError("need at least two instances to carve out a holdout set");
  std::size_t n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(instances.size())));
  n = std::clamp<std::size_t>(n, 1, std::min(cap, instances.size() - 1));
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::stream(seed, 0x401d);
  rng.shuffle(order.begin(), order.end());
  std::vector<char> is_holdout(instances.size(), 0);
  for (std::size_t i = 0; i < n; ++i) is_holdout[order[i]] = 1;
  std::vector<SplitInstance> train;
  std::vector<SplitInstance> held;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    (is_holdout[i] ? held : train).push_back(std::move(instances[i]));
  }
  return {std::move(train), std::move(held)};
}

std::vector<int> draw_training_negatives(const AliasTable& noise, const SplitInstance& inst, int k,
                                         bool exclude_observed, Rng& rng) {
  std::unordered_set<int> exclude(inst.future.begin(), inst.future.end());
  if (exclude_observed) exclude.insert(inst.observed.begin(), inst.observed.end());
  return sample_negatives(noise, static_cast<std::size_t>(k), exclude, rng);
}

}  // namespace attnrec
