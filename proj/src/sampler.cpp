#include "attnrec/sampler.hpp"

#include <cmath>
#include <string>

#include "attnrec/errors.hpp"

namespace attnrec {

std::size_t SampledDistribution::support_size() const {
  std::size_t n = 0;
  for (double p : probs) n += p > 0.0 ? 1 : 0;
  return n;
}

SampledDistribution build_distribution(std::span<const double> counts, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
  if (counts.empty()) throw ConfigError("build_distribution: empty counts");
  SampledDistribution dist;
  dist.gamma = gamma;
  dist.probs.resize(counts.size());
  bool any_positive = false;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!(counts[i] >= 0.0) || !std::isfinite(counts[i])) throw ConfigError("build_distribution: bad count");
    any_positive = any_positive || counts[i] > 0.0;
    dist.probs[i] = gamma == 0.0 ? 1.0 : (gamma == 1.0 ? counts[i] : std::pow(counts[i], gamma));
  }
  if (!any_positive) throw ConfigError("build_distribution: all counts are zero");
  double total = 0.0;
  for (double w : dist.probs) total += w;
  for (double& p : dist.probs) p /= total;
  return dist;
}

SampledDistribution build_distribution(std::span<const std::int64_t> counts, double gamma) {
  std::vector<double> c(counts.begin(), counts.end());
  return build_distribution(c, gamma);
}

AliasTable::AliasTable(const SampledDistribution& dist) : source_(dist) {
  const std::size_t n = dist.probs.size();
  if (n == 0) throw ConfigError("alias table: empty distribution");
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::size_t> small;
  std::vector<std::size_t> large;
  small.reserve(n);
  large.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = dist.probs[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = static_cast<int>(l);
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (std::size_t i : large) {
    prob_[i] = 1.0;
    alias_[i] = static_cast<int>(i);
  }
  for (std::size_t i : small) {
    prob_[i] = 1.0;
    alias_[i] = static_cast<int>(i);
  }
}

std::vector<double> AliasTable::reconstruct() const {
  const std::size_t n = prob_.size();
  std::vector<double> mass(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    mass[j] += prob_[j];
    mass[static_cast<std::size_t>(alias_[j])] += 1.0 - prob_[j];
  }
  for (double& m : mass) m /= static_cast<double>(n);
  return mass;
}

std::vector<int> sample_negatives(const AliasTable& table, std::size_t k, const std::unordered_set<int>& exclude,
                                  Rng& rng) {
  const auto& probs = table.source().probs;
  std::size_t feasible = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0 && !exclude.contains(static_cast<int>(i))) ++feasible;
  }
  if (k > feasible) {
    throw ConfigError("sample_negatives: requested " + std::to_string(k) + " but only " + std::to_string(feasible) +
                      " items are eligible");
  }
  std::vector<int> out;
  out.reserve(k);
  std::unordered_set<int> taken;
  const std::size_t cap = kRejectionCapPerItem * k;
  for (std::size_t attempt = 0; out.size() < k; ++attempt) {
    if (attempt >= cap) throw ConfigError("sample_negatives: rejection cap reached");
    const int i = table.sample(rng);
    if (probs[static_cast<std::size_t>(i)] <= 0.0 || exclude.contains(i) || !taken.insert(i).second) continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace attnrec
