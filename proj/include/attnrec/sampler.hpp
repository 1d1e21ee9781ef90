#pragma once

// Smoothed item distribution P_gamma(i) = c_i^gamma / sum_j c_j^gamma and
// constant-time categorical draws through Walker's alias method.

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "attnrec/rng.hpp"

namespace attnrec {

struct SampledDistribution {
  double gamma = 1.0;
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  std::size_t support_size() const;
};

/// counts[i]^gamma normalized. 0^0 is taken as 1, so gamma = 0 is uniform over
/// every entry including zero-count ones. Throws ConfigError for all-zero or
/// negative counts or gamma outside [0, 1].
SampledDistribution build_distribution(std::span<const double> counts, double gamma);
SampledDistribution build_distribution(std::span<const std::int64_t> counts, double gamma);

class AliasTable {
 public:
  AliasTable() = default;
  /// Two-worklist construction, O(n).
  explicit AliasTable(const SampledDistribution& dist);

  /// One uniform index and one uniform real per draw.
  int sample(Rng& rng) const {
    const auto i = static_cast<std::size_t>(rng.index(prob_.size()));
    return rng.uniform() < prob_[i] ? static_cast<int>(i) : alias_[i];
  }

  std::size_t size() const { return prob_.size(); }
  const std::vector<double>& prob() const { return prob_; }
  const std::vector<int>& alias() const { return alias_; }
  const SampledDistribution& source() const { return source_; }

  /// Probability mass the table assigns to each index, rebuilt from (prob, alias).
  std::vector<double> reconstruct() const;

 private:
  std::vector<double> prob_;
  std::vector<int> alias_;
  SampledDistribution source_;
};

inline AliasTable build_alias(const SampledDistribution& dist) { return AliasTable(dist); }

inline constexpr std::size_t kRejectionCapPerItem = 1000;

/// k distinct indices drawn from the table, none in `exclude`, by rejection.
/// Throws ConfigError when k exceeds the feasible support, or when 1000 * k
/// attempts do not produce k items.
std::vector<int> sample_negatives(const AliasTable& table, std::size_t k, const std::unordered_set<int>& exclude,
                                  Rng& rng);

}  // namespace attnrec
