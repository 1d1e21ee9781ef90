#pragma once

// Non-neural comparison rankers: popularity, last-item cosine, and the
// recency/action weighted average of history embeddings.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attnrec/corpus.hpp"
#include "attnrec/embed.hpp"
#include "attnrec/numkit.hpp"

namespace attnrec {

/// Candidates by descending count, ties by ascending item index.
std::vector<int> popularity_rank(std::span<const std::int64_t> counts, std::span<const int> candidates);

template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ConfigError("cosine: zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

/// Cosine between the query and the most recent history event's item.
double last_item_score(const EmbeddingTable& table, std::span<const Event> history, int query);

// omega_e = type_weight[action] * exp(-decay * (now - t_e)), decay per second.
struct WeightedSumParams {
  double decay = 0.0;
  std::array<double, kNumActions> type_weight{1.0, 1.0, 1.0, 1.0};

  void validate() const;
  bool operator==(const WeightedSumParams&) const = default;
};

/// sum_e omega_e x_e / sum_e omega_e over events in canonical
/// (timestamp, item, action) order. The factor exp(-decay (now - t_max))
/// cancels in the ratio, so weights are taken relative to the latest event;
/// large decays then cannot underflow to an all-zero sum and `now` only has
/// to be no earlier than the history.
VectorXr weighted_user_vector(const EmbeddingTable& table, std::span<const Event> history,
                              const WeightedSumParams& params, std::int64_t now);

double weighted_sum_score(const EmbeddingTable& table, std::span<const Event> history,
                          const WeightedSumParams& params, std::int64_t now, int query);

/// key=value text: decay, weight.purchase, weight.view, weight.stream_video,
/// weight.stream_music.
void save_weighted_sum(const WeightedSumParams& params, const std::string& path);
WeightedSumParams load_weighted_sum(const std::string& path);
std::string format_weighted_sum(const WeightedSumParams& params);
WeightedSumParams parse_weighted_sum(std::string_view text);

}  // namespace attnrec
