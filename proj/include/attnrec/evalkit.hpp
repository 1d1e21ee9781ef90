#pragma once

// Sampled-candidate ranking evaluation: per-user pools of test items plus
// negatives drawn from P_gamma, binary-relevance NDCG and Recall@K, paired
// bootstrap tests, and JSON/CSV report emission.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "attnrec/corpus.hpp"
#include "attnrec/sampler.hpp"

namespace attnrec {

// A user as seen by the scorers: training events and the items to recover.
struct EvalUser {
  std::string user_id;
  std::vector<Event> history;  // training-period events, time ordered
  std::vector<int> observed;   // distinct history items
  std::vector<int> test_items;
  std::int64_t now = 0;        // first instant after the history
  std::unordered_set<int> touched;  // train and test items, never negatives
};

std::vector<EvalUser> make_eval_users(const TrainTestSplit& split, std::int64_t boundary);

struct CandidatePool {
  std::size_t user = 0;  // index into the EvalUser list
  std::vector<int> positives;
  std::vector<int> negatives;
  double gamma = 0.0;
  std::uint64_t seed = 0;

  std::vector<int> candidates() const;
  CandidatePool truncated(std::size_t n_negatives) const;
};

struct PoolSet {
  std::vector<CandidatePool> pools;
  std::size_t skipped = 0;  // users whose exclusion set left too few items
};

/// Negatives per user come from sample_negatives with the user's full
/// interaction set excluded, using an RNG stream keyed by (seed, user index).
/// The first m negatives of a pool are distributed as an m-negative pool, so
/// truncated() yields nested pools of any smaller size.
PoolSet build_pools(std::span<const EvalUser> users, const AliasTable& table, std::size_t n_negatives,
                    std::uint64_t seed);

/// Binary-relevance NDCG with log2(p + 1) discounts (1-based p).
double ndcg(std::span<const int> ranked, const std::unordered_set<int>& relevant);

/// |top-K intersect relevant| / |relevant|.
double recall_at_k(std::span<const int> ranked, const std::unordered_set<int>& relevant, std::size_t k);

/// Candidates by descending score, ties by ascending item index.
std::vector<int> rank_by_scores(std::span<const int> candidates, std::span<const double> scores);

using Scorer = std::function<std::vector<double>(const EvalUser&, std::span<const int> candidates)>;

struct NamedScorer {
  std::string name;
  Scorer score;
};

/// Ranks `pool` with `scorer`.
std::vector<int> rank_candidates(const Scorer& scorer, const EvalUser& user, const CandidatePool& pool);

struct ModelMetrics {
  std::string model;
  std::vector<double> ndcg;                 // per user
  std::vector<std::vector<double>> recall;  // [k index][user]
  double mean_ndcg = 0.0;
  std::vector<double> mean_recall;          // per k
};

struct MetricsCell {
  double gamma = 0.0;
  std::size_t n_negatives = 0;
  std::vector<std::string> users;  // aligned with every per-user vector
  std::size_t skipped_users = 0;
  std::vector<ModelMetrics> models;

  const ModelMetrics& model(const std::string& name) const;
};

struct SignificanceResult {
  double gamma = 0.0;
  std::size_t n_negatives = 0;
  std::string metric;  // "ndcg"
  std::string model_a;
  std::string model_b;
  double mean_difference = 0.0;  // mean(a - b)
  double p_value = 1.0;
};

struct MetricsReport {
  std::vector<std::size_t> k_grid;
  std::uint64_t seed = 0;
  std::size_t n_resamples = 0;
  std::vector<MetricsCell> cells;
  std::vector<SignificanceResult> significance;

  const MetricsCell& cell(double gamma, std::size_t n_negatives) const;
};

/// Every model ranks the same pools; per-user vectors are aligned.
MetricsCell evaluate(std::span<const NamedScorer> models, std::span<const EvalUser> users,
                     std::span<const CandidatePool> pools, std::span<const std::size_t> k_grid, int threads = 1);

/// One cell per n_negatives value using nested prefixes of `pools` (which must
/// hold at least max(n_negatives_grid) negatives). Each model scores a user's
/// largest pool once.
std::vector<MetricsCell> evaluate_nested(std::span<const NamedScorer> models, std::span<const EvalUser> users,
                                         const PoolSet& pools, std::span<const std::size_t> n_negatives_grid,
                                         std::span<const std::size_t> k_grid, int threads = 1);

/// Two-sided paired bootstrap on the mean difference over users:
/// p = (1 + #{|mean* - mean| >= |mean|}) / (1 + n_resamples).
double paired_significance(std::span<const double> a, std::span<const double> b, std::size_t n_resamples,
                           std::uint64_t seed);

/// Writes report.json plus fig2_ndcg.csv (every cell), fig3_recall.csv (gamma = 1
/// cells, every K) and, when models named attention_k<N> are present,
/// fig4_depth.csv. CSV columns: model,gamma,n_negatives,metric,K,value.
/// Returns the written paths.
std::vector<std::string> emit_report(const MetricsReport& report, const std::string& dir);

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

}  // namespace attnrec
