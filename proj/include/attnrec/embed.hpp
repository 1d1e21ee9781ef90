#pragma once

// Skip-gram with negative sampling over per-user item sequences.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attnrec/corpus.hpp"
#include "attnrec/numkit.hpp"

namespace attnrec {

// Row i of `target` is the item vector x_i consumed downstream; `context`
// holds the output vectors used only while training.
struct EmbeddingTable {
  std::vector<std::string> ids;
  MatrixXr target;
  MatrixXr context;

  Eigen::Index dim() const { return target.cols(); }
  std::size_t size() const { return ids.size(); }
  auto vec(int item) const { return target.row(item); }
};

struct SkipGramConfig {
  int dim = 64;
  int window = 5;
  int negatives = 5;
  double gamma = 0.75;
  double learning_rate = 0.025;
  int epochs = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// (center, context) pairs for every offset 0 < |j| <= window. Pairs whose two
/// indices are equal are dropped.
std::vector<std::pair<int, int>> extract_pairs(std::span<const int> sequence, int window);

/// -[log s(x_c . x~_o) + sum_n log(1 - s(x_c . x~_n))]
double sg_loss(const EmbeddingTable& table, int center, int context, std::span<const int> negatives);

struct SkipGramGradient {
  VectorXr center;                     // d loss / d x_center
  std::vector<int> context_items;      // distinct context-side items touched
  std::vector<VectorXr> context_grads;  // d loss / d x~ for each of them
};

SkipGramGradient sg_gradient(const EmbeddingTable& table, int center, int context, std::span<const int> negatives);

/// One SGD step with all partial derivatives taken at the current point.
/// Returns the loss before the update.
double sg_step(EmbeddingTable& table, int center, int context, std::span<const int> negatives, double lr);

/// Targets uniform in [-0.5/d, 0.5/d], contexts zero.
EmbeddingTable init_embeddings(std::vector<std::string> ids, int dim, Rng& rng);

/// Trains on the event streams of `histories` (duplicates kept). Noise items
/// come from P_gamma over `vocab` interaction counts. Single-threaded and
/// deterministic for a given seed.
EmbeddingTable train_embeddings(const Vocabulary& vocab, std::span<const UserHistory> histories,
                                const SkipGramConfig& config);

/// word2vec text format: "N d" header, then "item_id v1 ... vd" with 9
/// significant digits. Only target vectors are written.
void save_embeddings(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_embeddings(const std::string& path);
EmbeddingTable parse_embeddings(std::string_view text);

/// Rows reordered to vocabulary indices. Throws DataError for any vocabulary
/// item missing from the table.
EmbeddingTable align_embeddings(const EmbeddingTable& table, const Vocabulary& vocab);

}  // namespace attnrec
