#pragma once

// K-layer attention over a user's observed items, conditioned on a query item:
//
//   z0  = B_h x_q + c_h
//   p^k = softmax_i((B_fk x_i + c_fk) . z^{k-1})
//   z^k = z^{k-1} + sum_i p^k_i (B_gk x_i + c_gk)
//   r   = sigmoid(w . z^K)
//
// All queries of one user are pushed through together: states are Q x d'
// matrices and attention weights Q x n, so forward and backward are GEMMs.
// History transforms are computed once per user and shared by every query.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attnrec/corpus.hpp"
#include "attnrec/embed.hpp"
#include "attnrec/numkit.hpp"
#include "attnrec/param_layout.hpp"

namespace attnrec {

struct AttentionShape {
  int dim = 64;      // d, embedding size
  int hidden = 128;  // d'
  int depth = 10;    // K

  bool operator==(const AttentionShape&) const = default;
};

ParamLayout attention_layout(const AttentionShape& shape);

// Parameters as one flat vector, blocks in declaration order
// B_h, c_h, (B_fk, c_fk, B_gk, c_gk) for k = 1..K, w. Nothing is shared
// between layers.
template <typename Scalar = double>
class AttentionParams {
 public:
  AttentionParams() = default;
  explicit AttentionParams(const AttentionShape& shape)
      : shape_(shape), layout_(attention_layout(shape)), values(Vector<Scalar>::Zero(layout_.size())) {}

  const AttentionShape& shape() const { return shape_; }
  const ParamLayout& layout() const { return layout_; }

  auto B_h() const { return layout_.map(0, values); }
  auto c_h() const { return layout_.map(1, values); }
  auto B_f(int k) const { return layout_.map(layer_block(k, 0), values); }
  auto c_f(int k) const { return layout_.map(layer_block(k, 1), values); }
  auto B_g(int k) const { return layout_.map(layer_block(k, 2), values); }
  auto c_g(int k) const { return layout_.map(layer_block(k, 3), values); }
  auto w() const { return layout_.map(layout_.blocks().size() - 1, values); }

  auto B_h() { return layout_.map(0, values); }
  auto c_h() { return layout_.map(1, values); }
  auto B_f(int k) { return layout_.map(layer_block(k, 0), values); }
  auto c_f(int k) { return layout_.map(layer_block(k, 1), values); }
  auto B_g(int k) { return layout_.map(layer_block(k, 2), values); }
  auto c_g(int k) { return layout_.map(layer_block(k, 3), values); }
  auto w() { return layout_.map(layout_.blocks().size() - 1, values); }

  template <typename Other>
  AttentionParams<Other> cast() const {
    AttentionParams<Other> out(shape_);
    out.values = values.template cast<Other>();
    return out;
  }

  // k is 1-based to match layer numbering.
  static std::size_t layer_block(int k, int which) { return 2 + 4 * static_cast<std::size_t>(k - 1) + which; }

 private:
  AttentionShape shape_{};
  ParamLayout layout_;

 public:
  Vector<Scalar> values;
};

/// Orthogonal weight matrices, zero biases and zero w.
AttentionParams<double> init_attention(const AttentionShape& shape, Rng& rng);

/// Sorted distinct items. Sorting fixes the summation order, which makes every
/// score exactly invariant to the order of the input history.
std::vector<int> canonical_history(std::span<const int> history);

template <typename Scalar>
Matrix<Scalar> gather_rows(const EmbeddingTable& table, std::span<const int> items) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(items.size()), table.dim());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const int item = items[i];
    if (item < 0 || static_cast<std::size_t>(item) >= table.size()) throw ConfigError("item index out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.target.row(item).template cast<Scalar>();
  }
  return out;
}

// Per-user transforms f^k(x_i), g^k(x_i), rows = history items.
template <typename Scalar>
struct HistoryCache {
  std::vector<int> items;
  Matrix<Scalar> x;               // n x d
  std::vector<Matrix<Scalar>> f;  // K of n x d'
  std::vector<Matrix<Scalar>> g;
};

template <typename Scalar>
HistoryCache<Scalar> prepare_history(const AttentionParams<Scalar>& params, std::span<const int> history,
                                     const EmbeddingTable& table) {
  if (table.dim() != params.shape().dim) throw ConfigError("embedding dimension does not match model");
  HistoryCache<Scalar> cache;
  cache.items = canonical_history(history);
  if (cache.items.empty()) throw ConfigError("attention: empty history");
  cache.x = gather_rows<Scalar>(table, cache.items);
  const int K = params.shape().depth;
  cache.f.resize(static_cast<std::size_t>(K));
  cache.g.resize(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    auto& f = cache.f[static_cast<std::size_t>(k - 1)];
    auto& g = cache.g[static_cast<std::size_t>(k - 1)];
    f.noalias() = cache.x * params.B_f(k).transpose();
    f.rowwise() += params.c_f(k).col(0).transpose();
    g.noalias() = cache.x * params.B_g(k).transpose();
    g.rowwise() += params.c_g(k).col(0).transpose();
  }
  return cache;
}

// Forward record for Q queries against one history.
template <typename Scalar>
struct ForwardTrace {
  std::vector<int> history;       // canonical order, columns of p
  Matrix<Scalar> queries;         // Q x d
  std::vector<Matrix<Scalar>> z;  // K + 1 of Q x d'
  std::vector<Matrix<Scalar>> p;  // K of Q x n
  Vector<Scalar> logits;          // w . z^K
  Vector<Scalar> scores;          // sigmoid(logits)
};

template <typename Scalar>
ForwardTrace<Scalar> forward_cached(const AttentionParams<Scalar>& params, const HistoryCache<Scalar>& cache,
                                    Matrix<Scalar> queries) {
  const int K = params.shape().depth;
  ForwardTrace<Scalar> tr;
  tr.history = cache.items;
  tr.queries = std::move(queries);
  tr.z.resize(static_cast<std::size_t>(K) + 1);
  tr.p.resize(static_cast<std::size_t>(K));
  tr.z[0].noalias() = tr.queries * params.B_h().transpose();
  tr.z[0].rowwise() += params.c_h().col(0).transpose();
  for (int k = 1; k <= K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    Matrix<Scalar> s;
    s.noalias() = tr.z[kk - 1] * cache.f[kk - 1].transpose();
    // Row-wise max-subtracted softmax.
    for (Eigen::Index q = 0; q < s.rows(); ++q) {
      auto row = s.row(q);
      row.array() = (row.array() - row.maxCoeff()).exp();
      row /= row.sum();
    }
    tr.p[kk - 1] = std::move(s);
    tr.z[kk] = tr.z[kk - 1];
    tr.z[kk].noalias() += tr.p[kk - 1] * cache.g[kk - 1];
  }
  tr.logits.noalias() = tr.z[static_cast<std::size_t>(K)] * params.w().col(0);
  tr.scores = tr.logits.unaryExpr([](Scalar a) { return logistic(a); });
  return tr;
}

/// Single-query forward; p[k] and z[k] are 1-row matrices.
template <typename Scalar>
ForwardTrace<Scalar> forward(const AttentionParams<Scalar>& params, std::span<const int> history, int query,
                             const EmbeddingTable& table) {
  const auto cache = prepare_history(params, history, table);
  const int q[1] = {query};
  return forward_cached(params, cache, gather_rows<Scalar>(table, q));
}

/// Accumulates d loss / d params into `grad` (same layout as params) given
/// d loss / d logit per query. Embeddings receive nothing.
template <typename Scalar>
void backward_logits(const AttentionParams<Scalar>& params, const ForwardTrace<Scalar>& tr,
                     const HistoryCache<Scalar>& cache, const Vector<Scalar>& dlogits, Vector<Scalar>& grad) {
  const int K = params.shape().depth;
  const ParamLayout& layout = params.layout();
  if (grad.size() != layout.size()) grad = Vector<Scalar>::Zero(layout.size());

  layout.map(layout.blocks().size() - 1, grad).col(0).noalias() += tr.z[static_cast<std::size_t>(K)].transpose() * dlogits;
  Matrix<Scalar> dz = dlogits * params.w().col(0).transpose();  // Q x d'
  for (int k = K; k >= 1; --k) {
    const auto kk = static_cast<std::size_t>(k);
    const Matrix<Scalar>& p = tr.p[kk - 1];
    // z^k = z^{k-1} + p G
    Matrix<Scalar> dg = p.transpose() * dz;  // n x d'
    Matrix<Scalar> dp = dz * cache.g[kk - 1].transpose();  // Q x n
    const Vector<Scalar> inner = (p.array() * dp.array()).rowwise().sum();
    Matrix<Scalar> ds = (p.array() * (dp.colwise() - inner).array()).matrix();
    Matrix<Scalar> df = ds.transpose() * tr.z[kk - 1];  // n x d'
    dz.noalias() += ds * cache.f[kk - 1];

    layout.map(AttentionParams<Scalar>::layer_block(k, 0), grad).noalias() += df.transpose() * cache.x;
    layout.map(AttentionParams<Scalar>::layer_block(k, 1), grad).col(0) += df.colwise().sum().transpose();
    layout.map(AttentionParams<Scalar>::layer_block(k, 2), grad).noalias() += dg.transpose() * cache.x;
    layout.map(AttentionParams<Scalar>::layer_block(k, 3), grad).col(0) += dg.colwise().sum().transpose();
  }
  layout.map(0, grad).noalias() += dz.transpose() * tr.queries;
  layout.map(1, grad).col(0) += dz.colwise().sum().transpose();
}

/// Gradient given d loss / d score per query.
template <typename Scalar>
Vector<Scalar> backward(const AttentionParams<Scalar>& params, const ForwardTrace<Scalar>& tr,
                        const HistoryCache<Scalar>& cache, const Vector<Scalar>& upstream) {
  Vector<Scalar> grad = Vector<Scalar>::Zero(params.layout().size());
  const Vector<Scalar> dlogits = (upstream.array() * tr.scores.array() * (Scalar(1) - tr.scores.array())).matrix();
  backward_logits(params, tr, cache, dlogits, grad);
  return grad;
}

/// Balanced loss of one training instance,
///   -(1/2|F|) sum_F log r(q, O) - (1/2|N|) sum_N log(1 - r(q, O)),
/// computed from logits. Adds its gradient to *grad when given.
template <typename Scalar>
Scalar attention_instance_loss(const AttentionParams<Scalar>& params, const SplitInstance& inst,
                               std::span<const int> negatives, const EmbeddingTable& table,
                               Vector<Scalar>* grad = nullptr) {
  if (inst.future.empty() || negatives.empty()) throw ConfigError("instance_loss: empty future or negative set");
  for (int n : negatives) {
    if (std::find(inst.future.begin(), inst.future.end(), n) != inst.future.end()) {
      throw ConfigError("instance_loss: negative item " + std::to_string(n) + " is also a future item");
    }
  }
  const auto cache = prepare_history(params, inst.observed, table);
  std::vector<int> queries(inst.future.begin(), inst.future.end());
  queries.insert(queries.end(), negatives.begin(), negatives.end());
  const auto tr = forward_cached(params, cache, gather_rows<Scalar>(table, queries));

  const auto nf = static_cast<Eigen::Index>(inst.future.size());
  const auto nn = static_cast<Eigen::Index>(negatives.size());
  const Scalar wf = Scalar(1) / (Scalar(2) * Scalar(nf));
  const Scalar wn = Scalar(1) / (Scalar(2) * Scalar(nn));
  Scalar loss = 0;
  Vector<Scalar> dlogits(nf + nn);
  for (Eigen::Index q = 0; q < nf + nn; ++q) {
    const Scalar a = tr.logits(q);
    if (q < nf) {
      loss += wf * softplus(-a);
      dlogits(q) = -wf * logistic(-a);
    } else {
      loss += wn * softplus(a);
      dlogits(q) = wn * logistic(a);
    }
  }
  if (grad) backward_logits(params, tr, cache, dlogits, *grad);
  return loss;
}

/// Scores of every candidate against one history; equal to per-candidate
/// forward() results.
template <typename Scalar>
Vector<Scalar> score_batch(const AttentionParams<Scalar>& params, std::span<const int> history,
                           std::span<const int> candidates, const EmbeddingTable& table) {
  if (candidates.empty()) return Vector<Scalar>(0);
  const auto cache = prepare_history(params, history, table);
  return forward_cached(params, cache, gather_rows<Scalar>(table, candidates)).scores;
}

/// Binary checkpoint: "ATNCF1", d, d', K as little-endian uint32, then the
/// flat parameters as little-endian float64.
void save_attention(const AttentionParams<double>& params, const std::string& path);
AttentionParams<double> load_attention(const std::string& path, int expected_dim);

}  // namespace attnrec
