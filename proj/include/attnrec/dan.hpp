#pragma once

// Deep averaging network baseline, inner-product form:
//   r(q, A_u) = sigmoid(mu(mean_i x_i) . x_q)
// where mu is a ReLU feed-forward stack d -> h -> ... -> h -> d with a linear
// output layer.

#include <span>
#include <string>
#include <vector>

#include "attnrec/attention.hpp"
#include "attnrec/corpus.hpp"
#include "attnrec/embed.hpp"
#include "attnrec/numkit.hpp"
#include "attnrec/param_layout.hpp"

namespace attnrec {

struct DanShape {
  int dim = 64;
  int hidden = 128;
  int layers = 2;  // ReLU layers before the linear output

  bool operator==(const DanShape&) const = default;
};

ParamLayout dan_layout(const DanShape& shape);

template <typename Scalar = double>
class DanParams {
 public:
  DanParams() = default;
  explicit DanParams(const DanShape& shape)
      : shape_(shape), layout_(dan_layout(shape)), values(Vector<Scalar>::Zero(layout_.size())) {}

  const DanShape& shape() const { return shape_; }
  const ParamLayout& layout() const { return layout_; }
  int n_layers() const { return shape_.layers + 1; }

  // Layer l in [0, layers]; the last one is the linear output.
  auto weight(int l) const { return layout_.map(2 * static_cast<std::size_t>(l), values); }
  auto bias(int l) const { return layout_.map(2 * static_cast<std::size_t>(l) + 1, values); }
  auto weight(int l) { return layout_.map(2 * static_cast<std::size_t>(l), values); }
  auto bias(int l) { return layout_.map(2 * static_cast<std::size_t>(l) + 1, values); }

  template <typename Other>
  DanParams<Other> cast() const {
    DanParams<Other> out(shape_);
    out.values = values.template cast<Other>();
    return out;
  }

 private:
  DanShape shape_{};
  ParamLayout layout_;

 public:
  Vector<Scalar> values;
};

DanParams<double> init_dan(const DanShape& shape, Rng& rng);

template <typename Scalar>
struct DanTrace {
  std::vector<int> history;
  Vector<Scalar> mean;                    // x-hat
  std::vector<Vector<Scalar>> pre;        // pre-activations per layer
  std::vector<Vector<Scalar>> post;       // post[0] = mean, post[l+1] = layer l output
  Vector<Scalar> user;                    // mu(x-hat)
};

template <typename Scalar>
DanTrace<Scalar> dan_user_vector(const DanParams<Scalar>& params, std::span<const int> history,
                                 const EmbeddingTable& table) {
  if (table.dim() != params.shape().dim) throw ConfigError("embedding dimension does not match model");
  DanTrace<Scalar> tr;
  tr.history = canonical_history(history);
  if (tr.history.empty()) throw ConfigError("dan: empty history");
  tr.mean = Vector<Scalar>::Zero(table.dim());
  for (int item : tr.history) tr.mean += table.target.row(item).transpose().template cast<Scalar>();
  tr.mean /= Scalar(tr.history.size());
  tr.post.push_back(tr.mean);
  const int L = params.n_layers();
  for (int l = 0; l < L; ++l) {
    Vector<Scalar> a = params.weight(l) * tr.post.back() + params.bias(l).col(0);
    tr.pre.push_back(a);
    if (l + 1 < L) a = a.cwiseMax(Scalar(0));
    tr.post.push_back(std::move(a));
  }
  tr.user = tr.post.back();
  return tr;
}

/// d loss / d params given d loss / d user-vector.
template <typename Scalar>
void dan_backward_user(const DanParams<Scalar>& params, const DanTrace<Scalar>& tr, Vector<Scalar> duser,
                       Vector<Scalar>& grad) {
  const ParamLayout& layout = params.layout();
  if (grad.size() != layout.size()) grad = Vector<Scalar>::Zero(layout.size());
  const int L = params.n_layers();
  Vector<Scalar> da = std::move(duser);
  for (int l = L - 1; l >= 0; --l) {
    const auto ll = static_cast<std::size_t>(l);
    if (l + 1 < L) da = (tr.pre[ll].array() > Scalar(0)).select(da, Scalar(0));
    layout.map(2 * ll, grad).noalias() += da * tr.post[ll].transpose();
    layout.map(2 * ll + 1, grad).col(0) += da;
    if (l > 0) da = params.weight(l).transpose() * da;
  }
}

template <typename Scalar>
Vector<Scalar> dan_scores(const DanParams<Scalar>& params, std::span<const int> history,
                          std::span<const int> candidates, const EmbeddingTable& table) {
  if (candidates.empty()) return Vector<Scalar>(0);
  const auto tr = dan_user_vector(params, history, table);
  const Vector<Scalar> logits = gather_rows<Scalar>(table, candidates) * tr.user;
  return logits.unaryExpr([](Scalar a) { return logistic(a); });
}

template <typename Scalar>
Scalar dan_score(const DanParams<Scalar>& params, const EmbeddingTable& table, std::span<const int> history,
                 int query) {
  const int q[1] = {query};
  return dan_scores(params, history, q, table)(0);
}

/// Same balanced loss as the attention model.
template <typename Scalar>
Scalar dan_instance_loss(const DanParams<Scalar>& params, const SplitInstance& inst, std::span<const int> negatives,
                         const EmbeddingTable& table, Vector<Scalar>* grad = nullptr) {
  if (inst.future.empty() || negatives.empty()) throw ConfigError("instance_loss: empty future or negative set");
  for (int n : negatives) {
    if (std::find(inst.future.begin(), inst.future.end(), n) != inst.future.end()) {
      throw ConfigError("instance_loss: negative item " + std::to_string(n) + " is also a future item");
    }
  }
  const auto tr = dan_user_vector(params, inst.observed, table);
  std::vector<int> queries(inst.future.begin(), inst.future.end());
  queries.insert(queries.end(), negatives.begin(), negatives.end());
  const Matrix<Scalar> xq = gather_rows<Scalar>(table, queries);
  const Vector<Scalar> logits = xq * tr.user;
  const auto nf = static_cast<Eigen::Index>(inst.future.size());
  const auto nn = static_cast<Eigen::Index>(negatives.size());
  const Scalar wf = Scalar(1) / (Scalar(2) * Scalar(nf));
  const Scalar wn = Scalar(1) / (Scalar(2) * Scalar(nn));
  Scalar loss = 0;
  Vector<Scalar> dlogits(nf + nn);
  for (Eigen::Index q = 0; q < nf + nn; ++q) {
    const Scalar a = logits(q);
    if (q < nf) {
      loss += wf * softplus(-a);
      dlogits(q) = -wf * logistic(-a);
    } else {
      loss += wn * softplus(a);
      dlogits(q) = wn * logistic(a);
    }
  }
  if (grad) dan_backward_user(params, tr, Vector<Scalar>(xq.transpose() * dlogits), *grad);
  return loss;
}

/// Same layout as the attention checkpoint with magic "DANCF1" and header
/// (d, hidden, layers).
void save_dan(const DanParams<double>& params, const std::string& path);
DanParams<double> load_dan(const std::string& path, int expected_dim);

}  // namespace attnrec
