#include "attnrec/gradcheck.hpp"

#include "attnrec/attention.hpp"
#include "attnrec/dan.hpp"

namespace attnrec {

namespace {

using Wide = long double;

struct RandomInstance {
  SplitInstance inst;
  std::vector<int> negatives;
};

RandomInstance random_instance(int n_items, Rng& rng) {
  std::vector<int> items(static_cast<std::size_t>(n_items));
  for (int i = 0; i < n_items; ++i) items[static_cast<std::size_t>(i)] = i;
  rng.shuffle(items.begin(), items.end());
  RandomInstance r;
  r.inst.user_id = "check";
  r.inst.observed.assign(items.begin(), items.begin() + 5);
  r.inst.future.assign(items.begin() + 5, items.begin() + 8);
  r.negatives.assign(items.begin() + 8, items.begin() + 14);
  return r;
}

EmbeddingTable random_table(int n_items, int dim, Rng& rng) {
  EmbeddingTable t;
  for (int i = 0; i < n_items; ++i) t.ids.push_back("g" + std::to_string(i));
  t.target = MatrixXr(n_items, dim);
  for (Eigen::Index i = 0; i < t.target.size(); ++i) t.target.data()[i] = rng.normal();
  t.context = MatrixXr::Zero(n_items, dim);
  return t;
}

template <typename Params>
void randomize(Params& p, double scale, Rng& rng) {
  for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values(i) = scale * rng.normal();
}

// Worst report over instances.
template <typename Params, typename LossFn>
GradCheckCase check_model(const std::string& name, Params params, const GradCheckOptions& o, LossFn&& loss, Rng& rng) {
  constexpr int kItems = 30;
  const EmbeddingTable table = random_table(kItems, o.dim, rng);
  GradCheckCase out;
  out.name = name;
  for (std::size_t n = 0; n < o.instances; ++n) {
    randomize(params, 0.4, rng);
    const auto ri = random_instance(kItems, rng);
    VectorXr analytic = VectorXr::Zero(params.values.size());
    loss(params, ri.inst, ri.negatives, table, &analytic);
    const auto wide = params.template cast<Wide>();
    auto fn = [&](const Vector<Wide>& v) {
      auto probe = wide;
      probe.values = v;
      return loss(probe, ri.inst, ri.negatives, table, static_cast<Vector<Wide>*>(nullptr));
    };
    const auto rep = finite_diff_check<Wide>(fn, wide.values, analytic, Wide(1e-5), o.tolerance, o.coords, rng);
    if (n == 0 || rep.max_rel_error > out.report.max_rel_error) out.report = rep;
    ++out.instances;
  }
  return out;
}

}  // namespace

std::vector<GradCheckCase> run_grad_checks(const GradCheckOptions& o) {
  Rng rng = Rng::stream(o.seed, 0x6c);
  std::vector<GradCheckCase> cases;
  auto attn_loss = [](const auto& p, const SplitInstance& inst, std::span<const int> negs, const EmbeddingTable& t,
                      auto* grad) { return attention_instance_loss(p, inst, negs, t, grad); };
  auto dan_loss = [](const auto& p, const SplitInstance& inst, std::span<const int> negs, const EmbeddingTable& t,
                     auto* grad) { return dan_instance_loss(p, inst, negs, t, grad); };
  for (int k : o.depths) {
    AttentionParams<double> p(AttentionShape{o.dim, o.hidden, k});
    cases.push_back(check_model("attention_k" + std::to_string(k), p, o, attn_loss, rng));
  }
  DanParams<double> d(DanShape{o.dim, o.dan_hidden, o.dan_layers});
  cases.push_back(check_model("dan", d, o, dan_loss, rng));
  return cases;
}

}  // namespace attnrec
