#include "attnrec/attention.hpp"

#include "attnrec/checkpoint.hpp"

namespace attnrec {

namespace {
constexpr std::string_view kMagic = "ATNCF1";
}

ParamLayout attention_layout(const AttentionShape& s) {
  if (s.dim < 1 || s.hidden < 1 || s.depth < 1) throw ConfigError("attention shape must be positive");
  ParamLayout layout;
  layout.add("B_h", s.hidden, s.dim);
  layout.add("c_h", s.hidden, 1);
  for (int k = 1; k <= s.depth; ++k) {
    const std::string tag = std::to_string(k);
    layout.add("B_f" + tag, s.hidden, s.dim);
    layout.add("c_f" + tag, s.hidden, 1);
    layout.add("B_g" + tag, s.hidden, s.dim);
    layout.add("c_g" + tag, s.hidden, 1);
  }
  layout.add("w", s.hidden, 1);
  return layout;
}

AttentionParams<double> init_attention(const AttentionShape& shape, Rng& rng) {
  AttentionParams<double> params(shape);
  params.B_h() = orthogonal_init<double>(shape.hidden, shape.dim, rng);
  for (int k = 1; k <= shape.depth; ++k) {
    params.B_f(k) = orthogonal_init<double>(shape.hidden, shape.dim, rng);
    params.B_g(k) = orthogonal_init<double>(shape.hidden, shape.dim, rng);
  }
  return params;
}

std::vector<int> canonical_history(std::span<const int> history) {
  std::vector<int> items(history.begin(), history.end());
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

void save_attention(const AttentionParams<double>& params, const std::string& path) {
  Checkpoint ckpt;
  ckpt.shape = {static_cast<std::uint32_t>(params.shape().dim), static_cast<std::uint32_t>(params.shape().hidden),
                static_cast<std::uint32_t>(params.shape().depth)};
  ckpt.values = params.values;
  write_checkpoint(path, kMagic, ckpt);
}

AttentionParams<double> load_attention(const std::string& path, int expected_dim) {
  AttentionShape shape;
  const Checkpoint ckpt = read_checkpoint(path, kMagic, [&](const std::array<std::uint32_t, 3>& s) {
    if (s[0] == 0 || s[1] == 0 || s[2] == 0 || s[0] > 1u << 20 || s[1] > 1u << 20 || s[2] > 1u << 16) {
      throw DataError(path + ": corrupted header");
    }
    shape = AttentionShape{static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2])};
    return static_cast<std::size_t>(attention_layout(shape).size());
  });
  if (expected_dim > 0 && shape.dim != expected_dim) {
    throw DataError(path + ": checkpoint embedding dimension " + std::to_string(shape.dim) +
                    " does not match embeddings (" + std::to_string(expected_dim) + ")");
  }
  AttentionParams<double> params(shape);
  params.values = ckpt.values;
  return params;
}

}  // namespace attnrec
