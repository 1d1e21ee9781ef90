#include "attnrec/dan.hpp"

#include "attnrec/checkpoint.hpp"

namespace attnrec {

namespace {
constexpr std::string_view kMagic = "DANCF1";
}

ParamLayout dan_layout(const DanShape& s) {
  if (s.dim < 1 || s.hidden < 1 || s.layers < 0) throw ConfigError("dan shape must be positive");
  ParamLayout layout;
  int in = s.dim;
  for (int l = 0; l < s.layers; ++l) {
    layout.add("W" + std::to_string(l), s.hidden, in);
    layout.add("b" + std::to_string(l), s.hidden, 1);
    in = s.hidden;
  }
  layout.add("W_out", s.dim, in);
  layout.add("b_out", s.dim, 1);
  return layout;
}

DanParams<double> init_dan(const DanShape& shape, Rng& rng) {
  DanParams<double> params(shape);
  for (int l = 0; l < params.n_layers(); ++l) {
    auto w = params.weight(l);
    w = orthogonal_init<double>(w.rows(), w.cols(), rng);
  }
  return params;
}

void save_dan(const DanParams<double>& params, const std::string& path) {
  Checkpoint ckpt;
  ckpt.shape = {static_cast<std::uint32_t>(params.shape().dim), static_cast<std::uint32_t>(params.shape().hidden),
                static_cast<std::uint32_t>(params.shape().layers)};
  ckpt.values = params.values;
  write_checkpoint(path, kMagic, ckpt);
}

DanParams<double> load_dan(const std::string& path, int expected_dim) {
  DanShape shape;
  const Checkpoint ckpt = read_checkpoint(path, kMagic, [&](const std::array<std::uint32_t, 3>& s) {
    if (s[0] == 0 || s[1] == 0 || s[0] > 1u << 20 || s[1] > 1u << 20 || s[2] > 1u << 10) {
      throw DataError(path + ": corrupted header");
    }
    shape = DanShape{static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2])};
    return static_cast<std::size_t>(dan_layout(shape).size());
  });
  if (expected_dim > 0 && shape.dim != expected_dim) {
    throw DataError(path + ": checkpoint embedding dimension " + std::to_string(shape.dim) +
                    " does not match embeddings (" + std::to_string(expected_dim) + ")");
  }
  DanParams<double> params(shape);
  params.values = ckpt.values;
  return params;
}

}  // namespace attnrec
