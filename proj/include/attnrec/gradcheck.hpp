#pragma once

// Finite-difference suites for the trainable models on random instances.

#include <cstdint>
#include <string>
#include <vector>

#include "attnrec/numkit.hpp"

namespace attnrec {

struct GradCheckCase {
  std::string name;
  FiniteDiffReport report;  // worst instance
  std::size_t instances = 0;
};

struct GradCheckOptions {
  int dim = 8;
  int hidden = 6;
  std::vector<int> depths{1, 3};
  int dan_hidden = 8;
  int dan_layers = 2;
  std::size_t instances = 10;
  std::size_t coords = 200;
  double tolerance = 1e-5;
  std::uint64_t seed = 1;
};

/// Attention model for every depth, then DAN. Parameters and embeddings are
/// random normal so that no gradient block is trivially zero.
std::vector<GradCheckCase> run_grad_checks(const GradCheckOptions& options);

}  // namespace attnrec
