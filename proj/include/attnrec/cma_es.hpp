#pragma once

// (mu/mu_w, lambda) CMA-ES with cumulative step-size adaptation and rank-one
// plus rank-mu covariance updates, default strategy parameters.

#include <cstdint>
#include <functional>
#include <vector>

#include "attnrec/numkit.hpp"

namespace attnrec {

struct CmaEsConfig {
  int population = 0;  // 0: 4 + floor(3 ln dim)
  int iterations = 100;
  double sigma0 = 0.3;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct CmaEsResult {
  VectorXr best;
  double best_value = 0.0;
  double start_value = 0.0;
  std::vector<double> best_history;  // running best after each iteration
  long evaluations = 0;
};

int default_population(int dim);

/// Minimizes `objective` from x0. The start point is evaluated first and counts
/// toward the best. Non-finite objective values rank last and never become best.
CmaEsResult cma_es_optimize(const std::function<double(const VectorXr&)>& objective, const VectorXr& x0,
                            const CmaEsConfig& config);

}  // namespace attnrec
