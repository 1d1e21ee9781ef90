#include "attnrec/cma_es.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "attnrec/errors.hpp"
#include "attnrec/parallel.hpp"

namespace attnrec {

int default_population(int dim) { return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dim)))); }

CmaEsResult cma_es_optimize(const std::function<double(const VectorXr&)>& objective, const VectorXr& x0,
                            const CmaEsConfig& cfg) {
  const auto n = x0.size();
  if (n < 1) throw ConfigError("cma_es: dim must be >= 1");
  if (!(cfg.sigma0 > 0.0)) throw ConfigError("cma_es: sigma0 must be > 0");
  if (cfg.iterations < 0) throw ConfigError("cma_es: iterations must be >= 0");
  const int lambda = cfg.population > 0 ? cfg.population : default_population(static_cast<int>(n));
  if (lambda < 2) throw ConfigError("cma_es: population must be >= 2");
  const int mu = lambda / 2;
  const double nd = static_cast<double>(n);

  VectorXr weights(mu);
  for (int i = 0; i < mu; ++i) weights(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();

  const double c_sigma = (mu_eff + 2.0) / (nd + mu_eff + 5.0);
  const double d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (nd + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / nd) / (nd + 4.0 + 2.0 * mu_eff / nd);
  const double c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff);
  const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nd + 2.0) * (nd + 2.0) + mu_eff));
  const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  Rng rng(cfg.seed);
  VectorXr mean = x0;
  double sigma = cfg.sigma0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  VectorXr D = VectorXr::Ones(n);
  VectorXr p_sigma = VectorXr::Zero(n);
  VectorXr p_c = VectorXr::Zero(n);

  auto safe_eval = [&](const VectorXr& x) {
    const double v = objective(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  CmaEsResult result;
  result.best = x0;
  result.best_value = safe_eval(x0);
  result.start_value = result.best_value;
  result.evaluations = 1;

  std::vector<VectorXr> ys(static_cast<std::size_t>(lambda));
  std::vector<VectorXr> xs(static_cast<std::size_t>(lambda));
  std::vector<double> values(static_cast<std::size_t>(lambda));
  std::vector<int> order(static_cast<std::size_t>(lambda));

  for (int gen = 0; gen < cfg.iterations; ++gen) {
    for (int k = 0; k < lambda; ++k) {
      VectorXr z(n);
      for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
      ys[static_cast<std::size_t>(k)] = B * D.asDiagonal() * z;
      xs[static_cast<std::size_t>(k)] = mean + sigma * ys[static_cast<std::size_t>(k)];
    }
    parallel_for(static_cast<std::size_t>(lambda), cfg.threads, [&](std::size_t k) { values[k] = safe_eval(xs[k]); });
    result.evaluations += lambda;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return values[static_cast<std::size_t>(a)] < values[static_cast<std::size_t>(b)];
    });
    const auto top = static_cast<std::size_t>(order[0]);
    if (values[top] < result.best_value) {
      result.best_value = values[top];
      result.best = xs[top];
    }
    result.best_history.push_back(result.best_value);

    VectorXr y_w = VectorXr::Zero(n);
    for (int i = 0; i < mu; ++i) y_w += weights(i) * ys[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    mean += sigma * y_w;

    // C^{-1/2} y_w = B D^{-1} B^T y_w
    const VectorXr c_inv_sqrt_y = B * D.cwiseInverse().asDiagonal() * B.transpose() * y_w;
    p_sigma = (1.0 - c_sigma) * p_sigma + std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * c_inv_sqrt_y;
    const double ps_norm = p_sigma.norm();
    const bool h_sigma = ps_norm / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1))) / chi_n <
                         1.4 + 2.0 / (nd + 1.0);
    p_c = (1.0 - c_c) * p_c + (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) * y_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const VectorXr& y = ys[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      rank_mu.noalias() += weights(i) * y * y.transpose();
    }
    const double h_corr = h_sigma ? 0.0 : c_c * (2.0 - c_c);
    C = (1.0 - c_1 - c_mu) * C + c_1 * (p_c * p_c.transpose() + h_corr * C) + c_mu * rank_mu;
    sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));

    C = 0.5 * (C + C.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    B = eig.eigenvectors();
    D = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();
    if (!std::isfinite(sigma) || sigma == 0.0) break;
  }
  return result;
}

}  // namespace attnrec
