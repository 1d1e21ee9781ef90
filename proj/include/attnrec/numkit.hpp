#pragma once

// Dense numeric kernel shared by the embedding, attention and baseline models.
// Everything is templated on the scalar type so that model code can run at
// 64-bit for training and at extended precision inside gradient oracles.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "attnrec/errors.hpp"
#include "attnrec/rng.hpp"

namespace attnrec {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixMap = Eigen::Map<Matrix<Scalar>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const Matrix<Scalar>>;

using MatrixXr = Matrix<double>;
using VectorXr = Vector<double>;

namespace detail {
inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}
}  // namespace detail

/// W x + b. Throws ConfigError when shapes do not conform.
template <typename DerivedW, typename DerivedB, typename DerivedX>
auto affine(const Eigen::MatrixBase<DerivedW>& W, const Eigen::MatrixBase<DerivedB>& b,
            const Eigen::MatrixBase<DerivedX>& x) {
  using Scalar = typename DerivedW::Scalar;
  if (W.cols() != x.rows() || W.rows() != b.rows() || b.cols() != 1 || x.cols() != 1) {
    throw ConfigError("affine: shape mismatch W=" + detail::shape_str(W.rows(), W.cols()) +
                      " b=" + detail::shape_str(b.rows(), b.cols()) +
                      " x=" + detail::shape_str(x.rows(), x.cols()));
  }
  Vector<Scalar> out = W * x + b;
  return out;
}

/// Max-subtracted softmax.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  if (s.size() == 0) throw ConfigError("softmax: empty input");
  const Scalar top = s.maxCoeff();
  Vector<Scalar> e = (s.array() - top).exp().matrix();
  e /= e.sum();
  return e;
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  return x > Scalar(0) ? x + log1p(exp(-x)) : log1p(exp(x));
}

/// log sigma(x) = -softplus(-x).
template <typename Scalar>
Scalar log_logistic(Scalar x) {
  return -softplus(-x);
}

template <typename Scalar = double>
struct AdamState {
  Vector<Scalar> m;
  Vector<Scalar> v;
  long long t = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  Scalar lr = Scalar(0.002);

  AdamState() = default;
  explicit AdamState(Eigen::Index n, Scalar learning_rate = Scalar(0.002))
      : m(Vector<Scalar>::Zero(n)), v(Vector<Scalar>::Zero(n)), lr(learning_rate) {}
};

/// One bias-corrected Adam update in place. An all-zero gradient leaves both
/// the parameters and the optimizer state untouched.
template <typename Scalar, typename DerivedP, typename DerivedG>
void adam_step(AdamState<Scalar>& state, Eigen::MatrixBase<DerivedP>& params,
               const Eigen::MatrixBase<DerivedG>& grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ConfigError("adam_step: shape mismatch");
  }
  if (!grads.allFinite()) throw NumericError("adam_step: non-finite gradient");
  if ((grads.array() == Scalar(0)).all()) return;
  using std::pow;
  using std::sqrt;
  ++state.t;
  state.m = state.beta1 * state.m + (Scalar(1) - state.beta1) * grads;
  state.v = state.beta2 * state.v + (Scalar(1) - state.beta2) * grads.cwiseAbs2();
  const Scalar c1 = Scalar(1) - pow(state.beta1, Scalar(state.t));
  const Scalar c2 = Scalar(1) - pow(state.beta2, Scalar(state.t));
  params.array() -= state.lr * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + state.eps);
}

/// Rescales grads to norm max_norm when it is exceeded; returns the pre-clip norm.
template <typename Derived>
typename Derived::Scalar clip_global_norm(Eigen::MatrixBase<Derived>& grads,
                                          typename Derived::Scalar max_norm) {
  const auto norm = grads.norm();
  if (norm > max_norm) grads *= (max_norm / norm);
  return norm;
}

/// Semi-orthogonal matrix from the QR factorization of a standard Gaussian
/// matrix (gain 1). Rows are orthonormal when rows <= cols, columns otherwise.
template <typename Scalar = double>
Matrix<Scalar> orthogonal_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw ConfigError("orthogonal_init: empty shape");
  const bool tall = rows >= cols;
  const Eigen::Index big = tall ? rows : cols;
  const Eigen::Index small = tall ? cols : rows;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a(big, small);
  for (Eigen::Index i = 0; i < big; ++i)
    for (Eigen::Index j = 0; j < small; ++j) a(i, j) = Scalar(rng.normal());
  Eigen::HouseholderQR<decltype(a)> qr(a);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> q =
      qr.householderQ() * Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(big, small);
  // Sign convention from R's diagonal makes the draw uniform over the Stiefel manifold.
  const auto& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < small; ++j) {
    if (r(j, j) < Scalar(0)) q.col(j) *= Scalar(-1);
  }
  Matrix<Scalar> out = tall ? Matrix<Scalar>(q) : Matrix<Scalar>(q.transpose());
  return out;
}

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Compares an analytic gradient against central differences of `loss` on a
/// random subsample of coordinates (all coordinates when there are fewer than
/// `min_coords`). Relative error is |ga - gn| / max(1e-8, |ga| + |gn|).
///
/// `loss` is evaluated at the oracle's scalar type, which may be wider than the
/// scalar the analytic gradient was computed in.
template <typename Scalar, typename LossFn>
FiniteDiffReport finite_diff_check(LossFn&& loss, const Vector<Scalar>& params,
                                   const VectorXr& analytic, Scalar epsilon, double tolerance,
                                   std::size_t min_coords, Rng& rng) {
  if (analytic.size() != params.size()) throw ConfigError("finite_diff_check: shape mismatch");
  const auto n = static_cast<std::size_t>(params.size());
  std::vector<std::size_t> coords(n);
  for (std::size_t i = 0; i < n; ++i) coords[i] = i;
  if (n > min_coords) {
    rng.shuffle(coords.begin(), coords.end());
    coords.resize(min_coords);
  }
  FiniteDiffReport report;
  report.tolerance = tolerance;
  Vector<Scalar> probe = params;
  for (std::size_t c : coords) {
    const auto i = static_cast<Eigen::Index>(c);
    const Scalar orig = probe(i);
    probe(i) = orig + epsilon;
    const Scalar up = loss(probe);
    probe(i) = orig - epsilon;
    const Scalar down = loss(probe);
    probe(i) = orig;
    const double numeric = static_cast<double>((up - down) / (Scalar(2) * epsilon));
    const double ga = analytic(i);
    const double rel = std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
    if (rel > report.max_rel_error || report.coords_checked == 0) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= report.max_rel_error) report.worst_index = c;
    }
    ++report.coords_checked;
  }
  return report;
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite values");
}

}  // namespace attnrec
