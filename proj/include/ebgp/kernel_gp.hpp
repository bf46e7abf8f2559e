#pragma once

// Squared-exponential kernel, Gram matrices, Cholesky with jitter escalation,
// marginal likelihood and closed-form GP posterior quantities.
//
// Samples are stored as rows of an n x D matrix. The bandwidth t lives in
// squared-length units: h_t(x, y) = h(|x - y|^2 / t) with h(r) = exp(-r / 2).

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <utility>
#include <vector>

#include "ebgp/error.hpp"

namespace ebgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct KernelParams {
  double bandwidth = 1.0;       // t
  double noise_variance = 0.01; // sigma^2

  void validate() const {
    detail::require(bandwidth > 0.0 && std::isfinite(bandwidth), "bandwidth must be positive");
    detail::require(noise_variance > 0.0 && std::isfinite(noise_variance),
                    "noise variance must be positive");
  }
};

// Radial profile h with h(0) = 1. Other profiles can be plugged in through the
// Kernel template parameter as long as they expose the same two members.
struct SquaredExponential {
  static double profile(double r) noexcept { return std::exp(-0.5 * r); }

  template <class ArrayExpr>
  static auto profile_array(const ArrayExpr& r) {
    return (-0.5 * r).exp();
  }
};

template <class A, class B>
double squared_distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  return (x - y).squaredNorm();
}

template <class Kernel = SquaredExponential, class A, class B>
double kernel_eval(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y, double t) {
  detail::require(t > 0.0, "kernel bandwidth must be positive");
  detail::require<InvalidInput>(x.size() == y.size(), "kernel arguments differ in dimension");
  return Kernel::profile(squared_distance(x, y) / t);
}

// Exact pairwise squared distances (no |x|^2 + |y|^2 - 2<x,y> shortcut).
inline Matrix pairwise_sq_dists(const Eigen::Ref<const Matrix>& X) {
  const Eigen::Index n = X.rows();
  detail::require<InvalidInput>(n >= 1, "empty input matrix");
  const Matrix Xt = X.transpose();
  Matrix D2 = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = (Xt.col(i) - Xt.col(j)).squaredNorm();
      D2(i, j) = d;
      D2(j, i) = d;
    }
  }
  return D2;
}

// Squared distances between rows of A (m x D) and rows of B (n x D): m x n.
inline Matrix cross_sq_dists(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B) {
  detail::require<InvalidInput>(A.cols() == B.cols(), "dimension mismatch between point sets");
  const Matrix At = A.transpose();
  const Matrix Bt = B.transpose();
  Matrix D2(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) D2(i, j) = (At.col(i) - Bt.col(j)).squaredNorm();
  return D2;
}

template <class Kernel = SquaredExponential>
Matrix kernel_from_sq_dists(const Eigen::Ref<const Matrix>& D2, double t) {
  detail::require(t > 0.0, "kernel bandwidth must be positive");
  return Kernel::profile_array(D2.array() / t).matrix();
}

template <class Kernel = SquaredExponential>
Matrix gram_matrix(const Eigen::Ref<const Matrix>& X, double t) {
  detail::require(t > 0.0, "kernel bandwidth must be positive");
  Matrix K = kernel_from_sq_dists<Kernel>(pairwise_sq_dists(X), t);
  K.diagonal().setOnes();
  // vectorized and scalar exp can differ in the last bit
  K.template triangularView<Eigen::StrictlyUpper>() = K.transpose();
  return K;
}

inline constexpr std::array<double, 3> kJitterLadder{1e-12, 1e-10, 1e-8};

struct CholeskyFactor {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;

  double log_det() const { return 2.0 * llt.matrixLLT().diagonal().array().log().sum(); }
};

namespace detail {

inline bool llt_ok(const Eigen::LLT<Matrix>& llt) {
  return llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite() &&
         (llt.matrixLLT().diagonal().array() > 0.0).all();
}

}  // namespace detail

// Factorizes a symmetric matrix, escalating diagonal jitter along
// kJitterLadder when the plain factorization fails.
inline CholeskyFactor factorize_spd(Matrix A) {
  detail::require<InvalidInput>(A.rows() == A.cols() && A.rows() >= 1, "matrix must be square");
  CholeskyFactor f;
  f.llt.compute(A);
  if (detail::llt_ok(f.llt)) return f;
  std::vector<double> attempted{0.0};
  double applied = 0.0;
  for (double level : kJitterLadder) {
    A.diagonal().array() += level - applied;
    applied = level;
    attempted.push_back(level);
    f.llt.compute(A);
    if (detail::llt_ok(f.llt)) {
      f.jitter = level;
      return f;
    }
  }
  throw FactorizationFailure(std::move(attempted));
}

// log N(Y; 0, A) given the factor of A.
inline double gaussian_log_density(const CholeskyFactor& f, const Eigen::Ref<const Vector>& Y) {
  const Vector z = f.llt.matrixL().solve(Y);
  const double n = static_cast<double>(Y.size());
  return -0.5 * z.squaredNorm() - 0.5 * f.log_det() - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

template <class Kernel = SquaredExponential>
double marginal_log_likelihood(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& Y,
                               const KernelParams& params) {
  params.validate();
  detail::require<InvalidInput>(X.rows() == Y.size(), "X and Y disagree in length");
  Matrix A = gram_matrix<Kernel>(X, params.bandwidth);
  A.diagonal().array() += params.noise_variance;
  return gaussian_log_density(factorize_spd(std::move(A)), Y);
}

// Repeated marginal-likelihood evaluations over bandwidths for fixed data;
// the pairwise distances are computed once and shared.
template <class Kernel = SquaredExponential>
class MarginalLikelihood {
 public:
  MarginalLikelihood(std::shared_ptr<const Matrix> sq_dists, Vector Y)
      : d2_(std::move(sq_dists)), y_(std::move(Y)) {
    detail::require<InvalidInput>(d2_ && d2_->rows() == y_.size(), "X and Y disagree in length");
  }

  MarginalLikelihood(const Eigen::Ref<const Matrix>& X, Vector Y)
      : MarginalLikelihood(std::make_shared<const Matrix>(pairwise_sq_dists(X)), std::move(Y)) {}

  double operator()(double t, double noise_variance) const {
    KernelParams{t, noise_variance}.validate();
    Matrix A = kernel_from_sq_dists<Kernel>(*d2_, t);
    A.diagonal().array() = 1.0 + noise_variance;
    return gaussian_log_density(factorize_spd(std::move(A)), y_);
  }

  const Matrix& sq_dists() const { return *d2_; }
  std::shared_ptr<const Matrix> shared_sq_dists() const { return d2_; }
  const Vector& targets() const { return y_; }

 private:
  std::shared_ptr<const Matrix> d2_;
  Vector y_;
};

// GP posterior at a fixed bandwidth; immutable after construction.
template <class Kernel = SquaredExponential>
class GPFit {
 public:
  GPFit(Matrix X, Vector Y, KernelParams params) : x_(std::move(X)), y_(std::move(Y)), params_(params) {
    params_.validate();
    detail::require<InvalidInput>(x_.rows() >= 1, "empty training set");
    detail::require<InvalidInput>(x_.rows() == y_.size(), "X and Y disagree in length");
    k_ = gram_matrix<Kernel>(x_, params_.bandwidth);
    Matrix A = k_;
    A.diagonal().array() += params_.noise_variance;
    factor_ = factorize_spd(std::move(A));
    alpha_ = factor_.llt.solve(y_);
  }

  // Reuses precomputed training distances (sampler path).
  GPFit(Matrix X, Vector Y, KernelParams params, const Matrix& train_sq_dists)
      : x_(std::move(X)), y_(std::move(Y)), params_(params) {
    params_.validate();
    detail::require<InvalidInput>(x_.rows() == y_.size() && train_sq_dists.rows() == x_.rows(),
                                  "X, Y and distance matrix disagree in size");
    k_ = kernel_from_sq_dists<Kernel>(train_sq_dists, params_.bandwidth);
    k_.diagonal().setOnes();
    Matrix A = k_;
    A.diagonal().array() += params_.noise_variance;
    factor_ = factorize_spd(std::move(A));
    alpha_ = factor_.llt.solve(y_);
  }

  const Matrix& train_inputs() const { return x_; }
  const Vector& train_targets() const { return y_; }
  const KernelParams& params() const { return params_; }
  const Matrix& gram() const { return k_; }
  const Eigen::LLT<Matrix>& factor() const { return factor_.llt; }
  double jitter() const { return factor_.jitter; }
  const Vector& alpha() const { return alpha_; }

  Vector solve(const Eigen::Ref<const Vector>& rhs) const { return factor_.llt.solve(rhs); }

  double log_marginal_likelihood() const { return gaussian_log_density(factor_, y_); }

 private:
  Matrix x_;
  Vector y_;
  KernelParams params_;
  Matrix k_;
  CholeskyFactor factor_;
  Vector alpha_;
};

template <class Kernel>
Vector posterior_predict(const GPFit<Kernel>& fit, const Eigen::Ref<const Matrix>& X_test) {
  detail::require<InvalidInput>(X_test.rows() >= 1, "empty test set");
  detail::require<InvalidInput>(X_test.cols() == fit.train_inputs().cols(),
                                "test points differ in dimension from training points");
  const Matrix Kx = kernel_from_sq_dists<Kernel>(cross_sq_dists(X_test, fit.train_inputs()),
                                                 fit.params().bandwidth);
  return Kx * fit.alpha();
}

struct NodeMoments {
  Vector mean;
  Matrix covariance;
};

// Posterior of f at the training nodes: mean K A^{-1} Y, covariance
// K - K A^{-1} K with A = K + sigma^2 I.
template <class Kernel>
NodeMoments posterior_node_moments(const GPFit<Kernel>& fit) {
  const Matrix& K = fit.gram();
  NodeMoments m;
  m.mean = K * fit.alpha();
  const Matrix V = fit.factor().matrixL().solve(K);
  m.covariance = K - V.transpose() * V;
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
  return m;
}

}  // namespace ebgp
