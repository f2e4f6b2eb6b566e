// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include <Eigen/Dense>

namespace van {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kVarianceFloor = 1e-12;

/// Per-dimension means and variances of a diagonal Gaussian.
struct MomentVector {
  Vector means;
  Vector variances;

  MomentVector() = default;
  /// Throws DomainError on length mismatch or a negative / NaN variance.
  MomentVector(Vector m, Vector v);

  static MomentVector zeros(Eigen::Index n);

  Eigen::Index size() const { return means.size(); }
};

/// One univariate Gaussian; sigma2 is the variance.
struct GaussianScalar {
  double mu = 0.0;
  double sigma2 = 0.0;
};

/// Affine map y = W^T x + b with W stored as (inputs x outputs).
struct WeightMatrix {
  Matrix values;
  Vector bias;

  WeightMatrix() = default;
  WeightMatrix(Matrix w, Vector b);
  static WeightMatrix zeros(Eigen::Index rows, Eigen::Index cols);

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  bool all_finite() const;
};

/// Mean and population variance of a pooling window.
GaussianScalar mean_var_of_window(std::span<const double> values);

/// Entrywise square of the weights; bias is zeroed since it adds no variance.
WeightMatrix elementwise_square(const WeightMatrix& w);

Vector clamp_variance(const Vector& v, double floor = kVarianceFloor);

namespace kernels {

// Reductions below run in a fixed order over four interleaved partial sums.
// Appending zero terms to either operand never changes the result, which is
// what makes the mean-only and moment paths bitwise comparable.
double dot(const double* a, const double* b, Eigen::Index n);
double dot_squared_weights(const double* w, const double* v, Eigen::Index n);
double squared_norm(const double* a, Eigen::Index n);

/// W^T x + b
Vector affine_t(const WeightMatrix& w, const Vector& x);
/// (W o W)^T v
Vector squared_affine_t(const Matrix& w, const Vector& v);

}  // namespace kernels

}  // namespace van
