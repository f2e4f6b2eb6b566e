// SPDX-License-Identifier: Apache-2.0
#include "van/moments.hpp"

#include <cmath>
#include <string>

#include "van/errors.hpp"

namespace van {

MomentVector::MomentVector(Vector m, Vector v) : means(std::move(m)), variances(std::move(v)) {
  if (means.size() != variances.size()) {
    throw DomainError("MomentVector: means has " + std::to_string(means.size()) +
                      " entries but variances has " + std::to_string(variances.size()));
  }
  for (Eigen::Index i = 0; i < variances.size(); ++i) {
    if (!(variances[i] >= 0.0)) {
      throw DomainError("MomentVector: variance " + std::to_string(i) + " is negative or NaN");
    }
  }
}

MomentVector MomentVector::zeros(Eigen::Index n) {
  MomentVector out;
  out.means = Vector::Zero(n);
  out.variances = Vector::Zero(n);
  return out;
}

WeightMatrix::WeightMatrix(Matrix w, Vector b) : values(std::move(w)), bias(std::move(b)) {
  if (bias.size() != values.cols()) {
    throw UsageError("WeightMatrix: bias length " + std::to_string(bias.size()) +
                     " does not match output dimension " + std::to_string(values.cols()));
  }
  if (!all_finite()) throw DomainError("WeightMatrix: non-finite weight or bias");
}

WeightMatrix WeightMatrix::zeros(Eigen::Index rows, Eigen::Index cols) {
  return WeightMatrix(Matrix::Zero(rows, cols), Vector::Zero(cols));
}

bool WeightMatrix::all_finite() const { return values.allFinite() && bias.allFinite(); }

GaussianScalar mean_var_of_window(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean_var_of_window: empty window");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double x : values) sum += x;
  const double mean = sum / n;
  // second pass on centred values; exact zero for constant windows
  double ss = 0.0;
  for (double x : values) {
    const double d = x - mean;
    ss += d * d;
  }
  return {mean, ss / n};
}

WeightMatrix elementwise_square(const WeightMatrix& w) {
  return WeightMatrix(w.values.cwiseProduct(w.values), Vector::Zero(w.cols()));
}

Vector clamp_variance(const Vector& v, double floor) {
  if (floor < 0.0) throw DomainError("clamp_variance: negative floor");
  return v.cwiseMax(floor);
}

namespace kernels {

double dot(const double* a, const double* b, Eigen::Index n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  Eigen::Index i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += a[i] * b[i];
    acc[1] += a[i + 1] * b[i + 1];
    acc[2] += a[i + 2] * b[i + 2];
    acc[3] += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) acc[i & 3] += a[i] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double dot_squared_weights(const double* w, const double* v, Eigen::Index n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  Eigen::Index i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += w[i] * w[i] * v[i];
    acc[1] += w[i + 1] * w[i + 1] * v[i + 1];
    acc[2] += w[i + 2] * w[i + 2] * v[i + 2];
    acc[3] += w[i + 3] * w[i + 3] * v[i + 3];
  }
  for (; i < n; ++i) acc[i & 3] += w[i] * w[i] * v[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double squared_norm(const double* a, Eigen::Index n) { return dot(a, a, n); }

Vector affine_t(const WeightMatrix& w, const Vector& x) {
  if (x.size() != w.rows()) {
    throw DomainError("affine: input length " + std::to_string(x.size()) + " but weights expect " +
                      std::to_string(w.rows()));
  }
  const Eigen::Index rows = w.rows();
  Vector out(w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    out[j] = dot(w.values.data() + j * rows, x.data(), rows) + w.bias[j];
  }
  return out;
}

Vector squared_affine_t(const Matrix& w, const Vector& v) {
  if (v.size() != w.rows()) {
    throw DomainError("squared affine: input length " + std::to_string(v.size()) +
                      " but weights expect " + std::to_string(w.rows()));
  }
  const Eigen::Index rows = w.rows();
  Vector out(w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    out[j] = dot_squared_weights(w.data() + j * rows, v.data(), rows);
  }
  return out;
}

}  // namespace kernels

}  // namespace van
