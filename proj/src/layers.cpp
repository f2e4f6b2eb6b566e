// SPDX-License-Identifier: Apache-2.0
#include "van/layers.hpp"

#include <cmath>
#include <string>

#include "van/errors.hpp"

namespace van {

namespace {

void consume(bool& recorded, const char* layer) {
  if (!recorded) {
    throw UsageError(std::string(layer) + " backward: tape has no matching forward call");
  }
  recorded = false;
}

void check_grad_sizes(const char* layer, bool with_variance, Eigen::Index n, const Vector& gm,
                      const Vector& gv) {
  if (gm.size() != n) {
    throw UsageError(std::string(layer) + " backward: mean gradient has " + std::to_string(gm.size()) +
                     " entries, expected " + std::to_string(n));
  }
  if (with_variance ? gv.size() != n : gv.size() != 0) {
    throw UsageError(std::string(layer) + " backward: variance gradient does not match tape");
  }
}

}  // namespace

std::vector<int> part_sizes(int length, int k) {
  if (k < 1) throw DomainError("part_sizes: k must be >= 1");
  if (length < k) {
    throw DomainError("part_sizes: " + std::to_string(length) + " units cannot be split into " +
                      std::to_string(k) + " parts");
  }
  std::vector<int> sizes(static_cast<std::size_t>(k), length / k);
  for (int i = 0; i < length % k; ++i) ++sizes[static_cast<std::size_t>(i)];
  return sizes;
}

PooledFeature vap_pool(const Eigen::Ref<const Matrix>& units, int k, int ctx_before, int ctx_after) {
  if (ctx_before < 0 || ctx_after < 0) throw DomainError("vap_pool: negative context size");
  const int total = static_cast<int>(units.rows());
  const int length = total - ctx_before - ctx_after;
  if (length < 1 || length < k) {
    throw DomainError("vap_pool: proposal of " + std::to_string(length) + " units is shorter than k=" +
                      std::to_string(k));
  }
  const int dim = static_cast<int>(units.cols());
  const std::vector<int> sizes = part_sizes(length, k);

  // window boundaries in rows: context-before, parts, context-after
  std::vector<std::pair<int, int>> windows;
  windows.reserve(static_cast<std::size_t>(k) + 2);
  windows.emplace_back(0, ctx_before);
  int row = ctx_before;
  for (int s : sizes) {
    windows.emplace_back(row, s);
    row += s;
  }
  windows.emplace_back(row, ctx_after);

  PooledFeature out;
  out.parts = k;
  out.dim = dim;
  out.moments = MomentVector::zeros(static_cast<Eigen::Index>(windows.size()) * dim);
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const auto [start, count] = windows[b];
    if (count == 0) continue;
    for (int d = 0; d < dim; ++d) {
      const double* col = units.col(d).data() + start;
      const GaussianScalar g = mean_var_of_window({col, static_cast<std::size_t>(count)});
      const Eigen::Index idx = static_cast<Eigen::Index>(b) * dim + d;
      out.moments.means[idx] = g.mu;
      out.moments.variances[idx] = g.sigma2;
    }
  }
  return out;
}

std::pair<MomentVector, LinearTape> linear_forward_moments(const WeightMatrix& w, const MomentVector& x) {
  MomentVector y;
  y.means = kernels::affine_t(w, x.means);
  y.variances = kernels::squared_affine_t(w.values, x.variances);
  LinearTape tape{x.means, x.variances, w.rows(), w.cols(), true, true};
  return {std::move(y), std::move(tape)};
}

std::pair<Vector, LinearTape> linear_forward(const WeightMatrix& w, const Vector& x) {
  Vector y = kernels::affine_t(w, x);
  LinearTape tape{x, Vector(), w.rows(), w.cols(), false, true};
  return {std::move(y), std::move(tape)};
}

MomentGrad linear_backward_accumulate(LinearTape& tape, const WeightMatrix& w, const Vector& grad_means,
                                      const Vector& grad_variances, Matrix& grad_w, Vector& grad_b,
                                      bool want_input_grad) {
  if (tape.rows != w.rows() || tape.cols != w.cols()) {
    throw UsageError("linear backward: weights do not match the recorded forward call");
  }
  check_grad_sizes("linear", tape.with_variance, w.cols(), grad_means, grad_variances);
  consume(tape.recorded, "linear");

  const Eigen::Index rows = w.rows();
  MomentGrad in;
  if (want_input_grad) {
    in.means = Vector::Zero(rows);
    if (tape.with_variance) in.variances = Vector::Zero(rows);
  }
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    const double gm = grad_means[j];
    const double gv = tape.with_variance ? grad_variances[j] : 0.0;
    const auto wj = w.values.col(j);
    grad_b[j] += gm;
    if (gm != 0.0) {
      grad_w.col(j) += gm * tape.input_means;
      if (want_input_grad) in.means += gm * wj;
    }
    if (gv != 0.0) {
      grad_w.col(j) += (2.0 * gv) * wj.cwiseProduct(tape.input_variances);
      if (want_input_grad) in.variances += gv * wj.cwiseProduct(wj);
    }
  }
  return in;
}

LinearGrads linear_backward(LinearTape& tape, const WeightMatrix& w, const Vector& grad_means,
                            const Vector& grad_variances) {
  LinearGrads g;
  g.weights = Matrix::Zero(w.rows(), w.cols());
  g.bias = Vector::Zero(w.cols());
  g.input = linear_backward_accumulate(tape, w, grad_means, grad_variances, g.weights, g.bias, true);
  return g;
}

std::pair<MomentVector, ReluTape> relu_forward_moments(const MomentVector& x) {
  auto [means, tape] = relu_forward(x.means);
  tape.with_variance = true;
  MomentVector y;
  y.means = std::move(means);
  y.variances = Vector(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y.variances[i] = tape.active[static_cast<std::size_t>(i)] ? x.variances[i] : 0.0;
  }
  return {std::move(y), std::move(tape)};
}

std::pair<Vector, ReluTape> relu_forward(const Vector& x) {
  ReluTape tape;
  tape.active.resize(static_cast<std::size_t>(x.size()));
  tape.recorded = true;
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool on = x[i] >= 0.0;
    tape.active[static_cast<std::size_t>(i)] = on;
    y[i] = on ? x[i] : 0.0;
  }
  return {std::move(y), std::move(tape)};
}

MomentGrad relu_backward(ReluTape& tape, const Vector& grad_means, const Vector& grad_variances) {
  const auto n = static_cast<Eigen::Index>(tape.active.size());
  check_grad_sizes("relu", tape.with_variance, n, grad_means, grad_variances);
  consume(tape.recorded, "relu");
  MomentGrad in;
  in.means = Vector(n);
  if (tape.with_variance) in.variances = Vector(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool on = tape.active[static_cast<std::size_t>(i)] != 0;
    in.means[i] = on ? grad_means[i] : 0.0;
    if (tape.with_variance) in.variances[i] = on ? grad_variances[i] : 0.0;
  }
  return in;
}

std::pair<Vector, L2NormTape> l2norm_forward(const Vector& x) {
  const double norm = std::sqrt(kernels::squared_norm(x.data(), x.size()));
  if (!(norm > 0.0)) throw DomainError("l2norm: mean vector has zero norm");
  L2NormTape tape;
  tape.input_means = x;
  tape.norm = norm;
  tape.output_means = x / norm;
  tape.recorded = true;
  Vector y = tape.output_means;
  return {std::move(y), std::move(tape)};
}

std::pair<MomentVector, L2NormTape> l2norm_forward_moments(const MomentVector& x) {
  auto [means, tape] = l2norm_forward(x.means);
  tape.with_variance = true;
  tape.input_variances = x.variances;
  MomentVector y;
  y.means = std::move(means);
  y.variances = x.variances / (tape.norm * tape.norm);
  return {std::move(y), std::move(tape)};
}

MomentGrad l2norm_backward(L2NormTape& tape, const Vector& grad_means, const Vector& grad_variances) {
  const Eigen::Index n = tape.input_means.size();
  check_grad_sizes("l2norm", tape.with_variance, n, grad_means, grad_variances);
  consume(tape.recorded, "l2norm");
  const double norm = tape.norm;
  const Vector& y = tape.output_means;
  MomentGrad in;
  // d(m/|m|): (g - y (y.g)) / |m|
  in.means = (grad_means - y * y.dot(grad_means)) / norm;
  if (tape.with_variance) {
    const double n2 = norm * norm;
    in.variances = grad_variances / n2;
    // v/|m|^2 depends on m through the norm: -2 (g_v . v) m / |m|^4
    const double coupling = grad_variances.dot(tape.input_variances);
    in.means -= (2.0 * coupling / (n2 * norm)) * y;
  }
  return in;
}

}  // namespace van
