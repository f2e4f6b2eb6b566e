// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "van/moments.hpp"

namespace van {

/// Output of variance-aware pooling: (k+2) blocks of D dimensions laid out as
/// [context-before | part_1 .. part_k | context-after].
struct PooledFeature {
  MomentVector moments;
  int parts = 0;
  int dim = 0;

  Eigen::Index size() const { return moments.size(); }
};

/// Sizes of k contiguous parts covering `length` units; the first
/// (length % k) parts receive one extra unit.
std::vector<int> part_sizes(int length, int k);

/// Variance-aware pooling over a window of unit features.
///
/// `units` holds ctx_before + T + ctx_after rows of D features; the middle T
/// rows are the proposal. Each part and each context window is reduced to its
/// per-dimension mean and population variance. Empty context windows yield a
/// zero block.
PooledFeature vap_pool(const Eigen::Ref<const Matrix>& units, int k, int ctx_before, int ctx_after);

/// Gradients with respect to a layer's input moments.
struct MomentGrad {
  Vector means;
  Vector variances;
};

struct LinearTape {
  Vector input_means;
  Vector input_variances;  // empty on the mean-only path
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool with_variance = false;
  bool recorded = false;
};

struct ReluTape {
  std::vector<unsigned char> active;  // mean >= 0
  bool with_variance = false;
  bool recorded = false;
};

struct L2NormTape {
  Vector input_means;
  Vector input_variances;
  Vector output_means;
  double norm = 0.0;
  bool with_variance = false;
  bool recorded = false;
};

struct LinearGrads {
  MomentGrad input;
  Matrix weights;
  Vector bias;
};

// Moment-propagating forward passes.
std::pair<MomentVector, LinearTape> linear_forward_moments(const WeightMatrix& w, const MomentVector& x);
std::pair<MomentVector, ReluTape> relu_forward_moments(const MomentVector& x);
std::pair<MomentVector, L2NormTape> l2norm_forward_moments(const MomentVector& x);

// Mean-only counterparts; they share kernels with the moment path so equal
// means give bitwise-equal outputs.
std::pair<Vector, LinearTape> linear_forward(const WeightMatrix& w, const Vector& x);
std::pair<Vector, ReluTape> relu_forward(const Vector& x);
std::pair<Vector, L2NormTape> l2norm_forward(const Vector& x);

// Backward passes consume their tape: a second call on the same tape throws
// UsageError. grad_variances must be empty for a mean-only tape.
LinearGrads linear_backward(LinearTape& tape, const WeightMatrix& w, const Vector& grad_means,
                            const Vector& grad_variances = {});
MomentGrad relu_backward(ReluTape& tape, const Vector& grad_means, const Vector& grad_variances = {});
MomentGrad l2norm_backward(L2NormTape& tape, const Vector& grad_means, const Vector& grad_variances = {});

/// Accumulating linear backward used by the network: adds parameter gradients
/// into grad_w / grad_b and returns input gradients only when requested.
MomentGrad linear_backward_accumulate(LinearTape& tape, const WeightMatrix& w, const Vector& grad_means,
                                      const Vector& grad_variances, Matrix& grad_w, Vector& grad_b,
                                      bool want_input_grad);

}  // namespace van
