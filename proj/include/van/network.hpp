// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "van/layers.hpp"
#include "van/losses.hpp"

namespace van {

enum class Variant { Baseline, VanI, VanO, VanP };
enum class Mode { Train, Test };

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);

struct NetworkConfig {
  Variant variant = Variant::Baseline;
  int dim = 2048;      // D, unit feature dimension
  int parts = 3;       // k
  int hidden = 1000;   // FC1 width
  int classes = 20;    // C, excluding background
  double sigma_t2 = kDefaultSigmaT2;

  void validate() const;
  int pooled_dim() const { return (parts + 2) * dim; }
  /// Width of FC1's input: pooled means, plus pooled variances for VAN-i.
  int input_dim() const { return variant == Variant::VanI ? 2 * pooled_dim() : pooled_dim(); }
  int num_outputs() const { return classes + 1; }
};

/// Trainable parameters. FC2 emits (C+1) x 3 values laid out per class as
/// [logit, start offset, end offset]; the VAN-o head emits (C+1) x 2 log-variances.
struct NetworkParams {
  WeightMatrix fc1;
  WeightMatrix fc2;
  std::optional<WeightMatrix> var_head;

  /// Same shapes, all zeros. Used as a gradient accumulator.
  NetworkParams zeros_like() const;
  NetworkParams& operator+=(const NetworkParams& other);
  NetworkParams& operator*=(double s);
  bool all_finite() const;
  bool operator==(const NetworkParams& other) const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, and a
/// VAN-o head bias of log(sigma_t2). Deterministic in seed.
NetworkParams build(const NetworkConfig& config, std::uint64_t seed);

std::int64_t param_count(const NetworkParams& params);
/// Count implied by the configuration alone, without allocating.
std::int64_t param_count(const NetworkConfig& config);

struct ForwardTape {
  Variant variant = Variant::Baseline;
  Mode mode = Mode::Test;
  bool recorded = false;
  bool zero_input = false;  // pooled means were all zero; normalization skipped

  L2NormTape norm;
  LinearTape fc1;
  ReluTape relu;
  LinearTape fc2;
  LinearTape head;

  Vector outputs;           // FC2 means
  Vector output_variances;  // VAN-p train mode only, before the variance floor
  Vector log_variances;     // VAN-o only
};

/// Runs the second-stage network on one pooled proposal feature.
///
/// VAN-p propagates variances only in Mode::Train; in Mode::Test every variant
/// except VAN-o runs the plain mean path, so VAN-p matches the baseline
/// bit-for-bit given the same parameters.
std::pair<DetectionResult, ForwardTape> forward(const NetworkParams& params, const NetworkConfig& config,
                                                const PooledFeature& feature, Mode mode);

/// Accumulates parameter gradients of the loss into `grads`, which must have
/// the shape of params (see NetworkParams::zeros_like). Consumes the tape.
void backward(const NetworkParams& params, const NetworkConfig& config, ForwardTape& tape,
              const DetectionGrad& loss_grad, NetworkParams& grads);

/// Convenience wrapper returning a fresh gradient set.
NetworkParams backward(const NetworkParams& params, const NetworkConfig& config, ForwardTape& tape,
                       const DetectionGrad& loss_grad);

/// Checkpoint container; see docs/FORMATS.md.
struct Checkpoint {
  NetworkConfig config;
  std::uint64_t seed = 0;
  NetworkParams params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace van
