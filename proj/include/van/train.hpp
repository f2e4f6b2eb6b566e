// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "van/network.hpp"
#include "van/synth.hpp"

namespace van {

enum class Optimizer { Sgd, SgdMomentum };

std::string to_string(Optimizer o);
Optimizer parse_optimizer(const std::string& name);

struct TrainConfig {
  int batch = 128;
  double lr = 1e-3;
  int iterations = 5000;
  Optimizer optimizer = Optimizer::SgdMomentum;
  double momentum = 0.9;
  double lambda_reg = 1.0;
  std::uint64_t seed = 0;
  int cascade_steps = 2;

  void validate() const;
};

/// A pooled proposal with its label and regression target, ready for training.
struct TrainingSample {
  PooledFeature feature;
  Assignment assignment;
};

std::vector<TrainingSample> make_samples(const Dataset& data, int k);

struct TrainResult {
  NetworkParams params;
  std::vector<LossBreakdown> curve;  // batch-mean losses, one per iteration
};

using IterationCallback = std::function<void(int iteration, const LossBreakdown& loss)>;

/// Mini-batch gradient descent on the mean combined loss. Batches walk a
/// seeded permutation of the samples, reshuffled every epoch. Throws
/// DivergenceError on a non-finite loss or parameter.
TrainResult train(NetworkParams params, const NetworkConfig& net, const std::vector<TrainingSample>& samples,
                  const TrainConfig& config, const IterationCallback& on_iteration = {});

/// Mean loss over a sample set, without gradients.
LossBreakdown evaluate_loss(const NetworkParams& params, const NetworkConfig& net,
                            const std::vector<TrainingSample>& samples, double lambda_reg, Mode mode);

}  // namespace van
