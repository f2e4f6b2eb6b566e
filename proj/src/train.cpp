// SPDX-License-Identifier: Apache-2.0
#include "van/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "van/errors.hpp"

namespace van {

std::string to_string(Optimizer o) { return o == Optimizer::Sgd ? "sgd" : "sgd-momentum"; }

Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::Sgd;
  if (name == "sgd-momentum") return Optimizer::SgdMomentum;
  throw UsageError("unknown optimizer '" + name + "' (expected sgd or sgd-momentum)");
}

void TrainConfig::validate() const {
  if (batch < 1) throw UsageError("TrainConfig: batch size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("TrainConfig: learning rate must be finite and >= 0");
  if (iterations < 0) throw UsageError("TrainConfig: iterations must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("TrainConfig: momentum must be in [0, 1)");
  if (!(lambda_reg >= 0.0)) throw UsageError("TrainConfig: lambda_reg must be >= 0");
  if (cascade_steps < 1) throw UsageError("TrainConfig: cascade steps must be >= 1");
}

std::vector<TrainingSample> make_samples(const Dataset& data, int k) {
  std::vector<TrainingSample> out;
  out.reserve(data.proposals.size());
  for (const Proposal& p : data.proposals) {
    TrainingSample s;
    s.feature = featurize(data.sequences.at(p.sequence), p, k);
    s.assignment.label = p.label;
    s.assignment.target = p.target;
    out.push_back(std::move(s));
  }
  return out;
}

TrainResult train(NetworkParams params, const NetworkConfig& net, const std::vector<TrainingSample>& samples,
                  const TrainConfig& config, const IterationCallback& on_iteration) {
  config.validate();
  if (samples.empty()) throw UsageError("train: empty dataset");

  std::mt19937_64 rng(config.seed ^ 0x7A11ull);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  NetworkParams velocity = params.zeros_like();
  NetworkParams grads = params.zeros_like();
  const double momentum = config.optimizer == Optimizer::SgdMomentum ? config.momentum : 0.0;
  const int outputs = net.num_outputs();

  TrainResult result;
  result.curve.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    grads *= 0.0;
    LossBreakdown mean;
    mean.lambda_reg = config.lambda_reg;
    for (int b = 0; b < config.batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const TrainingSample& sample = samples[order[cursor++]];
      auto [det, tape] = forward(params, net, sample.feature, Mode::Train);
      DetectionGrad dg = DetectionGrad::zeros(outputs);
      const LossBreakdown loss = combined_loss_with_grad(det, sample.assignment, config.lambda_reg, dg);
      mean.classification += loss.classification;
      mean.regression += loss.regression;
      backward(params, net, tape, dg, grads);
    }
    const double inv = 1.0 / config.batch;
    mean.classification *= inv;
    mean.regression *= inv;
    mean.total = mean.classification + config.lambda_reg * mean.regression;
    if (!std::isfinite(mean.total)) {
      std::ostringstream msg;
      msg << "training diverged at iteration " << it << ": cls=" << mean.classification
          << " reg=" << mean.regression;
      throw DivergenceError(msg.str());
    }
    result.curve.push_back(mean);
    if (on_iteration) on_iteration(it, mean);

    grads *= inv;
    velocity *= momentum;
    velocity += grads;
    NetworkParams step = velocity;
    step *= -config.lr;
    params += step;
    if (!params.all_finite()) {
      throw DivergenceError("training diverged at iteration " + std::to_string(it) + ": non-finite parameters");
    }
  }
  result.params = std::move(params);
  return result;
}

LossBreakdown evaluate_loss(const NetworkParams& params, const NetworkConfig& net,
                            const std::vector<TrainingSample>& samples, double lambda_reg, Mode mode) {
  LossBreakdown mean;
  mean.lambda_reg = lambda_reg;
  if (samples.empty()) return mean;
  for (const TrainingSample& s : samples) {
    const auto [det, tape] = forward(params, net, s.feature, mode);
    const LossBreakdown l = combined_loss(det, s.assignment, lambda_reg);
    mean.classification += l.classification;
    mean.regression += l.regression;
  }
  mean.classification /= static_cast<double>(samples.size());
  mean.regression /= static_cast<double>(samples.size());
  mean.total = mean.classification + lambda_reg * mean.regression;
  return mean;
}

}  // namespace van
