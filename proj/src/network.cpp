// SPDX-License-Identifier: Apache-2.0
#include "van/network.hpp"

#include <cmath>
#include <random>

#include "van/errors.hpp"

namespace van {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::VanI: return "van_i";
    case Variant::VanO: return "van_o";
    case Variant::VanP: return "van_p";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "baseline") return Variant::Baseline;
  if (name == "van_i") return Variant::VanI;
  if (name == "van_o") return Variant::VanO;
  if (name == "van_p") return Variant::VanP;
  throw UsageError("unknown variant '" + std::string(name) + "' (expected baseline, van_i, van_o or van_p)");
}

void NetworkConfig::validate() const {
  if (dim < 1 || parts < 1 || hidden < 1 || classes < 1) {
    throw UsageError("NetworkConfig: D, k, hidden and C must all be >= 1");
  }
  if (!(sigma_t2 > 0.0)) throw UsageError("NetworkConfig: sigma_t2 must be positive");
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams z;
  z.fc1 = WeightMatrix::zeros(fc1.rows(), fc1.cols());
  z.fc2 = WeightMatrix::zeros(fc2.rows(), fc2.cols());
  if (var_head) z.var_head = WeightMatrix::zeros(var_head->rows(), var_head->cols());
  return z;
}

NetworkParams& NetworkParams::operator+=(const NetworkParams& o) {
  fc1.values += o.fc1.values;
  fc1.bias += o.fc1.bias;
  fc2.values += o.fc2.values;
  fc2.bias += o.fc2.bias;
  if (var_head) {
    var_head->values += o.var_head->values;
    var_head->bias += o.var_head->bias;
  }
  return *this;
}

NetworkParams& NetworkParams::operator*=(double s) {
  fc1.values *= s;
  fc1.bias *= s;
  fc2.values *= s;
  fc2.bias *= s;
  if (var_head) {
    var_head->values *= s;
    var_head->bias *= s;
  }
  return *this;
}

bool NetworkParams::all_finite() const {
  return fc1.all_finite() && fc2.all_finite() && (!var_head || var_head->all_finite());
}

bool NetworkParams::operator==(const NetworkParams& o) const {
  auto same = [](const WeightMatrix& a, const WeightMatrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a.values == b.values && a.bias == b.bias;
  };
  if (var_head.has_value() != o.var_head.has_value()) return false;
  return same(fc1, o.fc1) && same(fc2, o.fc2) && (!var_head || same(*var_head, *o.var_head));
}

namespace {

WeightMatrix uniform_layer(std::mt19937_64& rng, int fan_in, int fan_out) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-a, a);
  WeightMatrix w = WeightMatrix::zeros(fan_in, fan_out);
  // column by column, fixed order
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w.values(i, j) = dist(rng);
  }
  return w;
}

}  // namespace

NetworkParams build(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  NetworkParams p;
  p.fc1 = uniform_layer(rng, config.input_dim(), config.hidden);
  p.fc2 = uniform_layer(rng, config.hidden, config.num_outputs() * 3);
  if (config.variant == Variant::VanO) {
    p.var_head = uniform_layer(rng, config.hidden, config.num_outputs() * 2);
    p.var_head->bias.setConstant(std::log(config.sigma_t2));
  }
  return p;
}

std::int64_t param_count(const NetworkParams& params) {
  auto count = [](const WeightMatrix& w) {
    return static_cast<std::int64_t>(w.values.size() + w.bias.size());
  };
  return count(params.fc1) + count(params.fc2) + (params.var_head ? count(*params.var_head) : 0);
}

std::int64_t param_count(const NetworkConfig& config) {
  const std::int64_t in = config.input_dim();
  const std::int64_t h = config.hidden;
  const std::int64_t out = config.num_outputs();
  std::int64_t n = in * h + h + h * out * 3 + out * 3;
  if (config.variant == Variant::VanO) n += h * out * 2 + out * 2;
  return n;
}

namespace {

void check_shapes(const NetworkParams& params, const NetworkConfig& config) {
  if (params.fc1.rows() != config.input_dim() || params.fc1.cols() != config.hidden ||
      params.fc2.rows() != config.hidden || params.fc2.cols() != config.num_outputs() * 3) {
    throw UsageError("network: parameters do not match the configuration");
  }
  if ((config.variant == Variant::VanO) != params.var_head.has_value()) {
    throw UsageError("network: variance head must exist exactly for van_o");
  }
}

}  // namespace

std::pair<DetectionResult, ForwardTape> forward(const NetworkParams& params, const NetworkConfig& config,
                                                const PooledFeature& feature, Mode mode) {
  check_shapes(params, config);
  if (feature.size() != config.pooled_dim()) {
    throw UsageError("network: pooled feature has " + std::to_string(feature.size()) +
                     " entries, expected (k+2)*D = " + std::to_string(config.pooled_dim()));
  }
  ForwardTape tape;
  tape.variant = config.variant;
  tape.mode = mode;
  tape.recorded = true;

  const bool propagate = config.variant == Variant::VanP && mode == Mode::Train;
  const int outputs = config.num_outputs();

  if (propagate) {
    MomentVector x;
    if (kernels::squared_norm(feature.moments.means.data(), feature.size()) > 0.0) {
      std::tie(x, tape.norm) = l2norm_forward_moments(feature.moments);
    } else {
      tape.zero_input = true;
      x = MomentVector::zeros(feature.size());
    }
    auto [a, fc1_tape] = linear_forward_moments(params.fc1, x);
    auto [h, relu_tape] = relu_forward_moments(a);
    auto [o, fc2_tape] = linear_forward_moments(params.fc2, h);
    tape.fc1 = std::move(fc1_tape);
    tape.relu = std::move(relu_tape);
    tape.fc2 = std::move(fc2_tape);
    tape.outputs = std::move(o.means);
    tape.output_variances = std::move(o.variances);
  } else {
    Vector x;
    if (config.variant == Variant::VanI) {
      x.resize(2 * feature.size());
      x << feature.moments.means, feature.moments.variances;
    } else {
      x = feature.moments.means;
    }
    if (kernels::squared_norm(x.data(), x.size()) > 0.0) {
      std::tie(x, tape.norm) = l2norm_forward(x);
    } else {
      tape.zero_input = true;
    }
    auto [a, fc1_tape] = linear_forward(params.fc1, x);
    auto [h, relu_tape] = relu_forward(a);
    auto [o, fc2_tape] = linear_forward(params.fc2, h);
    tape.fc1 = std::move(fc1_tape);
    tape.relu = std::move(relu_tape);
    tape.fc2 = std::move(fc2_tape);
    tape.outputs = std::move(o);
    if (config.variant == Variant::VanO) {
      auto [z, head_tape] = linear_forward(*params.var_head, h);
      tape.head = std::move(head_tape);
      tape.log_variances = std::move(z);
    }
  }

  DetectionResult det;
  det.class_scores.resize(outputs);
  det.boundaries.resize(static_cast<std::size_t>(outputs));
  for (int c = 0; c < outputs; ++c) {
    det.class_scores[c] = tape.outputs[3 * c];
    for (int b = 0; b < 2; ++b) {
      double var = config.sigma_t2;
      if (propagate) {
        var = std::max(tape.output_variances[3 * c + 1 + b], kVarianceFloor);
      } else if (config.variant == Variant::VanO) {
        var = std::max(std::exp(tape.log_variances[2 * c + b]), kVarianceFloor);
      }
      det.boundaries[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)] = {tape.outputs[3 * c + 1 + b], var};
    }
  }
  return {std::move(det), std::move(tape)};
}

void backward(const NetworkParams& params, const NetworkConfig& config, ForwardTape& tape,
              const DetectionGrad& loss_grad, NetworkParams& grads) {
  if (!tape.recorded) throw UsageError("network backward: tape has no matching forward call");
  if (tape.mode != Mode::Train) throw UsageError("network backward: tape was recorded in test mode");
  if (tape.variant != config.variant) throw UsageError("network backward: tape variant mismatch");
  check_shapes(params, config);
  tape.recorded = false;

  const int outputs = config.num_outputs();
  const bool propagate = config.variant == Variant::VanP;

  Vector g_out(3 * outputs);
  Vector gv_out;
  if (propagate) gv_out = Vector::Zero(3 * outputs);
  for (int c = 0; c < outputs; ++c) {
    const auto cs = static_cast<std::size_t>(c);
    g_out[3 * c] = loss_grad.class_scores[c];
    for (int b = 0; b < 2; ++b) {
      const auto bs = static_cast<std::size_t>(b);
      g_out[3 * c + 1 + b] = loss_grad.boundary_means[cs][bs];
      // the floor is flat: no gradient below it
      if (propagate && tape.output_variances[3 * c + 1 + b] > kVarianceFloor) {
        gv_out[3 * c + 1 + b] = loss_grad.boundary_variances[cs][bs];
      }
    }
  }

  MomentGrad gh = linear_backward_accumulate(tape.fc2, params.fc2, g_out, gv_out, grads.fc2.values,
                                             grads.fc2.bias, true);
  if (config.variant == Variant::VanO) {
    Vector gz(2 * outputs);
    for (int c = 0; c < outputs; ++c) {
      for (int b = 0; b < 2; ++b) {
        const double z = tape.log_variances[2 * c + b];
        const double s2 = std::exp(z);
        // d sigma^2 / dz = sigma^2 above the floor
        gz[2 * c + b] = s2 > kVarianceFloor
                            ? loss_grad.boundary_variances[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)] * s2
                            : 0.0;
      }
    }
    MomentGrad gh_head = linear_backward_accumulate(tape.head, *params.var_head, gz, Vector(),
                                                    grads.var_head->values, grads.var_head->bias, true);
    gh.means += gh_head.means;
  }
  MomentGrad ga = relu_backward(tape.relu, gh.means, gh.variances);
  linear_backward_accumulate(tape.fc1, params.fc1, ga.means, ga.variances, grads.fc1.values, grads.fc1.bias,
                             false);
}

NetworkParams backward(const NetworkParams& params, const NetworkConfig& config, ForwardTape& tape,
                       const DetectionGrad& loss_grad) {
  NetworkParams grads = params.zeros_like();
  backward(params, config, tape, loss_grad, grads);
  return grads;
}

}  // namespace van
