// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "van/network.hpp"

namespace van::verify {

/// One line of the verification report. Rows with asserted == false are
/// informational and never fail the run.
struct CheckRow {
  std::string group;
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = true;
  bool asserted = true;
};

struct VerifyOptions {
  std::string only;  // empty = every group
  std::uint64_t seed = 1;
  std::int64_t mc_samples = 100000;
  int affine_layers = 50;
  int fd_coordinates = 100;
};

const std::vector<std::string>& groups();

/// Linear moment propagation against Monte Carlo, in units of standard errors.
std::vector<CheckRow> check_linear(std::uint64_t seed, int layers, std::int64_t samples);
/// Mean-only ReLU rule against exact rectified-Gaussian moments, plus the
/// exact closed form against Monte Carlo.
std::vector<CheckRow> check_relu(std::uint64_t seed, std::int64_t samples);
/// L2 normalisation variance scaling against Monte Carlo of the sampled means.
std::vector<CheckRow> check_l2norm(std::uint64_t seed, std::int64_t samples);
/// KL closed forms, numeric integration, and the regression-loss identities.
std::vector<CheckRow> check_kl(std::uint64_t seed);
/// Layer and whole-network analytic gradients against central differences.
std::vector<CheckRow> check_gradients(std::uint64_t seed, int coordinates);
/// Parameter-count relationships between the variants.
std::vector<CheckRow> check_params();

using MomentForward = std::function<MomentVector(const MomentVector&)>;
using MomentBackward = std::function<MomentGrad(const MomentVector&, const Vector& grad_means, const Vector& grad_variances)>;

/// Worst relative error between `backward` and central differences of a
/// random projection of `forward`'s two output streams, at input x.
double layer_gradient_check(const MomentForward& forward, const MomentBackward& backward, const MomentVector& x,
                            std::uint64_t seed);

/// Full-network gradient check for one variant; returns the worst relative
/// error over the sampled coordinates and the number of coordinates checked.
struct GradientCheck {
  double worst_relative_error = 0.0;
  int coordinates = 0;
  double kl_branch_fraction = 0.0;  // share of regression terms above sigma_t^2
};
GradientCheck network_gradient_check(Variant variant, std::uint64_t seed, int min_coordinates);

std::vector<CheckRow> run(const VerifyOptions& options);
bool all_passed(const std::vector<CheckRow>& rows);
std::string to_csv(const std::vector<CheckRow>& rows);

}  // namespace van::verify
