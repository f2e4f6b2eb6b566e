// SPDX-License-Identifier: Apache-2.0
#include "van/verify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "van/errors.hpp"
#include "van/layers.hpp"
#include "van/losses.hpp"
#include "van/oracle.hpp"
#include "van/synth.hpp"

namespace van::verify {

namespace {

constexpr double kSeBound = 4.0;
constexpr double kGradTolerance = 1e-4;
constexpr double kFdStep = 1e-5;

CheckRow row(std::string group, std::string name, double measured, double bound, bool lower_is_better = true) {
  CheckRow r{std::move(group), std::move(name), measured, bound, true, true};
  r.pass = lower_is_better ? measured <= bound : measured >= bound;
  return r;
}

CheckRow report_only(std::string group, std::string name, double measured) {
  return {std::move(group), std::move(name), measured, 0.0, true, false};
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = u(rng);
  }
  return m;
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

double z_score(double analytic, double estimate, double se) {
  if (se == 0.0) return analytic == estimate ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(analytic - estimate) / se;
}

}  // namespace

const std::vector<std::string>& groups() {
  static const std::vector<std::string> g{"linear", "relu", "l2norm", "kl", "grad", "params"};
  return g;
}

std::vector<CheckRow> check_linear(std::uint64_t seed, int layers, std::int64_t samples) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dims(2, 5);
  double worst_mean = 0.0;
  double worst_var = 0.0;
  double worst_bias = 0.0;
  for (int l = 0; l < layers; ++l) {
    const int in = dims(rng);
    const int out = dims(rng);
    const WeightMatrix w(random_matrix(rng, in, out, 2.0), random_vector(rng, out, -1.0, 1.0));
    const MomentVector x(random_vector(rng, in, -2.0, 2.0), random_vector(rng, in, 0.05, 3.0));
    const auto [y, tape] = linear_forward_moments(w, x);
    const auto mc = oracle::mc_propagate([&](const Vector& s) { return kernels::affine_t(w, s); }, x, samples,
                                         derive_seed(seed, static_cast<std::uint64_t>(l)));
    for (int j = 0; j < out; ++j) {
      worst_mean = std::max(worst_mean, z_score(y.means[j], mc[j].mean, mc[j].se_mean));
      worst_var = std::max(worst_var, z_score(y.variances[j], mc[j].variance, mc[j].se_variance));
    }
    // bias shifts means only
    WeightMatrix shifted = w;
    shifted.bias.array() += 3.0;
    const auto [y2, tape2] = linear_forward_moments(shifted, x);
    worst_bias = std::max(worst_bias, (y2.variances - y.variances).cwiseAbs().maxCoeff());
  }
  return {row("linear", "affine means vs Monte Carlo (max |z|)", worst_mean, kSeBound),
          row("linear", "affine variances vs Monte Carlo (max |z|)", worst_var, kSeBound),
          row("linear", "bias change alters variances (max abs)", worst_bias, 0.0)};
}

std::vector<CheckRow> check_relu(std::uint64_t seed, std::int64_t samples) {
  std::vector<CheckRow> rows;
  // 20 x 20 grid over mean and variance
  double worst_regime = 0.0;
  double worst_clipping = 0.0;
  double worst_clipping_var = 0.0;
  int regime_points = 0;
  for (int a = 0; a < 20; ++a) {
    const double sigma2 = 0.05 * std::pow(80.0, a / 19.0);  // 0.05 .. 4
    const double sigma = std::sqrt(sigma2);
    for (int b = 0; b < 20; ++b) {
      const double mu = -6.0 + 18.0 * b / 19.0;  // -6 .. 12
      const GaussianScalar exact = oracle::relu_exact_moments({mu, sigma2});
      const MomentVector x(Vector::Constant(1, mu), Vector::Constant(1, sigma2));
      const auto [approx, tape] = relu_forward_moments(x);
      const double ratio = mu / sigma;
      if (ratio >= 3.0) {
        ++regime_points;
        worst_regime = std::max(worst_regime, oracle::relative_error(approx.means[0], exact.mu, 0.0));
      } else if (ratio >= -2.0 && ratio <= 2.0) {
        worst_clipping = std::max(worst_clipping, std::abs(approx.means[0] - exact.mu) / sigma);
        worst_clipping_var = std::max(worst_clipping_var, std::abs(approx.variances[0] - exact.sigma2) / sigma2);
      }
    }
  }
  rows.push_back(row("relu", "rule vs exact mean, mu >= 3 sigma (max rel err)", worst_regime, 0.01));
  rows.push_back(row("relu", "grid points in the mu >= 3 sigma regime", regime_points, 1.0, false));
  rows.push_back(report_only("relu", "rule vs exact mean, |mu| <= 2 sigma (max err / sigma)", worst_clipping));
  rows.push_back(report_only("relu", "rule vs exact variance, |mu| <= 2 sigma (max err / sigma^2)", worst_clipping_var));

  // error vanishes as mu/sigma grows
  double prev = std::numeric_limits<double>::infinity();
  bool decreasing = true;
  double last = 0.0;
  for (double ratio : {3.0, 4.0, 5.0, 6.0, 8.0}) {
    const GaussianScalar exact = oracle::relu_exact_moments({ratio, 1.0});
    last = oracle::relative_error(ratio, exact.mu, 0.0);
    decreasing = decreasing && last < prev;
    prev = last;
  }
  rows.push_back(row("relu", "rule error decreasing in mu/sigma (1 = yes)", decreasing ? 1.0 : 0.0, 1.0, false));
  rows.push_back(row("relu", "rule relative mean error at mu = 8 sigma", last, 1e-12));

  // exact closed form against sampling of the true rectifier
  double worst_mean = 0.0;
  double worst_var = 0.0;
  int idx = 0;
  for (double mu : {-1.5, -0.3, 0.0, 0.7, 2.0}) {
    for (double s2 : {0.25, 1.0, 2.5}) {
      const GaussianScalar exact = oracle::relu_exact_moments({mu, s2});
      const MomentVector x(Vector::Constant(1, mu), Vector::Constant(1, s2));
      const auto mc = oracle::mc_propagate([](const Vector& v) { return Vector(v.cwiseMax(0.0)); }, x, samples,
                                           derive_seed(seed, static_cast<std::uint64_t>(idx++)));
      worst_mean = std::max(worst_mean, z_score(exact.mu, mc[0].mean, mc[0].se_mean));
      worst_var = std::max(worst_var, z_score(exact.sigma2, mc[0].variance, mc[0].se_variance));
    }
  }
  rows.push_back(row("relu", "exact rectified mean vs Monte Carlo (max |z|)", worst_mean, kSeBound));
  rows.push_back(row("relu", "exact rectified variance vs Monte Carlo (max |z|)", worst_var, kSeBound));
  return rows;
}

std::vector<CheckRow> check_l2norm(std::uint64_t seed, std::int64_t samples) {
  // variances only reported, the rule ignores cross terms
  std::mt19937_64 rng(seed);
  const MomentVector x(random_vector(rng, 6, 1.0, 3.0), random_vector(rng, 6, 1e-4, 4e-4));
  const auto [y, tape] = l2norm_forward_moments(x);
  const auto mc = oracle::mc_propagate([](const Vector& v) { return Vector(v / v.norm()); }, x, samples, seed);
  double worst_mean = 0.0;
  double ratio_spread = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    worst_mean = std::max(worst_mean, std::abs(y.means[i] - mc[static_cast<std::size_t>(i)].mean));
    ratio_spread = std::max(ratio_spread, std::abs(std::log(y.variances[i] / mc[static_cast<std::size_t>(i)].variance)));
  }
  return {row("l2norm", "normalised means vs Monte Carlo, small noise (max abs)", worst_mean, 1e-3),
          report_only("l2norm", "log ratio rule variance / sampled variance (max)", ratio_spread)};
}

std::vector<CheckRow> check_kl(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mu(-2.0, 2.0);
  std::uniform_real_distribution<double> var(0.1, 4.0);
  const double st2 = kDefaultSigmaT2;

  double worst_numeric = 0.0;
  double worst_swap = 0.0;
  double printed_gap = 0.0;
  double min_kl = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const GaussianScalar q{mu(rng), var(rng)};
    const GaussianScalar p{mu(rng), var(rng)};
    const double numeric = oracle::kl_numeric(q, p);
    worst_numeric = std::max(worst_numeric, std::abs(numeric - kl_standard(q, p)));
    worst_swap = std::max(worst_swap, std::abs(kl_gaussian(q, p) - oracle::kl_numeric(p, q)));
    printed_gap = std::max(printed_gap, std::abs(kl_gaussian(q, p) - numeric));
    min_kl = std::min({min_kl, kl_gaussian(q, p), kl_standard(q, p)});
  }

  double worst_l1 = 0.0;
  double worst_cont = 0.0;
  for (int i = 0; i < 100; ++i) {
    const GaussianScalar t{mu(rng), st2};
    const GaussianScalar p{mu(rng), st2};
    const double expected = std::abs(t.mu - p.mu) / std::sqrt(2.0 * st2);
    worst_l1 = std::max(worst_l1, std::abs(kl_regression_loss(t, p) - expected));
    const GaussianScalar above{p.mu, st2 + 1e-8};
    worst_cont = std::max(worst_cont, std::abs(kl_regression_loss(t, above) - kl_regression_loss(t, p)));
  }

  return {row("kl", "numeric KL(q||p) vs textbook closed form, 100 pairs (max abs)", worst_numeric, 1e-6),
          row("kl", "printed form kl(q,p) vs numeric KL(p||q) (max abs)", worst_swap, 1e-6),
          report_only("kl", "printed form kl(q,p) vs numeric KL(q||p) (max abs)", printed_gap),
          row("kl", "min KL over random pairs", min_kl, 0.0, false),
          row("kl", "loss at sigma_p = sigma_t vs scaled L1 (max abs)", worst_l1, 1e-12),
          row("kl", "loss jump across the branch at eps = 1e-8 (max abs)", worst_cont, 1e-3)};
}

namespace {

// Scalar objective: random projection of both output streams.
double project(const MomentVector& y, const Vector& rm, const Vector& rv) { return rm.dot(y.means) + rv.dot(y.variances); }

struct LayerCase {
  std::string name;
  MomentForward fwd;
  MomentBackward bwd;
};

}  // namespace

double layer_gradient_check(const MomentForward& forward, const MomentBackward& backward, const MomentVector& x,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const MomentVector y0 = forward(x);
  const Vector rm = random_vector(rng, y0.size(), -1.0, 1.0);
  const Vector rv = random_vector(rng, y0.size(), -1.0, 1.0);
  const Eigen::Index n = x.size();
  Vector point(2 * n);
  point << x.means, x.variances;
  auto f = [&](const Vector& p) {
    return project(forward(MomentVector(p.head(n), p.tail(n).cwiseMax(0.0))), rm, rv);
  };
  const Vector fd = oracle::fd_gradient(f, point, kFdStep);
  const MomentGrad g = backward(x, rm, rv);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    worst = std::max(worst, oracle::relative_error(g.means[i], fd[i]));
    worst = std::max(worst, oracle::relative_error(g.variances[i], fd[n + i]));
  }
  return worst;
}

GradientCheck network_gradient_check(Variant variant, std::uint64_t seed, int min_coordinates) {
  std::mt19937_64 rng(seed);
  NetworkConfig cfg;
  cfg.variant = variant;
  cfg.dim = 4;
  cfg.parts = 2;
  cfg.hidden = 12;
  cfg.classes = 3;
  NetworkParams params = build(cfg, seed);
  // Larger weights and input variances push VAN-p outputs above sigma_t^2 so
  // the variance path is exercised; the VAN-o head is biased likewise.
  params.fc1.values *= 2.0;
  params.fc2.values *= 2.0;
  params.fc1.bias = random_vector(rng, cfg.hidden, -0.2, 0.2);
  params.fc2.bias = random_vector(rng, cfg.num_outputs() * 3, -0.2, 0.2);
  if (params.var_head) params.var_head->bias.array() += random_vector(rng, cfg.num_outputs() * 2, 0.3, 2.0).array();

  struct Sample {
    PooledFeature feature;
    Assignment assignment;
  };
  std::vector<Sample> batch;
  std::uniform_int_distribution<int> label(0, cfg.classes);
  std::uniform_real_distribution<double> offset(-0.6, 0.6);
  for (int i = 0; i < 8; ++i) {
    Sample s;
    s.feature.parts = cfg.parts;
    s.feature.dim = cfg.dim;
    s.feature.moments = MomentVector(random_vector(rng, cfg.pooled_dim(), -1.0, 1.0),
                                     random_vector(rng, cfg.pooled_dim(), 5.0, 60.0));
    s.assignment.label = label(rng);
    if (i < 6 && s.assignment.label == 0) s.assignment.label = 1 + i % cfg.classes;
    if (s.assignment.label != 0) {
      s.assignment.target = RegressionTarget{{offset(rng), cfg.sigma_t2}, {offset(rng), cfg.sigma_t2}};
    }
    batch.push_back(std::move(s));
  }

  int kl_terms = 0;
  int reg_terms = 0;
  auto loss_of = [&](const NetworkParams& p) {
    double total = 0.0;
    for (const Sample& s : batch) total += combined_loss(forward(p, cfg, s.feature, Mode::Train).first, s.assignment, 1.0).total;
    return total / static_cast<double>(batch.size());
  };

  NetworkParams grads = params.zeros_like();
  for (const Sample& s : batch) {
    auto [det, tape] = forward(params, cfg, s.feature, Mode::Train);
    DetectionGrad dg = DetectionGrad::zeros(cfg.num_outputs());
    combined_loss_with_grad(det, s.assignment, 1.0, dg);
    backward(params, cfg, tape, dg, grads);
    if (s.assignment.label != 0) {
      for (const auto& g : det.boundaries[static_cast<std::size_t>(s.assignment.label)]) {
        ++reg_terms;
        if (g.sigma2 > cfg.sigma_t2) ++kl_terms;
      }
    }
  }
  grads *= 1.0 / static_cast<double>(batch.size());

  // stratified coordinates: some from every tensor, the rest from the weights
  std::vector<std::int64_t> coords;
  std::int64_t offset_idx = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> tensors;  // (start, size)
  auto add_layer = [&](const WeightMatrix& w) {
    tensors.emplace_back(offset_idx, w.values.size());
    offset_idx += w.values.size();
    tensors.emplace_back(offset_idx, w.bias.size());
    offset_idx += w.bias.size();
  };
  add_layer(params.fc1);
  add_layer(params.fc2);
  if (params.var_head) add_layer(*params.var_head);
  std::set<std::int64_t> chosen;
  for (const auto& [start, size] : tensors) {
    std::uniform_int_distribution<std::int64_t> pick(0, size - 1);
    for (int i = 0; i < std::min<std::int64_t>(size, 15); ++i) chosen.insert(start + pick(rng));
  }
  std::uniform_int_distribution<std::int64_t> any(0, offset_idx - 1);
  while (static_cast<int>(chosen.size()) < min_coordinates) chosen.insert(any(rng));
  coords.assign(chosen.begin(), chosen.end());

  double worst = 0.0;
  NetworkParams probe = params;
  for (std::int64_t c : coords) {
    double& slot = oracle::flat_at(probe, c);
    const double orig = slot;
    slot = orig + kFdStep;
    const double up = loss_of(probe);
    slot = orig - kFdStep;
    const double down = loss_of(probe);
    slot = orig;
    const double fd = (up - down) / (2.0 * kFdStep);
    worst = std::max(worst, oracle::relative_error(oracle::flat_at(grads, c), fd));
  }
  return {worst, static_cast<int>(coords.size()),
          reg_terms > 0 ? static_cast<double>(kl_terms) / reg_terms : 0.0};
}

std::vector<CheckRow> check_gradients(std::uint64_t seed, int coordinates) {
  std::mt19937_64 rng(seed);
  std::vector<CheckRow> rows;

  const WeightMatrix w(random_matrix(rng, 7, 5, 1.0), random_vector(rng, 5, -0.5, 0.5));
  const std::vector<LayerCase> cases{
      {"linear",
       [&](const MomentVector& x) { return linear_forward_moments(w, x).first; },
       [&](const MomentVector& x, const Vector& gm, const Vector& gv) {
         auto [y, tape] = linear_forward_moments(w, x);
         return linear_backward(tape, w, gm, gv).input;
       }},
      {"relu",
       [](const MomentVector& x) { return relu_forward_moments(x).first; },
       [](const MomentVector& x, const Vector& gm, const Vector& gv) {
         auto [y, tape] = relu_forward_moments(x);
         return relu_backward(tape, gm, gv);
       }},
      {"l2norm",
       [](const MomentVector& x) { return l2norm_forward_moments(x).first; },
       [](const MomentVector& x, const Vector& gm, const Vector& gv) {
         auto [y, tape] = l2norm_forward_moments(x);
         return l2norm_backward(tape, gm, gv);
       }},
  };
  for (const LayerCase& lc : cases) {
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      // keep means away from the ReLU kink
      Vector m = random_vector(rng, 7, 0.2, 2.0);
      for (Eigen::Index i = 0; i < m.size(); i += 2) m[i] = -m[i];
      const MomentVector x(m, random_vector(rng, 7, 0.1, 2.0));
      worst = std::max(worst, layer_gradient_check(lc.fwd, lc.bwd, x, rng()));
    }
    rows.push_back(row("grad", lc.name + " layer input gradients vs FD (max rel err)", worst, kGradTolerance));
  }

  // linear parameter gradients, both streams
  {
    const MomentVector x(random_vector(rng, 7, -1.0, 1.0), random_vector(rng, 7, 0.1, 2.0));
    const Vector rm = random_vector(rng, 5, -1.0, 1.0);
    const Vector rv = random_vector(rng, 5, -1.0, 1.0);
    auto [y, tape] = linear_forward_moments(w, x);
    const LinearGrads g = linear_backward(tape, w, rm, rv);
    Vector flat(w.values.size() + w.bias.size());
    flat << w.values.reshaped(), w.bias;
    auto f = [&](const Vector& p) {
      const WeightMatrix wp(p.head(w.values.size()).reshaped(w.rows(), w.cols()), p.tail(w.bias.size()));
      return project(linear_forward_moments(wp, x).first, rm, rv);
    };
    const Vector fd = oracle::fd_gradient(f, flat, kFdStep);
    double worst = 0.0;
    const Vector ga = g.weights.reshaped();
    for (Eigen::Index i = 0; i < ga.size(); ++i) worst = std::max(worst, oracle::relative_error(ga[i], fd[i]));
    for (Eigen::Index i = 0; i < g.bias.size(); ++i) {
      worst = std::max(worst, oracle::relative_error(g.bias[i], fd[ga.size() + i]));
    }
    rows.push_back(row("grad", "linear layer parameter gradients vs FD (max rel err)", worst, kGradTolerance));
  }

  for (Variant v : {Variant::Baseline, Variant::VanI, Variant::VanO, Variant::VanP}) {
    const GradientCheck gc = network_gradient_check(v, derive_seed(seed, static_cast<std::uint64_t>(v) + 100), coordinates);
    rows.push_back(row("grad", to_string(v) + " network gradient vs FD (max rel err)", gc.worst_relative_error,
                       kGradTolerance));
    rows.push_back(row("grad", to_string(v) + " coordinates checked", gc.coordinates, coordinates, false));
    if (v == Variant::VanP || v == Variant::VanO) {
      rows.push_back(row("grad", to_string(v) + " share of regression terms in the KL branch",
                         gc.kl_branch_fraction, 0.25, false));
    }
  }
  return rows;
}

std::vector<CheckRow> check_params() {
  NetworkConfig cfg;  // D = 2048, k = 3, hidden = 1000, C = 20
  auto count = [&](Variant v) {
    NetworkConfig c = cfg;
    c.variant = v;
    return static_cast<double>(param_count(c));
  };
  const double base = count(Variant::Baseline);
  const double head = static_cast<double>(cfg.hidden) * cfg.num_outputs() * 2 + cfg.num_outputs() * 2;
  return {row("params", "|count(van_p) - count(baseline)|", std::abs(count(Variant::VanP) - base), 0.0),
          row("params", "count(van_i) / count(baseline)", count(Variant::VanI) / base, 1.9, false),
          row("params", "|count(van_o) - count(baseline) - head size|",
              std::abs(count(Variant::VanO) - base - head), 0.0),
          report_only("params", "baseline parameter count", base)};
}

std::vector<CheckRow> run(const VerifyOptions& options) {
  const auto& known = groups();
  if (!options.only.empty() && std::find(known.begin(), known.end(), options.only) == known.end()) {
    throw UsageError("verify: unknown check group '" + options.only + "'");
  }
  auto wanted = [&](const std::string& g) { return options.only.empty() || options.only == g; };
  std::vector<CheckRow> rows;
  auto append = [&](std::vector<CheckRow> r) { rows.insert(rows.end(), r.begin(), r.end()); };
  if (wanted("linear")) append(check_linear(options.seed, options.affine_layers, options.mc_samples));
  if (wanted("relu")) append(check_relu(options.seed, options.mc_samples));
  if (wanted("l2norm")) append(check_l2norm(options.seed, options.mc_samples));
  if (wanted("kl")) append(check_kl(options.seed));
  if (wanted("grad")) append(check_gradients(options.seed, options.fd_coordinates));
  if (wanted("params")) append(check_params());
  return rows;
}

bool all_passed(const std::vector<CheckRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return !r.asserted || r.pass; });
}

std::string to_csv(const std::vector<CheckRow>& rows) {
  auto num = [](double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
  };
  std::ostringstream os;
  os << "group,name,measured,bound,status\n";
  for (const CheckRow& r : rows) {
    os << r.group << ",\"" << r.name << "\"," << num(r.measured) << "," << (r.asserted ? num(r.bound) : "")
       << "," << (r.asserted ? (r.pass ? "pass" : "FAIL") : "report") << "\n";
  }
  return os.str();
}

}  // namespace van::verify
