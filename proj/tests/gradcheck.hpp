#pragma once

// Finite-difference check of the full training loss gradient through the
// network, shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lvo/gaussian_loss.hpp"
#include "lvo/network.hpp"
#include "oracles.hpp"

namespace gradcheck {

struct Problem {
  lvo::LvoModel model;
  std::vector<lvo::Flow3D> inputs;
  std::vector<lvo::RelativePose> targets;
  lvo::LossWeights weights;
};

struct Result {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a relu or |.| kink
};

/// Random tiny network, random inputs and targets, random loss weights.
inline Problem random_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  lvo::LvoConfig cfg;
  const int layers = pick(1, 2);
  cfg.stream_channels.clear();
  for (int i = 0; i < layers; ++i) cfg.stream_channels.push_back(pick(1, 4));
  cfg.squeeze_divisor = cfg.stream_channels.back() >= 2 ? pick(1, 2) : 1;
  cfg.fc_hidden = pick(2, 6);
  cfg.input_width = (1 << layers) * pick(1, 3);
  cfg.input_height = (1 << layers) * pick(1, 2);

  Problem p;
  p.model = lvo::init_model(cfg, seed * 7 + 1);
  p.model.for_each_tensor([&](std::span<double> t, bool is_weight) {
    if (!is_weight)
      for (double& v : t) v = 0.3 * u(rng);
  });
  const int batch = pick(1, 3);
  for (int b = 0; b < batch; ++b) {
    lvo::Flow3D f(cfg.input_width, cfg.input_height);
    for (float& v : f.data()) v = static_cast<float>(u(rng));
    p.inputs.push_back(f);
    lvo::RelativePose gt;
    gt.translation = Eigen::Vector3d(u(rng), u(rng), u(rng));
    gt.euler = {0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng)};
    p.targets.push_back(gt);
  }
  p.weights = {0.1 + std::abs(u(rng)), 0.1 + 5.0 * std::abs(u(rng)),
               1e-3 + 0.05 * std::abs(u(rng))};
  return p;
}

/// Analytic gradient of the full batch loss (data terms plus the weight
/// regularizer) using the library's backward pass.
inline lvo::LvoModel analytic_gradient(const Problem& p) {
  lvo::LvoModel grads = p.model.zeros_like();
  for (std::size_t i = 0; i < p.inputs.size(); ++i) {
    const lvo::RawPoseOutput raw = lvo::forward(p.model, p.inputs[i]);
    lvo::accumulate_gradients(p.model, p.inputs[i],
                              lvo::loss_gradients(raw, p.targets[i], p.weights), grads);
  }
  std::vector<std::span<const double>> params;
  p.model.for_each_tensor([&](std::span<const double> t, bool) { params.push_back(t); });
  std::size_t k = 0;
  grads.for_each_tensor([&](std::span<double> t, bool is_weight) {
    if (is_weight)
      for (std::size_t i = 0; i < t.size(); ++i) t[i] += 2.0 * p.weights.lambda3 * params[k][i];
    ++k;
  });
  return grads;
}

/// Central differences of the independently coded loss. Coordinates whose
/// +-h perturbation changes any relu or absolute-value branch are skipped.
inline Result check(const Problem& p, double h = 1e-5) {
  const lvo::LvoModel an = analytic_gradient(p);
  std::vector<double> analytic;
  an.for_each_tensor([&](std::span<const double> t, bool) {
    analytic.insert(analytic.end(), t.begin(), t.end());
  });

  std::vector<bool> base_pattern;
  oracle::batch_loss(p.model, p.inputs, p.targets, p.weights, &base_pattern);

  lvo::LvoModel probe = p.model;
  std::vector<double*> slots;
  probe.for_each_tensor([&](std::span<double> t, bool) {
    for (double& v : t) slots.push_back(&v);
  });

  Result r;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double saved = *slots[i];
    std::vector<bool> plus_pattern, minus_pattern;
    *slots[i] = saved + h;
    const double fp = oracle::batch_loss(probe, p.inputs, p.targets, p.weights, &plus_pattern);
    *slots[i] = saved - h;
    const double fm = oracle::batch_loss(probe, p.inputs, p.targets, p.weights, &minus_pattern);
    *slots[i] = saved;
    if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
      ++r.skipped;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double abs_err = std::abs(a - numeric);
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-4});
    r.max_abs_error = std::max(r.max_abs_error, abs_err);
    r.max_rel_error = std::max(r.max_rel_error, abs_err / scale);
    ++r.checked;
  }
  return r;
}

}  // namespace gradcheck
