#include "lvo/gaussian_loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "lvo/error.hpp"

namespace lvo {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

void GaussianPose2D::validate() const {
  if (!(sigma_x > 0.0) || !(sigma_z > 0.0) || !(std::abs(rho) < 1.0) ||
      !std::isfinite(mu_x) || !std::isfinite(mu_z) || !std::isfinite(sigma_x) ||
      !std::isfinite(sigma_z)) {
    throw InvariantError("gaussian parameters out of range (sigma_x=" +
                         std::to_string(sigma_x) + ", sigma_z=" +
                         std::to_string(sigma_z) + ", rho=" +
                         std::to_string(rho) + ")");
  }
}

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(lambda3 >= 0.0)) {
    throw InvariantError("loss weights must be non-negative");
  }
}

void PredictConfig::validate() const {
  if (n_samples < 1) throw InvariantError("n_samples must be >= 1");
}

std::pair<GaussianPose2D, double> raw_to_gaussian(
    const std::array<double, 6>& raw) {
  for (double v : raw) {
    if (!std::isfinite(v)) {
      throw InvariantError("raw_to_gaussian: non-finite network output");
    }
  }
  GaussianPose2D g;
  g.mu_x = raw[0];
  g.mu_z = raw[1];
  g.sigma_x = std::clamp(std::exp(raw[2]), kSigmaMin, kSigmaMax);
  g.sigma_z = std::clamp(std::exp(raw[3]), kSigmaMin, kSigmaMax);
  g.rho = kRhoCeiling * std::tanh(raw[4]);
  return {g, raw[5]};
}

PosePrediction decode(const RawPoseOutput& raw) {
  auto [g, y] = raw_to_gaussian(raw.translation);
  return {g, y, {raw.rotation[0], raw.rotation[1], raw.rotation[2]}};
}

double bivariate_nll(const GaussianPose2D& g, double x_gt, double z_gt) {
  g.validate();
  const double a = (x_gt - g.mu_x) / g.sigma_x;
  const double b = (z_gt - g.mu_z) / g.sigma_z;
  const double s = 1.0 - g.rho * g.rho;
  const double q = a * a - 2.0 * g.rho * a * b + b * b;
  return kLog2Pi + std::log(g.sigma_x * g.sigma_z) + 0.5 * std::log(s) +
         q / (2.0 * s);
}

namespace {

Eigen::Vector3d euler_delta(const EulerZYX& p, const EulerZYX& gt) {
  return {p.z - gt.z, p.y - gt.y, p.x - gt.x};
}

}  // namespace

double sample_loss(const PosePrediction& p, const RelativePose& gt,
                   const LossWeights& w) {
  return bivariate_nll(p.gaussian, gt.translation.x(), gt.translation.z()) +
         w.lambda1 * std::abs(p.y - gt.translation.y()) +
         w.lambda2 * euler_delta(p.euler, gt.euler).norm();
}

double total_loss(std::span<const PosePrediction> outputs,
                  std::span<const RelativePose> gts, const LossWeights& w,
                  double params_sq_norm) {
  if (outputs.size() != gts.size() || outputs.empty()) {
    throw ShapeError("total_loss: " + std::to_string(outputs.size()) +
                     " predictions vs " + std::to_string(gts.size()) +
                     " ground-truth poses");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    loss += sample_loss(outputs[i], gts[i], w);
  }
  return loss + w.lambda3 * params_sq_norm;
}

RawPoseOutput loss_gradients(const RawPoseOutput& raw, const RelativePose& gt,
                             const LossWeights& w) {
  const PosePrediction p = decode(raw);
  const GaussianPose2D& g = p.gaussian;
  const double a = (gt.translation.x() - g.mu_x) / g.sigma_x;
  const double b = (gt.translation.z() - g.mu_z) / g.sigma_z;
  const double s = 1.0 - g.rho * g.rho;
  const double q = a * a - 2.0 * g.rho * a * b + b * b;

  RawPoseOutput grad;
  auto& t = grad.translation;
  t[0] = -(a - g.rho * b) / (g.sigma_x * s);
  t[1] = -(b - g.rho * a) / (g.sigma_z * s);

  // d sigma / d raw = sigma inside the clamp range, 0 on the clamp.
  const double ex = std::exp(raw.translation[2]);
  const double ez = std::exp(raw.translation[3]);
  t[2] = (ex > kSigmaMin && ex < kSigmaMax) ? 1.0 - a * (a - g.rho * b) / s : 0.0;
  t[3] = (ez > kSigmaMin && ez < kSigmaMax) ? 1.0 - b * (b - g.rho * a) / s : 0.0;

  const double th = std::tanh(raw.translation[4]);
  const double d_rho = -g.rho / s - a * b / s + q * g.rho / (s * s);
  t[4] = d_rho * kRhoCeiling * (1.0 - th * th);

  t[5] = w.lambda1 * sign(p.y - gt.translation.y());

  const Eigen::Vector3d d = euler_delta(p.euler, gt.euler);
  const double n = d.norm();
  if (n > 0.0) {
    for (int i = 0; i < 3; ++i) grad.rotation[i] = w.lambda2 * d[i] / n;
  }
  return grad;
}

std::pair<double, double> predict_translation(const GaussianPose2D& g,
                                              const PredictConfig& cfg) {
  g.validate();
  cfg.validate();
  if (cfg.deterministic) return {g.mu_x, g.mu_z};

  // Sigma = L L^T with L = [[sx, 0], [rho sz, sz sqrt(1 - rho^2)]].
  const double l10 = g.rho * g.sigma_z;
  const double l11 = g.sigma_z * std::sqrt(1.0 - g.rho * g.rho);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double sum_n0 = 0.0;
  double sum_n1 = 0.0;
  for (int k = 0; k < cfg.n_samples; ++k) {
    sum_n0 += normal(rng);
    sum_n1 += normal(rng);
  }
  // The sample mean of affine draws is the affine map of the mean draw.
  const double m0 = sum_n0 / cfg.n_samples;
  const double m1 = sum_n1 / cfg.n_samples;
  return {g.mu_x + g.sigma_x * m0, g.mu_z + l10 * m0 + l11 * m1};
}

RelativePose to_relative_pose(const PosePrediction& p, const PredictConfig& cfg) {
  const auto [x, z] = predict_translation(p.gaussian, cfg);
  return {{x, p.y, z}, p.euler};
}

}  // namespace lvo
