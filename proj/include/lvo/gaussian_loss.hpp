#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

#include "lvo/geometry.hpp"

namespace lvo {

/// Unconstrained network outputs for one frame pair.
///   translation = (mu_x, mu_z, log sigma_x, log sigma_z, atanh-ish rho, y)
///   rotation    = (e_z, e_y, e_x)
struct RawPoseOutput {
  std::array<double, 6> translation{};
  std::array<double, 3> rotation{};

  bool operator==(const RawPoseOutput&) const = default;
};

/// Bivariate normal over the horizontal translation (x right, z forward).
struct GaussianPose2D {
  double mu_x = 0.0;
  double mu_z = 0.0;
  double sigma_x = 1.0;
  double sigma_z = 1.0;
  double rho = 0.0;

  /// Throws InvariantError unless sigmas are positive and |rho| < 1.
  void validate() const;
};

/// Decoded network output.
struct PosePrediction {
  GaussianPose2D gaussian;
  double y = 0.0;
  EulerZYX euler;
};

struct LossWeights {
  double lambda1 = 1.0;   // |y_p - y_gt|
  double lambda2 = 10.0;  // ||r_p - r_gt||
  double lambda3 = 1e-4;  // squared weight norm

  void validate() const;
};

struct PredictConfig {
  int n_samples = 10000;
  std::uint64_t seed = 0;
  /// Return mu directly instead of the sample mean.
  bool deterministic = false;

  void validate() const;
};

inline constexpr double kSigmaMin = 1e-4;
inline constexpr double kSigmaMax = 1e3;
inline constexpr double kRhoCeiling = 0.999;

/// sigma = clamp(exp(raw), 1e-4, 1e3), rho = 0.999 tanh(raw); means and y
/// pass through. Throws InvariantError on non-finite input.
std::pair<GaussianPose2D, double> raw_to_gaussian(
    const std::array<double, 6>& raw);

PosePrediction decode(const RawPoseOutput& raw);

/// Negative log of the standard bivariate normal density at (x_gt, z_gt).
double bivariate_nll(const GaussianPose2D& g, double x_gt, double z_gt);

/// Data term of the training loss for one sample:
///   NLL + lambda1 |y_p - y_gt| + lambda2 ||r_p - r_gt||.
double sample_loss(const PosePrediction& p, const RelativePose& gt,
                   const LossWeights& w);

/// Sum of sample_loss over the batch plus lambda3 * params_sq_norm.
/// Throws ShapeError if the lists differ in length or are empty.
double total_loss(std::span<const PosePrediction> outputs,
                  std::span<const RelativePose> gts, const LossWeights& w,
                  double params_sq_norm);

/// Gradient of sample_loss with respect to the nine raw outputs, chained
/// through the exp/tanh parameterization. Non-differentiable points of the
/// absolute value and the norm use the zero subgradient.
RawPoseOutput loss_gradients(const RawPoseOutput& raw, const RelativePose& gt,
                             const LossWeights& w);

/// Horizontal translation estimate: mu in deterministic mode, otherwise the
/// mean of n_samples draws mu + L n with L the Cholesky factor of Sigma and
/// n standard normal pairs from a generator seeded with cfg.seed.
std::pair<double, double> predict_translation(const GaussianPose2D& g,
                                              const PredictConfig& cfg);

/// Relative pose from a decoded prediction.
RelativePose to_relative_pose(const PosePrediction& p, const PredictConfig& cfg);

}  // namespace lvo
