#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lvo/gaussian_loss.hpp"
#include "lvo/geometry.hpp"
#include "lvo/raster.hpp"

namespace lvo {

/// Layer shapes of the dual-stream regressor.
struct LvoConfig {
  int input_width = 320;
  int input_height = 96;
  std::vector<int> stream_channels{64, 128, 256, 512};
  int squeeze_divisor = 4;
  int fc_hidden = 128;
  int conv_kernel = 3;
  int conv_stride = 2;

  struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;
    bool operator==(const Shape&) const = default;
  };

  /// Throws InvariantError for inconsistent settings.
  void validate() const;
  /// Spatial/channel shape after each stream's conv stack.
  Shape stream_output_shape() const;
  /// Shape of the squeezed feature map.
  Shape squeeze_output_shape() const;
  int flattened_size() const;

  bool operator==(const LvoConfig&) const = default;
};

/// Weights are laid out [out][in][ky][kx].
struct ConvLayer {
  int out_channels = 0;
  int in_channels = 0;
  int kernel = 1;
  int stride = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const ConvLayer&) const = default;
};

/// Weights are laid out [out][in].
struct DenseLayer {
  int out_features = 0;
  int in_features = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

/// All trainable parameters. The same type also holds gradients and Adam
/// moments, so every per-parameter loop goes through for_each_tensor.
struct LvoModel {
  LvoConfig config;
  std::vector<ConvLayer> flow_stream;   // input channels (F_X, F_Y)
  std::vector<ConvLayer> depth_stream;  // input channel F_Z
  ConvLayer squeeze;                    // 1x1 over the concatenated streams
  std::vector<DenseLayer> translation_head;  // ... -> 6
  std::vector<DenseLayer> rotation_head;     // ... -> 3

  /// Visits (values, is_weight) in checkpoint declaration order: flow
  /// stream, depth stream, squeeze, translation head, rotation head; weights
  /// before bias within a layer.
  template <class Self, class F>
  static void visit(Self& self, F&& fn) {
    auto conv = [&](auto& l) {
      fn(std::span(l.weights), true);
      fn(std::span(l.bias), false);
    };
    for (auto& l : self.flow_stream) conv(l);
    for (auto& l : self.depth_stream) conv(l);
    conv(self.squeeze);
    for (auto& l : self.translation_head) conv(l);
    for (auto& l : self.rotation_head) conv(l);
  }
  template <class F>
  void for_each_tensor(F&& fn) { visit(*this, fn); }
  template <class F>
  void for_each_tensor(F&& fn) const { visit(*this, fn); }

  std::size_t parameter_count() const;
  /// Sum of squared weights (biases excluded).
  double weights_sq_norm() const;
  /// Zero-valued model with the same shapes.
  LvoModel zeros_like() const;

  bool operator==(const LvoModel&) const = default;
};

/// All parameters zero.
LvoModel make_model(const LvoConfig& cfg);
/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
LvoModel init_model(const LvoConfig& cfg, std::uint64_t seed);

/// Raw outputs per sample. Throws ShapeError if a raster does not match the
/// configured input size.
std::vector<RawPoseOutput> forward(const LvoModel& model,
                                   std::span<const Flow3D> batch);
RawPoseOutput forward(const LvoModel& model, const Flow3D& sample);

/// Parameter gradients of sum_i <upstream_i, forward(sample_i)>.
LvoModel backward(const LvoModel& model, std::span<const Flow3D> batch,
                  std::span<const RawPoseOutput> upstream);

/// Gradient accumulation for one sample; returns the raw forward output.
RawPoseOutput accumulate_gradients(const LvoModel& model, const Flow3D& sample,
                                   const RawPoseOutput& upstream,
                                   LvoModel& grads);

struct TrainConfig {
  int batch_size = 100;
  double learning_rate = 1e-4;
  double lr_decay = 0.95;  // per epoch
  int epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool mirror_augment = true;

  void validate() const;
};

struct AdamState {
  LvoModel first_moment;
  LvoModel second_moment;
  std::int64_t t = 0;

  static AdamState for_model(const LvoModel& model);
};

/// One bias-corrected Adam update with learning rate lr * lr_decay^epoch.
void adam_step(LvoModel& model, const LvoModel& grads, AdamState& state,
               const TrainConfig& cfg, int epoch);

struct TrainingSample {
  Flow3D flow;
  RelativePose pose;
};

/// Horizontal flip of the raster with F_X negated; the pose is mirrored
/// through the camera's y-z plane (x, e_y, e_z negated).
TrainingSample mirror_augment(const TrainingSample& sample);

struct TrainResult {
  LvoModel model;
  /// Mean total loss per sample, one entry per epoch.
  std::vector<double> epoch_loss;
};

/// Shuffled minibatch Adam training; deterministic for a given seed.
TrainResult train(LvoModel model, std::span<const TrainingSample> dataset,
                  const TrainConfig& cfg, const LossWeights& weights);

/// Binary checkpoint, little-endian:
///   "LVOCKPT1"
///   u32 input_width, input_height, conv_kernel, conv_stride,
///       squeeze_divisor, fc_hidden, layer_count, channels[layer_count]
///   u64 parameter_count
///   f32 parameters in for_each_tensor order
///   u32 CRC-32 of every preceding byte
void save_checkpoint(const LvoModel& model, const std::filesystem::path& path);
LvoModel load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter to float32, the checkpoint storage precision.
LvoModel quantize_to_float(LvoModel model);

}  // namespace lvo
