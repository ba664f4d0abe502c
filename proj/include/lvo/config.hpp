#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lvo/gaussian_loss.hpp"
#include "lvo/kitti_eval.hpp"
#include "lvo/network.hpp"
#include "lvo/octree.hpp"

namespace lvo {

struct AssociationConfig {
  float max_inverse_depth = 10.0f;
  int downsample = 1;         // integer pooling factor applied to flow and depth
  bool metric_depth = false;  // F_Z on raw depth (ablation)
};

struct MapConfig {
  int pixel_stride = 1;  // back-project every n-th pixel in x and y
};

/// Settings for the whole pipeline. Loaded from an INI-style file:
///
///   [dataset]      root, sequences, train_sequences, frame_period
///   [output]       dir
///   [model]        checkpoint (optional; `run` trains when absent)
///   [association]  max_inverse_depth, downsample, metric_depth
///   [lvo]          input_width, input_height, stream_channels,
///                  squeeze_divisor, fc_hidden
///   [train]        batch_size, learning_rate, lr_decay, epochs, beta1,
///                  beta2, epsilon, seed, mirror_augment
///   [loss]         lambda1, lambda2, lambda3
///   [predict]      n_samples, seed, deterministic
///   [octree]       resolution, prob_hit, prob_miss, prior,
///                  occupancy_threshold, clamp_min, clamp_max, max_range
///   [map]          pixel_stride
///   [eval]         speed_bin_width, step, lengths
///
/// Lists are comma or whitespace separated. Relative paths resolve against
/// the directory of the config file. Unknown sections or keys are errors.
struct PipelineConfig {
  std::filesystem::path dataset_root;
  std::vector<std::string> sequences;
  std::vector<std::string> train_sequences;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> checkpoint;

  AssociationConfig association;
  LvoConfig lvo{16, 8, {4, 8}, 4, 128, 3, 2};
  TrainConfig train;
  LossWeights loss;
  PredictConfig predict;
  OctreeConfig octree;
  MapConfig map;
  EvalConfig eval;

  /// Checks every section; throws ParseError describing the first problem.
  void validate() const;
  /// Stable key=value dump of every setting, used for hashing.
  std::string canonical_text() const;
};

/// Parsed `[section] key = value` document.
using IniDocument = std::map<std::string, std::map<std::string, std::string>>;
IniDocument parse_ini(const std::string& text, const std::string& source);

PipelineConfig parse_config(const std::string& text,
                            const std::filesystem::path& base_dir,
                            const std::string& source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace lvo
