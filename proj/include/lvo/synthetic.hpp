#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lvo/network.hpp"

namespace lvo {

/// Random relative pose in a driving-like range (mostly forward motion).
RelativePose random_relative_pose(std::mt19937_64& rng);

/// Toy regression set: every pixel of the Flow3D raster is an affine
/// function of the sample's relative pose (forward motion produces radial
/// expansion, lateral motion and yaw shift F_X, vertical motion and pitch
/// shift F_Y, forward motion raises F_Z) plus Gaussian noise.
std::vector<TrainingSample> make_affine_flow_dataset(int count, int width, int height,
                                                     std::uint64_t seed,
                                                     double noise_sigma = 0.05);

struct SyntheticSequenceConfig {
  int frames = 10;
  int width = 64;
  int height = 32;
  std::uint64_t seed = 7;
  double speed = 1.0;  // metres per frame
};

/// Renders a camera driving down a textured box corridor and writes a
/// dataset in the layout read by index_sequence:
///   <root>/sequences/<id>/{calib.txt, depth/NNNNNN.pfm, flow/NNNNNN.flo,
///                          image/NNNNNN.ppm}
///   <root>/poses/<id>.txt
/// Depth and flow are exact for the rendered geometry.
void generate_corridor_sequence(const std::filesystem::path& root, const std::string& id,
                                const SyntheticSequenceConfig& cfg);

}  // namespace lvo
