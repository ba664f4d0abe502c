#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "lvo/geometry.hpp"

namespace lvo {

struct OctreeConfig {
  double resolution = 0.2;  // leaf side in meters
  double prob_hit = 0.7;
  double prob_miss = 0.4;
  double prior = 0.5;
  double occupancy_threshold = 0.5;
  double clamp_min = 0.12;
  double clamp_max = 0.97;
  double max_range = -1.0;  // <= 0 disables the range limit

  void validate() const;
  bool operator==(const OctreeConfig&) const = default;
};

double logit(double p);
double logistic(double l);

/// Bayesian occupancy update in log-odds form:
///   L <- clamp(L + logit(meas_prob) - logit(prior)).
/// Throws InvariantError unless meas_prob is in (0, 1).
double update_logodds(double current, double meas_prob, const OctreeConfig& cfg);

/// Integer leaf coordinate: floor(p / resolution) per axis.
using VoxelKey = std::array<std::int64_t, 3>;

/// Leaves crossed by the segment from `origin` to `end` in traversal order,
/// both end voxels included (3D digital differential analyzer).
std::vector<VoxelKey> trace_ray(const Eigen::Vector3d& origin,
                                const Eigen::Vector3d& end, double resolution);

struct Voxel {
  Eigen::Vector3d center;
  double side = 0.0;
  double probability = 0.0;
  Rgb color;
};
using VoxelList = std::vector<Voxel>;

/// Sparse 8-ary tree over a cube of leaf keys [-2^(depth-1), 2^(depth-1))^3.
/// The cube doubles (root expansion) when a key falls outside. Only leaves
/// carry data: log-odds occupancy and a running color mean.
class OccupancyOctree {
 public:
  struct Leaf {
    double log_odds = 0.0;
    std::uint64_t color_sum[3] = {0, 0, 0};
    std::uint32_t color_count = 0;

    Rgb mean_color() const;
  };

  explicit OccupancyOctree(OctreeConfig cfg);
  ~OccupancyOctree();
  OccupancyOctree(OccupancyOctree&&) noexcept;
  OccupancyOctree& operator=(OccupancyOctree&&) noexcept;

  const OctreeConfig& config() const { return cfg_; }
  int depth() const { return depth_; }
  std::size_t leaf_count() const { return leaf_count_; }

  VoxelKey key_of(const Eigen::Vector3d& p) const;
  Eigen::Vector3d center_of(const VoxelKey& key) const;

  /// Leaf at key, or null when never updated.
  const Leaf* find(const VoxelKey& key) const;
  /// Probability at key; the prior for unknown space.
  double probability(const VoxelKey& key) const;

  /// Applies one measurement of probability `meas_prob` to the leaf at key.
  void update(const VoxelKey& key, double meas_prob);
  void add_color(const VoxelKey& key, Rgb color);

  /// Ray-casts every point: endpoint leaves get prob_hit, leaves crossed on
  /// the way get prob_miss. Within one call each leaf is updated at most
  /// once, and an endpoint leaf is never also marked free. Points farther
  /// than max_range are dropped. `cloud` is in map coordinates.
  void insert_point_cloud(const Eigen::Vector3d& sensor_origin,
                          const PointCloud& cloud);

  /// Leaves with probability above the occupancy threshold, in traversal order.
  VoxelList extract_occupied() const;

  /// Visits every allocated leaf in traversal (Morton) order.
  void for_each_leaf(
      const std::function<void(const VoxelKey&, const Leaf&)>& fn) const;

  /// Binary dump, little-endian:
  ///   "LVOOCT01", f64 resolution, prob_hit, prob_miss, prior,
  ///   occupancy_threshold, clamp_min, clamp_max, max_range, u32 depth,
  ///   u8 has_root, then a preorder node stream. Inner nodes write a u8
  ///   child bitmask and recurse into present children in index order;
  ///   leaves write f64 log-odds, u64 r/g/b color sums and u32 color count.
  void save(const std::filesystem::path& path) const;
  static OccupancyOctree load(const std::filesystem::path& path);

 private:
  struct Node;

  bool in_range(const VoxelKey& key) const;
  void expand_to(const VoxelKey& key);
  Leaf& touch(const VoxelKey& key);

  OctreeConfig cfg_;
  int depth_ = 1;
  std::unique_ptr<Node> root_;
  std::size_t leaf_count_ = 0;
};

/// Occupied voxels of the tree (same as tree.extract_occupied()).
VoxelList extract_occupied(const OccupancyOctree& tree);

/// ASCII PLY with one vertex per voxel center (x y z red green blue).
void export_ply(const VoxelList& voxels, const std::filesystem::path& path);

/// Reads back vertex positions and colors from an export_ply file.
VoxelList read_ply_vertices(const std::filesystem::path& path);

}  // namespace lvo
