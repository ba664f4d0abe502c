#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lvo/raster.hpp"

namespace lvo {

/// Pinhole intrinsics in pixels. Maps camera coordinates to pixels as
///   d * [u v 1]^T = [[fx s cx] [0 fy cy] [0 0 1]] * [X Y Z]^T
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  /// Throws InvariantError unless fx > 0 and fy > 0.
  void validate() const;
};

/// Euler triplet (e_z, e_y, e_x) in radians.
///
/// Convention used throughout the project: R = Rz(z) * Ry(y) * Rx(x).
/// With the KITTI camera axes (x right, y down, z forward) e_y is the
/// heading (yaw) angle, e_x the pitch and e_z the roll.
struct EulerZYX {
  double z = 0.0;
  double y = 0.0;
  double x = 0.0;

  bool operator==(const EulerZYX&) const = default;
};

/// Rigid transform. For trajectories this is world-from-camera.
struct SE3Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static SE3Pose identity() { return {}; }

  SE3Pose operator*(const SE3Pose& rhs) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const;
  SE3Pose inverse() const;
  Eigen::Matrix4d matrix() const;
};

/// Frame-to-frame motion of frame k+1 expressed in frame k.
struct RelativePose {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  EulerZYX euler;

  SE3Pose to_se3() const;
};

/// Absolute poses, one per frame.
struct Trajectory {
  std::vector<SE3Pose> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  bool operator==(const Rgb&) const = default;
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  /// Empty, or one entry per point.
  std::vector<Rgb> colors;

  std::size_t size() const { return points.size(); }
  bool has_colors() const { return !colors.empty(); }
  void transform(const SE3Pose& pose);
};

/// Interleaved 8-bit RGB image (PPM payload).
struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Rgb at(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {data[i], data[i + 1], data[i + 2]};
  }
};

/// Back-projects every pixel with finite positive depth. Throws ShapeError if
/// `rgb` is given with different dimensions than `depth`.
PointCloud backproject(const CameraIntrinsics& intr, const DepthMap& depth,
                       const ColorImage* rgb = nullptr);

/// Pixel coordinates and depth of a camera-frame point (inverse of backproject).
Eigen::Vector3d project(const CameraIntrinsics& intr, const Eigen::Vector3d& p);

Eigen::Matrix3d euler_to_rotation(const EulerZYX& e);

/// Inverse of euler_to_rotation. e_y lies in [-pi/2, pi/2]; at gimbal lock
/// e_x is 0 and e_z carries the remaining rotation. Throws InvariantError if
/// R is not orthonormal within 1e-6 or is a reflection.
EulerZYX rotation_to_euler(const Eigen::Matrix3d& R);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// max |R^T R - I| entry.
double orthonormality_error(const Eigen::Matrix3d& R);

/// Chains relative poses onto an identity first pose.
Trajectory accumulate_trajectory(std::span<const RelativePose> rels);

/// rel[k] = inverse(pose[k]) * pose[k+1]. Throws InvariantError for fewer than
/// two poses.
std::vector<RelativePose> relative_from_absolute(const Trajectory& traj);

/// Rotation angle of R in radians, in [0, pi]. Uses atan2 of the
/// antisymmetric part and the trace, accurate near zero.
double rotation_angle(const Eigen::Matrix3d& R);

}  // namespace lvo
