#include "lvo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lvo/error.hpp"

namespace lvo {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InvariantError("camera focal lengths must be positive (fx=" +
                         std::to_string(fx) + ", fy=" + std::to_string(fy) +
                         ")");
  }
}

SE3Pose SE3Pose::operator*(const SE3Pose& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

Eigen::Vector3d SE3Pose::operator*(const Eigen::Vector3d& p) const {
  return rotation * p + translation;
}

SE3Pose SE3Pose::inverse() const {
  const Eigen::Matrix3d rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

Eigen::Matrix4d SE3Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

SE3Pose RelativePose::to_se3() const {
  return {euler_to_rotation(euler), translation};
}

void PointCloud::transform(const SE3Pose& pose) {
  for (auto& p : points) p = pose * p;
}

PointCloud backproject(const CameraIntrinsics& intr, const DepthMap& depth,
                       const ColorImage* rgb) {
  intr.validate();
  if (rgb != nullptr &&
      (rgb->width != depth.width() || rgb->height != depth.height())) {
    throw ShapeError("color image " + std::to_string(rgb->width) + "x" +
                     std::to_string(rgb->height) + " does not match depth " +
                     std::to_string(depth.width()) + "x" +
                     std::to_string(depth.height()));
  }
  PointCloud cloud;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double d = depth.at(u, v);
      if (!std::isfinite(d) || d <= 0.0) continue;
      const double y = (v - intr.cy) * d / intr.fy;
      const double x = (u - intr.skew * y / d - intr.cx) * d / intr.fx;
      cloud.points.emplace_back(x, y, d);
      if (rgb != nullptr) cloud.colors.push_back(rgb->at(u, v));
    }
  }
  return cloud;
}

Eigen::Vector3d project(const CameraIntrinsics& intr, const Eigen::Vector3d& p) {
  const double u = (intr.fx * p.x() + intr.skew * p.y()) / p.z() + intr.cx;
  const double v = intr.fy * p.y() / p.z() + intr.cy;
  return {u, v, p.z()};
}

Eigen::Matrix3d euler_to_rotation(const EulerZYX& e) {
  const Eigen::Matrix3d r =
      (Eigen::AngleAxisd(e.z, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(e.y, Eigen::Vector3d::UnitY()) *
       Eigen::AngleAxisd(e.x, Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
  return r;
}

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double orthonormality_error(const Eigen::Matrix3d& R) {
  return (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

EulerZYX rotation_to_euler(const Eigen::Matrix3d& R) {
  if (!R.allFinite() || orthonormality_error(R) > 1e-6 ||
      R.determinant() < 0.0) {
    throw InvariantError("rotation_to_euler: matrix is not a rotation");
  }
  // R = Rz(a) Ry(b) Rx(c), so R(0,0) = ca cb and R(1,0) = sa cb.
  const double cb = std::hypot(R(0, 0), R(1, 0));
  EulerZYX e;
  if (cb > 1e-12) {
    e.z = std::atan2(R(1, 0), R(0, 0));
    // Rz(a)^T R = Ry(b) Rx(c) has unit-scale entries for b and c even when
    // cb is small, which keeps the reconstruction accurate near the pole.
    const Eigen::Matrix3d m =
        Eigen::AngleAxisd(-e.z, Eigen::Vector3d::UnitZ()).toRotationMatrix() * R;
    e.y = std::atan2(-m(2, 0), m(0, 0));
    e.x = std::atan2(-m(1, 2), m(1, 1));
  } else {
    // Gimbal lock: only z -/+ x is observable; fix x = 0.
    e.y = std::atan2(-R(2, 0), cb);
    e.x = 0.0;
    e.z = std::atan2(-R(0, 1), R(1, 1));
  }
  e.z = wrap_angle(e.z);
  e.x = wrap_angle(e.x);
  return e;
}

Trajectory accumulate_trajectory(std::span<const RelativePose> rels) {
  Trajectory traj;
  traj.poses.reserve(rels.size() + 1);
  traj.poses.push_back(SE3Pose::identity());
  for (const auto& rel : rels) {
    traj.poses.push_back(traj.poses.back() * rel.to_se3());
  }
  return traj;
}

std::vector<RelativePose> relative_from_absolute(const Trajectory& traj) {
  if (traj.size() < 2) {
    throw InvariantError("relative_from_absolute needs at least 2 poses, got " +
                         std::to_string(traj.size()));
  }
  std::vector<RelativePose> rels;
  rels.reserve(traj.size() - 1);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const SE3Pose d = traj.poses[k].inverse() * traj.poses[k + 1];
    rels.push_back({d.translation, rotation_to_euler(d.rotation)});
  }
  return rels;
}

double rotation_angle(const Eigen::Matrix3d& R) {
  const Eigen::Vector3d axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (R.trace() - 1.0));
}

}  // namespace lvo
