#pragma once

#include <bit>
#include <filesystem>
#include <memory>

#include "lvo/geometry.hpp"
#include "lvo/raster.hpp"

namespace lvo {

/// KITTI pose file: one line per frame, 12 floats of the row-major 3x4
/// world-from-camera matrix. Rotations drifting less than 1e-3 from
/// orthonormal are re-orthonormalized (only when drift exceeds 1e-10, so
/// clean files load bit-exactly); larger drift is a ParseError naming the line.
Trajectory load_poses(const std::filesystem::path& path);
/// Writes shortest round-trip decimal representations.
void save_poses(const Trajectory& traj, const std::filesystem::path& path);

/// Incremental pose-file writer for streaming trajectories.
class PoseWriter {
 public:
  explicit PoseWriter(const std::filesystem::path& path);
  ~PoseWriter();
  PoseWriter(const PoseWriter&) = delete;
  PoseWriter& operator=(const PoseWriter&) = delete;

  void write(const SE3Pose& pose);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Middlebury .flo: f32 202021.25 ("PIEH"), i32 width, i32 height, then
/// interleaved (u, v) f32 rows, little-endian.
FlowField2D read_flo(const std::filesystem::path& path);
void write_flo(const FlowField2D& flow, const std::filesystem::path& path);

/// Grayscale PFM: "Pf\n<w> <h>\n<scale>\n" then f32 rows bottom-up; a
/// negative scale means little-endian. Colour "PF" files are rejected.
DepthMap read_pfm(const std::filesystem::path& path);
void write_pfm(const DepthMap& depth, const std::filesystem::path& path,
               std::endian order = std::endian::little);

/// 3D flow: "F3D1", i32 width, i32 height, then three width*height f32
/// planes (F_X, F_Y, F_Z), little-endian.
Flow3D read_f3d(const std::filesystem::path& path);
void write_f3d(const Flow3D& flow, const std::filesystem::path& path);

/// One line "fx fy cx cy skew".
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const CameraIntrinsics& intr, const std::filesystem::path& path);

/// Binary PPM (P6, maxval 255).
ColorImage read_ppm(const std::filesystem::path& path);
void write_ppm(const ColorImage& image, const std::filesystem::path& path);

}  // namespace lvo
