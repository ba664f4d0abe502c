#include "lvo/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "lvo/formats.hpp"

namespace lvo {

RelativePose random_relative_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lateral(-0.3, 0.3);
  std::uniform_real_distribution<double> vertical(-0.05, 0.05);
  std::uniform_real_distribution<double> forward(0.5, 1.5);
  std::uniform_real_distribution<double> yaw(-0.05, 0.05);
  std::uniform_real_distribution<double> small(-0.01, 0.01);
  RelativePose p;
  p.translation = {lateral(rng), vertical(rng), forward(rng)};
  p.euler = {small(rng), yaw(rng), small(rng)};
  return p;
}

std::vector<TrainingSample> make_affine_flow_dataset(int count, int width, int height,
                                                     std::uint64_t seed, double noise_sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  std::vector<TrainingSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    TrainingSample s{Flow3D(width, height), random_relative_pose(rng)};
    const Eigen::Vector3d& t = s.pose.translation;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double nx = (x - 0.5 * (width - 1)) / width;
        const double ny = (y - 0.5 * (height - 1)) / height;
        s.flow.at(x, y, 0) = static_cast<float>(4.0 * t.x() + 2.0 * t.z() * nx +
                                                20.0 * s.pose.euler.y + noise(rng));
        s.flow.at(x, y, 1) = static_cast<float>(4.0 * t.y() + 2.0 * t.z() * ny +
                                                20.0 * s.pose.euler.x + noise(rng));
        s.flow.at(x, y, 2) =
            static_cast<float>(0.5 * t.z() + 0.3 * t.x() * nx + noise(rng));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

// Corridor in world coordinates (camera frame 0 = world, y down).
struct Corridor {
  double floor_y = 1.6;
  double ceiling_y = -3.0;
  double half_width = 4.0;
  double far_z = 200.0;

  /// Distance along `dir` to the first surface, or +inf.
  double intersect(const Eigen::Vector3d& o, const Eigen::Vector3d& dir) const {
    double best = std::numeric_limits<double>::infinity();
    auto plane = [&](int axis, double value) {
      if (dir[axis] == 0.0) return;
      const double s = (value - o[axis]) / dir[axis];
      if (s > 1e-9 && s < best) best = s;
    };
    plane(1, floor_y);
    plane(1, ceiling_y);
    plane(0, -half_width);
    plane(0, half_width);
    plane(2, far_z);
    return best;
  }

  static Rgb texture(const Eigen::Vector3d& p) {
    const auto cell = static_cast<long>(std::floor(p.x()) + std::floor(p.y()) +
                                        std::floor(p.z() / 2.0));
    const bool dark = (cell & 1) != 0;
    const auto shade = static_cast<std::uint8_t>(dark ? 60 : 200);
    return {shade, static_cast<std::uint8_t>(dark ? 90 : 180),
            static_cast<std::uint8_t>(dark ? 140 : 120)};
  }
};

std::string frame_name(int k, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.%s", k, ext);
  return buf;
}

}  // namespace

void generate_corridor_sequence(const std::filesystem::path& root, const std::string& id,
                                const SyntheticSequenceConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path seq = root / "sequences" / id;
  for (const char* sub : {"depth", "flow", "image"}) fs::create_directories(seq / sub);
  fs::create_directories(root / "poses");

  const CameraIntrinsics intr{0.6 * cfg.width, 0.6 * cfg.width, 0.5 * (cfg.width - 1),
                              0.5 * (cfg.height - 1), 0.0};
  write_intrinsics(intr, seq / "calib.txt");

  // Gentle S-curve with small lateral wobble.
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  std::vector<RelativePose> rels;
  for (int k = 0; k + 1 < cfg.frames; ++k) {
    RelativePose r;
    r.translation = {jitter(rng), 0.2 * jitter(rng), cfg.speed * (1.0 + jitter(rng))};
    r.euler = {0.0, 0.02 * std::sin(0.5 * k) + jitter(rng) * 0.1, 0.0};
    rels.push_back(r);
  }
  const Trajectory traj = accumulate_trajectory(rels);
  save_poses(traj, root / "poses" / (id + ".txt"));

  const Corridor scene;
  for (int k = 0; k < cfg.frames; ++k) {
    const SE3Pose& pose = traj.poses[k];
    DepthMap depth(cfg.width, cfg.height);
    FlowField2D flow(cfg.width, cfg.height);
    ColorImage image{cfg.width, cfg.height,
                     std::vector<std::uint8_t>(static_cast<std::size_t>(cfg.width) * cfg.height * 3)};
    const bool has_next = k + 1 < cfg.frames;
    const SE3Pose next_from_world = has_next ? traj.poses[k + 1].inverse() : SE3Pose{};
    for (int v = 0; v < cfg.height; ++v) {
      for (int u = 0; u < cfg.width; ++u) {
        const Eigen::Vector3d ray_cam((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
        const double s = scene.intersect(pose.translation, pose.rotation * ray_cam);
        if (!std::isfinite(s)) {
          depth.at(u, v) = std::numeric_limits<float>::quiet_NaN();
          continue;
        }
        depth.at(u, v) = static_cast<float>(s);  // camera z, since ray_cam.z == 1
        const Eigen::Vector3d world = pose * (s * ray_cam);
        const Rgb c = Corridor::texture(world);
        const std::size_t i = 3 * (static_cast<std::size_t>(v) * cfg.width + u);
        image.data[i] = c.r;
        image.data[i + 1] = c.g;
        image.data[i + 2] = c.b;
        if (has_next) {
          const Eigen::Vector3d p = next_from_world * world;
          if (p.z() > 1e-6) {
            const Eigen::Vector3d uv = project(intr, p);
            flow.at(u, v, 0) = static_cast<float>(uv.x() - u);
            flow.at(u, v, 1) = static_cast<float>(uv.y() - v);
          }
        }
      }
    }
    write_pfm(depth, seq / "depth" / frame_name(k, "pfm"));
    write_ppm(image, seq / "image" / frame_name(k, "ppm"));
    if (has_next) write_flo(flow, seq / "flow" / frame_name(k, "flo"));
  }
}

}  // namespace lvo
