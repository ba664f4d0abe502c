#pragma once

#include <filesystem>
#include <vector>

#include "lvo/geometry.hpp"

namespace lvo {

struct EvalConfig {
  std::vector<double> lengths{100, 200, 300, 400, 500, 600, 700, 800};
  double frame_period = 0.1;     // seconds
  double speed_bin_width = 2.0;  // m/s
  int step = 1;                  // start-frame stride
};

/// Error of one sub-sequence.
struct SegmentError {
  int first_frame = 0;
  int last_frame = 0;
  double length = 0.0;       // target length (m)
  double speed = 0.0;        // mean gt speed over the span (m/s)
  double t_err = 0.0;        // translational error, percent
  double r_err = 0.0;        // rotational error, deg/m
};

struct BinnedError {
  double bin = 0.0;  // length in m, or lower edge of the speed bin in m/s
  double t_err = 0.0;
  double r_err = 0.0;
  int count = 0;
};

struct ErrorReport {
  std::vector<SegmentError> segments;
  std::vector<BinnedError> by_length;
  std::vector<BinnedError> by_speed;
  double t_rel = 0.0;  // percent
  double r_rel = 0.0;  // deg/m (multiply by 100 for deg/100m)
};

/// Accumulated path length of the trajectory at each frame.
std::vector<double> trajectory_distances(const Trajectory& traj);

/// KITTI odometry relative error over all sub-sequences. For every start
/// frame and target length the span ends at the first frame whose
/// accumulated gt distance reaches the length; spans that run past the end
/// are skipped. Throws ShapeError unless both trajectories have the same
/// number (>= 2) of poses.
ErrorReport kitti_errors(const Trajectory& gt, const Trajectory& pred,
                         const EvalConfig& cfg = {});

/// Writes tl.csv, rl.csv, ts.csv, rs.csv (bin,error tables for translation
/// and rotation vs length and speed) and summary.csv into `dir`.
void report_csv(const ErrorReport& report, const std::filesystem::path& dir);

}  // namespace lvo
