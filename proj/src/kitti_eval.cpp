#include "lvo/kitti_eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "binary_io.hpp"
#include "lvo/error.hpp"

namespace lvo {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<BinnedError> aggregate(const std::map<double, BinnedError>& bins) {
  std::vector<BinnedError> out;
  for (auto [key, b] : bins) {
    b.t_err /= b.count;
    b.r_err /= b.count;
    out.push_back(b);
  }
  return out;
}

void write_table(const std::filesystem::path& path, const char* bin_name,
                 const char* err_name, const std::vector<BinnedError>& bins,
                 bool translation) {
  std::string out = std::string(bin_name) + "," + err_name + "\n";
  for (const auto& b : bins) {
    out += format_double(b.bin) + "," + format_double(translation ? b.t_err : b.r_err) + "\n";
  }
  detail::write_file(path, out);
}

}  // namespace

std::vector<double> trajectory_distances(const Trajectory& traj) {
  std::vector<double> dist(traj.size(), 0.0);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    dist[i] = dist[i - 1] +
              (traj.poses[i].translation - traj.poses[i - 1].translation).norm();
  }
  return dist;
}

ErrorReport kitti_errors(const Trajectory& gt, const Trajectory& pred,
                         const EvalConfig& cfg) {
  if (gt.size() != pred.size() || gt.size() < 2) {
    throw ShapeError("kitti_errors: ground truth has " + std::to_string(gt.size()) +
                     " poses, prediction " + std::to_string(pred.size()));
  }
  if (cfg.step < 1 || !(cfg.frame_period > 0.0) || !(cfg.speed_bin_width > 0.0)) {
    throw InvariantError("kitti_errors: invalid evaluation settings");
  }
  const std::vector<double> dist = trajectory_distances(gt);
  const int n = static_cast<int>(gt.size());

  ErrorReport report;
  std::map<double, BinnedError> by_length;
  std::map<double, BinnedError> by_speed;
  double t_sum = 0.0;
  double r_sum = 0.0;
  for (int first = 0; first < n; first += cfg.step) {
    for (double len : cfg.lengths) {
      const auto it = std::lower_bound(dist.begin() + first, dist.end(), dist[first] + len);
      if (it == dist.end()) continue;
      const int last = static_cast<int>(it - dist.begin());
      if (last == first) continue;  // zero-length target

      const SE3Pose delta_gt = gt.poses[first].inverse() * gt.poses[last];
      const SE3Pose delta_pred = pred.poses[first].inverse() * pred.poses[last];
      // For E = inv(dg) * dp: |t_E| = |t_p - t_g| and |R_p - R_g|_F = 2 sqrt(2) sin(angle/2).
      // Both vanish exactly when the two motions are equal.
      const double t_norm = (delta_pred.translation - delta_gt.translation).norm();
      const double chord = (delta_pred.rotation - delta_gt.rotation).norm();
      const double angle = 2.0 * std::asin(std::min(1.0, chord / (2.0 * std::sqrt(2.0))));

      SegmentError s;
      s.first_frame = first;
      s.last_frame = last;
      s.length = len;
      s.speed = (dist[last] - dist[first]) / ((last - first) * cfg.frame_period);
      s.t_err = t_norm / len * 100.0;
      s.r_err = angle * kRadToDeg / len;
      report.segments.push_back(s);
      t_sum += s.t_err;
      r_sum += s.r_err;

      auto add = [&](std::map<double, BinnedError>& bins, double key) {
        auto& b = bins[key];
        b.bin = key;
        b.t_err += s.t_err;
        b.r_err += s.r_err;
        ++b.count;
      };
      add(by_length, len);
      add(by_speed, std::floor(s.speed / cfg.speed_bin_width) * cfg.speed_bin_width);
    }
  }
  report.by_length = aggregate(by_length);
  report.by_speed = aggregate(by_speed);
  if (!report.segments.empty()) {
    report.t_rel = t_sum / report.segments.size();
    report.r_rel = r_sum / report.segments.size();
  }
  return report;
}

void report_csv(const ErrorReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_table(dir / "tl.csv", "length_m", "t_err_percent", report.by_length, true);
  write_table(dir / "rl.csv", "length_m", "r_err_deg_per_m", report.by_length, false);
  write_table(dir / "ts.csv", "speed_mps", "t_err_percent", report.by_speed, true);
  write_table(dir / "rs.csv", "speed_mps", "r_err_deg_per_m", report.by_speed, false);
  detail::write_file(dir / "summary.csv",
                     "segments,t_rel_percent,r_rel_deg_per_m,r_rel_deg_per_100m\n" +
                         std::to_string(report.segments.size()) + "," +
                         format_double(report.t_rel) + "," + format_double(report.r_rel) +
                         "," + format_double(report.r_rel * 100.0) + "\n");
}

}  // namespace lvo
