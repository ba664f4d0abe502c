#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. None of these call into the library code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "lvo/gaussian_loss.hpp"
#include "lvo/geometry.hpp"
#include "lvo/kitti_eval.hpp"
#include "lvo/network.hpp"
#include "lvo/octree.hpp"

namespace oracle {

// ---------------------------------------------------------------- network

struct Volume {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;
  double& at(int ci, int y, int x) { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
  double at(int ci, int y, int x) const {
    return v[(static_cast<std::size_t>(ci) * h + y) * w + x];
  }
};

inline Volume make_volume(int c, int h, int w) { return {c, h, w, std::vector<double>(c * h * w)}; }

/// Explicitly zero-padded "valid" convolution. Padding is chosen so the
/// output side is ceil(n / stride), split with the smaller half first.
inline Volume conv(const lvo::ConvLayer& l, const Volume& in, std::vector<bool>* pattern) {
  auto plan = [&](int n) {
    const int out = (n + l.stride - 1) / l.stride;
    const int need = (out - 1) * l.stride + l.kernel;
    const int total = need > n ? need - n : 0;
    return std::array<int, 2>{out, total / 2};
  };
  const auto [oh, top] = plan(in.h);
  const auto [ow, left] = plan(in.w);
  Volume padded = make_volume(in.c, in.h + l.kernel + l.stride, in.w + l.kernel + l.stride);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) padded.at(c, y + top, x + left) = in.at(c, y, x);
  Volume out = make_volume(l.out_channels, oh, ow);
  for (int o = 0; o < l.out_channels; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = l.bias[o];
        for (int c = 0; c < l.in_channels; ++c)
          for (int ky = 0; ky < l.kernel; ++ky)
            for (int kx = 0; kx < l.kernel; ++kx) {
              const std::size_t wi =
                  ((static_cast<std::size_t>(o) * l.in_channels + c) * l.kernel + ky) * l.kernel +
                  kx;
              s += l.weights[wi] * padded.at(c, y * l.stride + ky, x * l.stride + kx);
            }
        if (pattern) pattern->push_back(s > 0.0);
        out.at(o, y, x) = std::max(s, 0.0);
      }
  return out;
}

inline std::vector<double> dense(const lvo::DenseLayer& l, const std::vector<double>& in,
                                 bool relu, std::vector<bool>* pattern) {
  std::vector<double> out(l.out_features);
  for (int o = 0; o < l.out_features; ++o) {
    double s = l.bias[o];
    for (int i = 0; i < l.in_features; ++i) {
      s += l.weights[static_cast<std::size_t>(o) * l.in_features + i] * in[i];
    }
    if (relu) {
      if (pattern) pattern->push_back(s > 0.0);
      s = std::max(s, 0.0);
    }
    out[o] = s;
  }
  return out;
}

/// Straight nested-loop forward pass. `pattern` collects the sign of every
/// relu pre-activation, so callers can tell when a perturbation crosses a kink.
inline lvo::RawPoseOutput forward(const lvo::LvoModel& m, const lvo::Flow3D& f,
                                  std::vector<bool>* pattern = nullptr) {
  Volume a = make_volume(2, f.height(), f.width());
  Volume b = make_volume(1, f.height(), f.width());
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      a.at(0, y, x) = f.at(x, y, 0);
      a.at(1, y, x) = f.at(x, y, 1);
      b.at(0, y, x) = f.at(x, y, 2);
    }
  for (const auto& l : m.flow_stream) a = conv(l, a, pattern);
  for (const auto& l : m.depth_stream) b = conv(l, b, pattern);
  Volume cat = make_volume(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), cat.v.begin());
  std::copy(b.v.begin(), b.v.end(), cat.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
  const Volume sq = conv(m.squeeze, cat, pattern);
  auto head = [&](const std::vector<lvo::DenseLayer>& layers) {
    std::vector<double> h = sq.v;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      h = dense(layers[i], h, i + 1 < layers.size(), pattern);
    }
    return h;
  };
  const auto t = head(m.translation_head);
  const auto r = head(m.rotation_head);
  lvo::RawPoseOutput out;
  std::copy(t.begin(), t.end(), out.translation.begin());
  std::copy(r.begin(), r.end(), out.rotation.begin());
  return out;
}

// ------------------------------------------------------------------- loss

/// Bivariate normal density evaluated from the covariance matrix directly.
inline double nll_from_density(double mx, double mz, double sx, double sz, double rho, double x,
                               double z) {
  Eigen::Matrix2d S;
  S << sx * sx, rho * sx * sz, rho * sx * sz, sz * sz;
  const Eigen::Vector2d d(x - mx, z - mz);
  const double quad = d.dot(S.inverse() * d);
  // log of exp(-quad/2) / (2 pi sqrt(det S)), kept in the log domain.
  return 0.5 * quad + std::log(2.0 * M_PI) + 0.5 * std::log(S.determinant());
}

/// Full training loss of a batch, re-derived from the raw outputs.
inline double batch_loss(const lvo::LvoModel& m, const std::vector<lvo::Flow3D>& xs,
                         const std::vector<lvo::RelativePose>& gts, const lvo::LossWeights& w,
                         std::vector<bool>* pattern = nullptr) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto raw = forward(m, xs[i], pattern);
    const auto& t = raw.translation;
    const double sx = std::clamp(std::exp(t[2]), 1e-4, 1e3);
    const double sz = std::clamp(std::exp(t[3]), 1e-4, 1e3);
    const double rho = 0.999 * std::tanh(t[4]);
    total += nll_from_density(t[0], t[1], sx, sz, rho, gts[i].translation.x(),
                              gts[i].translation.z());
    const double dy = t[5] - gts[i].translation.y();
    if (pattern) pattern->push_back(dy > 0.0);
    total += w.lambda1 * std::abs(dy);
    const Eigen::Vector3d dr(raw.rotation[0] - gts[i].euler.z, raw.rotation[1] - gts[i].euler.y,
                             raw.rotation[2] - gts[i].euler.x);
    total += w.lambda2 * dr.norm();
  }
  double sq = 0.0;
  m.for_each_tensor([&](std::span<const double> t, bool is_weight) {
    if (is_weight)
      for (double v : t) sq += v * v;
  });
  return total + w.lambda3 * sq;
}

// ----------------------------------------------------------------- octree

/// Bayes occupancy update evaluated as a running product of odds, without logarithms.
inline double product_form(const std::vector<double>& meas, double prior) {
  double p = prior;
  for (double m : meas) {
    const double num = m * p * (1.0 - prior);
    const double den = num + (1.0 - m) * (1.0 - p) * prior;
    p = num / den;
  }
  return p;
}

/// Every cell of a dense grid whose box the segment passes through with
/// positive length (slab test).
inline std::set<lvo::VoxelKey> dense_ray(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                         double res) {
  std::set<lvo::VoxelKey> out;
  std::array<std::int64_t, 3> lo{}, hi{};
  for (int i = 0; i < 3; ++i) {
    lo[i] = static_cast<std::int64_t>(std::floor(std::min(a[i], b[i]) / res)) - 1;
    hi[i] = static_cast<std::int64_t>(std::floor(std::max(a[i], b[i]) / res)) + 1;
  }
  const Eigen::Vector3d d = b - a;
  for (auto x = lo[0]; x <= hi[0]; ++x)
    for (auto y = lo[1]; y <= hi[1]; ++y)
      for (auto z = lo[2]; z <= hi[2]; ++z) {
        const std::array<std::int64_t, 3> k{x, y, z};
        double t0 = 0.0, t1 = 1.0;
        bool hit = true;
        for (int i = 0; i < 3 && hit; ++i) {
          const double bmin = k[i] * res, bmax = (k[i] + 1) * res;
          if (d[i] == 0.0) {
            hit = a[i] >= bmin && a[i] < bmax;
          } else {
            double ta = (bmin - a[i]) / d[i], tb = (bmax - a[i]) / d[i];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
          }
        }
        const bool inside_start = std::floor(a.x() / res) == x && std::floor(a.y() / res) == y &&
                                  std::floor(a.z() / res) == z;
        if (hit && (t1 - t0 > 1e-12 || inside_start)) out.insert({x, y, z});
      }
  return out;
}

// ------------------------------------------------------------------ KITTI

inline Eigen::Matrix4d mat(const lvo::SE3Pose& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.rotation;
  m.topRightCorner<3, 1>() = p.translation;
  return m;
}

/// O(N^2) enumeration: for each start frame, walk forward summing step
/// lengths until each target length is reached.
inline std::vector<lvo::SegmentError> brute_force_segments(const lvo::Trajectory& gt,
                                                           const lvo::Trajectory& pred,
                                                           const std::vector<double>& lengths,
                                                           double period) {
  std::vector<lvo::SegmentError> out;
  const int n = static_cast<int>(gt.size());
  for (int first = 0; first < n; ++first) {
    for (double len : lengths) {
      double dist = 0.0;
      int last = -1;
      for (int j = first + 1; j < n; ++j) {
        dist += (gt.poses[j].translation - gt.poses[j - 1].translation).norm();
        if (dist >= len) {
          last = j;
          break;
        }
      }
      if (last < 0) continue;
      const Eigen::Matrix4d dg = mat(gt.poses[first]).inverse() * mat(gt.poses[last]);
      const Eigen::Matrix4d dp = mat(pred.poses[first]).inverse() * mat(pred.poses[last]);
      const Eigen::Matrix4d e = dg.inverse() * dp;
      lvo::SegmentError s;
      s.first_frame = first;
      s.last_frame = last;
      s.length = len;
      s.speed = dist / ((last - first) * period);
      s.t_err = e.topRightCorner<3, 1>().norm() / len * 100.0;
      s.r_err = Eigen::AngleAxisd(Eigen::Matrix3d(e.topLeftCorner<3, 3>())).angle() * 180.0 / M_PI / len;
      out.push_back(s);
    }
  }
  return out;
}

// ------------------------------------------------------------- utilities

inline lvo::SE3Pose random_pose(std::mt19937_64& rng, double trans_scale = 1.0) {
  std::uniform_real_distribution<double> ang(-M_PI, M_PI), tr(-trans_scale, trans_scale);
  std::normal_distribution<double> n01;
  const Eigen::Vector3d axis(n01(rng), n01(rng), n01(rng));
  lvo::SE3Pose p;
  p.rotation = Eigen::AngleAxisd(ang(rng), axis.normalized()).matrix();
  p.translation = Eigen::Vector3d(tr(rng), tr(rng), tr(rng));
  return p;
}

}  // namespace oracle
