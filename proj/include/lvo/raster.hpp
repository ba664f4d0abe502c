#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lvo/error.hpp"

namespace lvo {

/// Dense row-major raster of float32 with interleaved channels.
///
/// `Tag` keeps rasters with the same channel count but different meaning
/// (depth vs inverse depth) from being mixed up.
template <int Channels, class Tag>
class Raster {
 public:
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, float fill = 0.0f)
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw ShapeError("raster dimensions must be positive, got " +
                       std::to_string(width) + "x" + std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const { return data_.empty(); }

  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  template <int C, class T>
  bool same_size(const Raster<C, T>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

struct FlowTag {};
struct DepthTag {};
struct InverseDepthTag {};
struct Flow3DTag {};

/// Channels (u, v) displacement in pixels from frame k to k+1.
using FlowField2D = Raster<2, FlowTag>;
/// Metric depth; invalid pixels are non-finite or <= 0.
using DepthMap = Raster<1, DepthTag>;
/// 1/depth in 1/m, always finite and >= 0.
using InverseDepthMap = Raster<1, InverseDepthTag>;
/// Channels (F_X, F_Y) in pixels and F_Z in inverse-depth units.
using Flow3D = Raster<3, Flow3DTag>;

/// Number of leading channels that carry pixel displacements and therefore
/// scale with resolution.
template <class Tag>
inline constexpr int kDisplacementChannels = 0;
template <>
inline constexpr int kDisplacementChannels<FlowTag> = 2;
template <>
inline constexpr int kDisplacementChannels<Flow3DTag> = 2;

}  // namespace lvo
