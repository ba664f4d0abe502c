#pragma once

#include <cmath>
#include <type_traits>
#include <string>

#include "lvo/raster.hpp"

namespace lvo {

/// Default saturation for inverse depth: depths under 10 cm clamp to 10 1/m.
inline constexpr float kDefaultMaxInverseDepth = 10.0f;

/// out = min(1/d, max_inv) on valid pixels, 0 where d is non-finite or <= 0.
InverseDepthMap invert_depth(const DepthMap& depth,
                             float max_inv = kDefaultMaxInverseDepth);

/// Bilinear interpolation with coordinates clamped to the raster border.
double bilinear_sample(const InverseDepthMap& map, double x, double y);

enum class DepthChannel {
  kInverse,  // F_Z = change of inverse depth (default)
  kMetric,   // F_Z = change of raw depth; ablation only
};

/// Dense 3D flow: (u, v) copied from `flow`, plus
///   F_Z(x, y) = D_{k+1}((x, y) + flow(x, y)) - D_k(x, y)
/// where D_{k+1} is sampled bilinearly. Throws ShapeError on mismatch.
Flow3D associate_3d_flow(const FlowField2D& flow, const InverseDepthMap& invd_k,
                         const InverseDepthMap& invd_k1);

/// Same association computed on raw depth rasters. Invalid depth reads as 0.
Flow3D associate_3d_flow_metric(const FlowField2D& flow, const DepthMap& depth_k,
                                const DepthMap& depth_k1);

/// Area-average pooling by an integer factor after cropping the right and
/// bottom edges to a multiple of the factor. Displacement channels (flow u/v)
/// are additionally divided by the factor. Depth maps average only their
/// valid pixels; a block without any stays invalid (NaN).
template <int C, class Tag>
Raster<C, Tag> downsample_raster(const Raster<C, Tag>& src, int factor) {
  if (factor < 1) {
    throw InvariantError("downsample factor must be >= 1, got " +
                         std::to_string(factor));
  }
  if (factor == 1) return src;
  const int w = src.width() / factor;
  const int h = src.height() / factor;
  if (w == 0 || h == 0) {
    throw ShapeError("downsample factor " + std::to_string(factor) +
                     " exceeds raster size");
  }
  Raster<C, Tag> out(w, h);
  constexpr bool kSkipInvalid = std::is_same_v<Tag, DepthTag>;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        double sum = 0.0;
        int count = 0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) {
            const float v = src.at(x * factor + dx, y * factor + dy, c);
            if constexpr (kSkipInvalid) {
              if (!std::isfinite(v) || v <= 0.0f) continue;
            }
            sum += v;
            ++count;
          }
        }
        double mean = count > 0 ? sum / count : std::nan("");
        if (c < kDisplacementChannels<Tag>) mean /= factor;
        out.at(x, y, c) = static_cast<float>(mean);
      }
    }
  }
  return out;
}

}  // namespace lvo
