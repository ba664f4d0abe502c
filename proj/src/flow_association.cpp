#include "lvo/flow_association.hpp"

#include <algorithm>
#include <cmath>

namespace lvo {

namespace {

void require_same_size(const FlowField2D& flow, int w, int h, const char* what) {
  if (flow.width() != w || flow.height() != h) {
    throw ShapeError(std::string("associate_3d_flow: ") + what + " is " +
                     std::to_string(w) + "x" + std::to_string(h) +
                     " but flow is " + std::to_string(flow.width()) + "x" +
                     std::to_string(flow.height()));
  }
}

template <class Map>
double sample_clamped(const Map& map, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(map.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(map.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, map.width() - 1);
  const int y1 = std::min(y0 + 1, map.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * map.at(x0, y0) + fx * map.at(x1, y0);
  const double bottom = (1.0 - fx) * map.at(x0, y1) + fx * map.at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

template <class Map>
Flow3D associate(const FlowField2D& flow, const Map& d_k, const Map& d_k1) {
  require_same_size(flow, d_k.width(), d_k.height(), "frame k depth");
  require_same_size(flow, d_k1.width(), d_k1.height(), "frame k+1 depth");
  Flow3D out(flow.width(), flow.height());
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      const float u = flow.at(x, y, 0);
      const float v = flow.at(x, y, 1);
      const double warped = sample_clamped(d_k1, x + double{u}, y + double{v});
      out.at(x, y, 0) = u;
      out.at(x, y, 1) = v;
      out.at(x, y, 2) = static_cast<float>(warped - d_k.at(x, y));
    }
  }
  return out;
}

}  // namespace

InverseDepthMap invert_depth(const DepthMap& depth, float max_inv) {
  if (!(max_inv > 0.0f)) {
    throw InvariantError("max inverse depth must be positive");
  }
  InverseDepthMap out(depth.width(), depth.height());
  auto src = depth.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const float d = src[i];
    dst[i] = (std::isfinite(d) && d > 0.0f) ? std::min(1.0f / d, max_inv) : 0.0f;
  }
  return out;
}

double bilinear_sample(const InverseDepthMap& map, double x, double y) {
  return sample_clamped(map, x, y);
}

Flow3D associate_3d_flow(const FlowField2D& flow, const InverseDepthMap& invd_k,
                         const InverseDepthMap& invd_k1) {
  return associate(flow, invd_k, invd_k1);
}

Flow3D associate_3d_flow_metric(const FlowField2D& flow, const DepthMap& depth_k,
                                const DepthMap& depth_k1) {
  auto sanitize = [](const DepthMap& d) {
    DepthMap out = d;
    for (float& v : out.data()) {
      if (!std::isfinite(v) || v <= 0.0f) v = 0.0f;
    }
    return out;
  };
  return associate(flow, sanitize(depth_k), sanitize(depth_k1));
}

}  // namespace lvo
