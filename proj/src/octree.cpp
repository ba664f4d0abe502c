#include "lvo/octree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "binary_io.hpp"
#include "lvo/error.hpp"

namespace lvo {

namespace {

constexpr int kMaxDepth = 60;
constexpr std::string_view kOctreeMagic = "LVOOCT01";

bool is_probability(double p) { return p > 0.0 && p < 1.0; }

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

struct OccupancyOctree::Node {
  std::array<std::unique_ptr<Node>, 8> children;
  std::unique_ptr<Leaf> leaf;
};

void OctreeConfig::validate() const {
  auto fail = [](const std::string& m) { throw InvariantError("OctreeConfig: " + m); };
  if (!(resolution > 0.0) || !std::isfinite(resolution)) fail("resolution must be positive");
  if (!is_probability(prob_hit) || !is_probability(prob_miss) || !is_probability(prior)) {
    fail("sensor probabilities and prior must lie in (0, 1)");
  }
  if (!(prob_miss < prior && prior < prob_hit)) fail("need prob_miss < prior < prob_hit");
  if (!(clamp_min >= 0.0 && clamp_max <= 1.0)) fail("clamps must lie in [0, 1]");
  if (!(clamp_min < occupancy_threshold && occupancy_threshold <= clamp_max)) {
    fail("need clamp_min < occupancy_threshold <= clamp_max");
  }
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double logistic(double l) { return 1.0 / (1.0 + std::exp(-l)); }

double update_logodds(double current, double meas_prob, const OctreeConfig& cfg) {
  if (!is_probability(meas_prob)) {
    throw InvariantError("measurement probability must lie in (0, 1), got " +
                         std::to_string(meas_prob));
  }
  const double l = current + logit(meas_prob) - logit(cfg.prior);
  return std::clamp(l, logit(cfg.clamp_min), logit(cfg.clamp_max));
}

std::vector<VoxelKey> trace_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& end,
                                double resolution) {
  auto key = [&](const Eigen::Vector3d& p) {
    return VoxelKey{static_cast<std::int64_t>(std::floor(p.x() / resolution)),
                    static_cast<std::int64_t>(std::floor(p.y() / resolution)),
                    static_cast<std::int64_t>(std::floor(p.z() / resolution))};
  };
  VoxelKey current = key(origin);
  const VoxelKey last = key(end);
  std::vector<VoxelKey> keys{current};
  if (current == last) return keys;

  const Eigen::Vector3d dir = end - origin;
  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  std::int64_t budget = 0;
  for (int a = 0; a < 3; ++a) {
    budget += std::abs(last[a] - current[a]);
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_max[a] = ((current[a] + 1) * resolution - origin[a]) / dir[a];
      t_delta[a] = resolution / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (current[a] * resolution - origin[a]) / dir[a];
      t_delta[a] = -resolution / dir[a];
    } else {
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }
  for (std::int64_t i = 0; i < budget && current != last; ++i) {
    int a = 0;
    if (t_max[1] < t_max[a]) a = 1;
    if (t_max[2] < t_max[a]) a = 2;
    current[a] += step[a];
    t_max[a] += t_delta[a];
    keys.push_back(current);
  }
  // Rounding at cell borders can leave the walk one cell short.
  if (keys.back() != last) keys.push_back(last);
  return keys;
}

Rgb OccupancyOctree::Leaf::mean_color() const {
  if (color_count == 0) return {128, 128, 128};
  auto mean = [&](int c) {
    return static_cast<std::uint8_t>((color_sum[c] + color_count / 2) / color_count);
  };
  return {mean(0), mean(1), mean(2)};
}

OccupancyOctree::OccupancyOctree(OctreeConfig cfg) : cfg_(cfg) { cfg_.validate(); }
OccupancyOctree::~OccupancyOctree() = default;
OccupancyOctree::OccupancyOctree(OccupancyOctree&&) noexcept = default;
OccupancyOctree& OccupancyOctree::operator=(OccupancyOctree&&) noexcept = default;

VoxelKey OccupancyOctree::key_of(const Eigen::Vector3d& p) const {
  if (!p.allFinite()) throw InvariantError("octree: non-finite coordinate");
  VoxelKey k;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(p[a] / cfg_.resolution);
    if (std::abs(f) > 1e17) throw InvariantError("octree: coordinate out of range");
    k[a] = static_cast<std::int64_t>(f);
  }
  return k;
}

Eigen::Vector3d OccupancyOctree::center_of(const VoxelKey& key) const {
  return {(key[0] + 0.5) * cfg_.resolution, (key[1] + 0.5) * cfg_.resolution,
          (key[2] + 0.5) * cfg_.resolution};
}

bool OccupancyOctree::in_range(const VoxelKey& key) const {
  const std::int64_t half = std::int64_t{1} << (depth_ - 1);
  return std::all_of(key.begin(), key.end(),
                     [&](std::int64_t k) { return k >= -half && k < half; });
}

void OccupancyOctree::expand_to(const VoxelKey& key) {
  while (!in_range(key)) {
    if (depth_ >= kMaxDepth) throw InvariantError("octree: maximum extent exceeded");
    if (root_) {
      // Each old octant becomes the center-facing child of a new octant.
      auto new_root = std::make_unique<Node>();
      for (int i = 0; i < 8; ++i) {
        if (!root_->children[i]) continue;
        auto mid = std::make_unique<Node>();
        mid->children[i ^ 7] = std::move(root_->children[i]);
        new_root->children[i] = std::move(mid);
      }
      root_ = std::move(new_root);
    }
    ++depth_;
  }
}

OccupancyOctree::Leaf& OccupancyOctree::touch(const VoxelKey& key) {
  expand_to(key);
  if (!root_) root_ = std::make_unique<Node>();
  const std::int64_t offset = std::int64_t{1} << (depth_ - 1);
  Node* node = root_.get();
  for (int level = depth_ - 1; level >= 0; --level) {
    int idx = 0;
    for (int a = 0; a < 3; ++a) {
      idx |= static_cast<int>(((key[a] + offset) >> level) & 1) << a;
    }
    auto& child = node->children[idx];
    if (!child) child = std::make_unique<Node>();
    node = child.get();
  }
  if (!node->leaf) {
    node->leaf = std::make_unique<Leaf>();
    node->leaf->log_odds = logit(cfg_.prior);
    ++leaf_count_;
  }
  return *node->leaf;
}

const OccupancyOctree::Leaf* OccupancyOctree::find(const VoxelKey& key) const {
  if (!root_ || !in_range(key)) return nullptr;
  const std::int64_t offset = std::int64_t{1} << (depth_ - 1);
  const Node* node = root_.get();
  for (int level = depth_ - 1; level >= 0; --level) {
    int idx = 0;
    for (int a = 0; a < 3; ++a) {
      idx |= static_cast<int>(((key[a] + offset) >> level) & 1) << a;
    }
    node = node->children[idx].get();
    if (node == nullptr) return nullptr;
  }
  return node->leaf.get();
}

double OccupancyOctree::probability(const VoxelKey& key) const {
  const Leaf* leaf = find(key);
  return leaf ? logistic(leaf->log_odds) : cfg_.prior;
}

void OccupancyOctree::update(const VoxelKey& key, double meas_prob) {
  Leaf& leaf = touch(key);
  leaf.log_odds = update_logodds(leaf.log_odds, meas_prob, cfg_);
}

void OccupancyOctree::add_color(const VoxelKey& key, Rgb color) {
  Leaf& leaf = touch(key);
  leaf.color_sum[0] += color.r;
  leaf.color_sum[1] += color.g;
  leaf.color_sum[2] += color.b;
  ++leaf.color_count;
}

void OccupancyOctree::insert_point_cloud(const Eigen::Vector3d& sensor_origin,
                                         const PointCloud& cloud) {
  if (!sensor_origin.allFinite()) throw InvariantError("octree: non-finite sensor origin");
  if (cloud.has_colors() && cloud.colors.size() != cloud.points.size()) {
    throw ShapeError("point cloud has " + std::to_string(cloud.points.size()) +
                     " points but " + std::to_string(cloud.colors.size()) + " colors");
  }
  std::set<VoxelKey> hits;
  std::set<VoxelKey> misses;
  std::vector<std::pair<VoxelKey, Rgb>> colors;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    if (!p.allFinite()) continue;
    if (cfg_.max_range > 0.0 && (p - sensor_origin).norm() > cfg_.max_range) continue;
    const auto ray = trace_ray(sensor_origin, p, cfg_.resolution);
    hits.insert(ray.back());
    misses.insert(ray.begin(), ray.end() - 1);
    if (cloud.has_colors()) colors.emplace_back(ray.back(), cloud.colors[i]);
  }
  for (const auto& k : misses) {
    if (!hits.contains(k)) update(k, cfg_.prob_miss);
  }
  for (const auto& k : hits) update(k, cfg_.prob_hit);
  for (const auto& [k, c] : colors) add_color(k, c);
}

void OccupancyOctree::for_each_leaf(
    const std::function<void(const VoxelKey&, const Leaf&)>& fn) const {
  if (!root_) return;
  const std::int64_t offset = std::int64_t{1} << (depth_ - 1);
  auto walk = [&](auto& self, const Node& node, int level, VoxelKey base) -> void {
    if (level < 0) {
      if (node.leaf) {
        fn({base[0] - offset, base[1] - offset, base[2] - offset}, *node.leaf);
      }
      return;
    }
    for (int i = 0; i < 8; ++i) {
      if (!node.children[i]) continue;
      VoxelKey k = base;
      for (int a = 0; a < 3; ++a) k[a] |= static_cast<std::int64_t>((i >> a) & 1) << level;
      self(self, *node.children[i], level - 1, k);
    }
  };
  walk(walk, *root_, depth_ - 1, {0, 0, 0});
}

VoxelList OccupancyOctree::extract_occupied() const {
  VoxelList out;
  for_each_leaf([&](const VoxelKey& key, const Leaf& leaf) {
    const double p = logistic(leaf.log_odds);
    if (p > cfg_.occupancy_threshold) {
      out.push_back({center_of(key), cfg_.resolution, p, leaf.mean_color()});
    }
  });
  return out;
}

void OccupancyOctree::save(const std::filesystem::path& path) const {
  detail::ByteWriter w;
  w.raw(kOctreeMagic);
  for (double v : {cfg_.resolution, cfg_.prob_hit, cfg_.prob_miss, cfg_.prior,
                   cfg_.occupancy_threshold, cfg_.clamp_min, cfg_.clamp_max, cfg_.max_range}) {
    w.put(v);
  }
  w.put(static_cast<std::uint32_t>(depth_));
  w.put(static_cast<std::uint8_t>(root_ ? 1 : 0));
  auto write = [&](auto& self, const Node& node, int level) -> void {
    if (level < 0) {
      const Leaf& leaf = *node.leaf;
      w.put(leaf.log_odds);
      for (auto s : leaf.color_sum) w.put(s);
      w.put(leaf.color_count);
      return;
    }
    std::uint8_t mask = 0;
    for (int i = 0; i < 8; ++i) {
      if (node.children[i]) mask |= static_cast<std::uint8_t>(1u << i);
    }
    w.put(mask);
    for (int i = 0; i < 8; ++i) {
      if (node.children[i]) self(self, *node.children[i], level - 1);
    }
  };
  if (root_) write(write, *root_, depth_ - 1);
  detail::write_file(path, w.bytes());
}

OccupancyOctree OccupancyOctree::load(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  detail::ByteReader r(bytes, path.string());
  if (r.raw(kOctreeMagic.size()) != kOctreeMagic) {
    throw ParseError(path.string() + ": bad magic");
  }
  OctreeConfig cfg;
  for (double* v : {&cfg.resolution, &cfg.prob_hit, &cfg.prob_miss, &cfg.prior,
                    &cfg.occupancy_threshold, &cfg.clamp_min, &cfg.clamp_max, &cfg.max_range}) {
    *v = r.get<double>();
  }
  OccupancyOctree tree(cfg);
  const auto depth = r.get<std::uint32_t>();
  if (depth < 1 || depth > kMaxDepth) throw ParseError(path.string() + ": bad depth");
  tree.depth_ = static_cast<int>(depth);
  const auto has_root = r.get<std::uint8_t>();
  auto read = [&](auto& self, int level) -> std::unique_ptr<Node> {
    auto node = std::make_unique<Node>();
    if (level < 0) {
      node->leaf = std::make_unique<Leaf>();
      node->leaf->log_odds = r.get<double>();
      for (auto& s : node->leaf->color_sum) s = r.get<std::uint64_t>();
      node->leaf->color_count = r.get<std::uint32_t>();
      ++tree.leaf_count_;
      return node;
    }
    const auto mask = r.get<std::uint8_t>();
    for (int i = 0; i < 8; ++i) {
      if (mask & (1u << i)) node->children[i] = self(self, level - 1);
    }
    return node;
  };
  if (has_root > 1) throw ParseError(path.string() + ": bad root flag");
  if (has_root) tree.root_ = read(read, tree.depth_ - 1);
  if (r.remaining() != 0) throw ParseError(path.string() + ": trailing bytes");
  return tree;
}

VoxelList extract_occupied(const OccupancyOctree& tree) { return tree.extract_occupied(); }

void export_ply(const VoxelList& voxels, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "ply\nformat ascii 1.0\nelement vertex " << voxels.size()
     << "\nproperty float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (const auto& v : voxels) {
    os << format_double(v.center.x()) << ' ' << format_double(v.center.y()) << ' '
       << format_double(v.center.z()) << ' ' << int{v.color.r} << ' ' << int{v.color.g}
       << ' ' << int{v.color.b} << '\n';
  }
  detail::write_file(path, os.str());
}

VoxelList read_ply_vertices(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  std::string line;
  std::size_t count = 0;
  bool header_done = false;
  if (!std::getline(in, line) || line != "ply") {
    throw ParseError(path.string() + ": not a PLY file");
  }
  while (std::getline(in, line)) {
    if (line.rfind("element vertex ", 0) == 0) count = std::stoull(line.substr(15));
    if (line == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw ParseError(path.string() + ": missing end_header");
  VoxelList out;
  for (std::size_t i = 0; i < count; ++i) {
    double x, y, z;
    int r, g, b;
    if (!(in >> x >> y >> z >> r >> g >> b)) {
      throw ParseError(path.string() + ": vertex " + std::to_string(i) + " malformed");
    }
    out.push_back({{x, y, z}, 0.0, 0.0,
                   {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                    static_cast<std::uint8_t>(b)}});
  }
  return out;
}

}  // namespace lvo
