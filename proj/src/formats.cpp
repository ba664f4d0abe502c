#include "lvo/formats.hpp"

#include <Eigen/SVD>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "lvo/error.hpp"

namespace lvo {

namespace {

constexpr float kFloTag = 202021.25f;
constexpr std::string_view kF3dMagic = "F3D1";

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string pose_line(const SE3Pose& p) {
  std::string line;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!line.empty()) line += ' ';
      line += format_double(c < 3 ? p.rotation(r, c) : p.translation(r));
    }
  }
  line += '\n';
  return line;
}

std::vector<double> parse_doubles(std::string_view line) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p == end) break;
    double v;
    auto res = std::from_chars(p, end, v);
    if (res.ec != std::errc()) throw ParseError("not a number");
    out.push_back(v);
    p = res.ptr;
  }
  return out;
}

void check_dims(std::int64_t w, std::int64_t h, const std::string& name) {
  if (w < 1 || h < 1 || w > 100000 || h > 100000) {
    throw ParseError(name + ": illegal dimensions " + std::to_string(w) + "x" +
                     std::to_string(h));
  }
}

}  // namespace

Trajectory load_poses(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  Trajectory traj;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> v;
    try {
      v = parse_doubles(line);
    } catch (const ParseError&) {
      throw ParseError(where + ": malformed number");
    }
    if (v.size() != 12) {
      throw ParseError(where + ": expected 12 values, got " + std::to_string(v.size()));
    }
    SE3Pose pose;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) pose.rotation(r, c) = v[4 * r + c];
      pose.translation(r) = v[4 * r + 3];
    }
    if (!pose.rotation.allFinite() || !pose.translation.allFinite()) {
      throw ParseError(where + ": non-finite value");
    }
    const double drift = orthonormality_error(pose.rotation);
    if (drift >= 1e-3 || pose.rotation.determinant() <= 0.0) {
      throw ParseError(where + ": rotation is not orthonormal");
    }
    if (drift > 1e-10) {
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(pose.rotation,
                                            Eigen::ComputeFullU | Eigen::ComputeFullV);
      pose.rotation = svd.matrixU() * svd.matrixV().transpose();
    }
    traj.poses.push_back(pose);
  }
  return traj;
}

void save_poses(const Trajectory& traj, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : traj.poses) out += pose_line(p);
  detail::write_file(path, out);
}

struct PoseWriter::Impl {
  std::ofstream out;
  std::string name;
};

PoseWriter::PoseWriter(const std::filesystem::path& path)
    : impl_(std::make_unique<Impl>()) {
  impl_->name = path.string();
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw IoError("cannot open " + impl_->name + " for writing");
}

PoseWriter::~PoseWriter() = default;

void PoseWriter::write(const SE3Pose& pose) {
  impl_->out << pose_line(pose);
  if (!impl_->out) throw IoError("failed writing " + impl_->name);
}

void PoseWriter::close() {
  impl_->out.close();
  if (!impl_->out) throw IoError("failed closing " + impl_->name);
}

FlowField2D read_flo(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string name = path.string();
  detail::ByteReader r(bytes, name);
  if (r.get<float>() != kFloTag) throw ParseError(name + ": bad magic");
  const auto w = r.get<std::int32_t>();
  const auto h = r.get<std::int32_t>();
  check_dims(w, h, name);
  const std::size_t expected = 12 + static_cast<std::size_t>(w) * h * 8;
  if (bytes.size() != expected) {
    throw ParseError(name + ": expected " + std::to_string(expected) + " bytes, found " +
                     std::to_string(bytes.size()));
  }
  FlowField2D flow(w, h);
  for (float& v : flow.data()) v = r.get<float>();
  return flow;
}

void write_flo(const FlowField2D& flow, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.put(kFloTag);
  w.put(static_cast<std::int32_t>(flow.width()));
  w.put(static_cast<std::int32_t>(flow.height()));
  for (float v : flow.data()) w.put(v);
  detail::write_file(path, w.bytes());
}

DepthMap read_pfm(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string name = path.string();
  // Header: three whitespace-separated lines; exactly one whitespace byte
  // separates the scale from the payload.
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError(name + ": truncated PFM header");
    return bytes.substr(start, pos - start);
  };
  const std::string kind = token();
  if (kind == "PF") throw ParseError(name + ": colour PFM (PF) is not supported");
  if (kind != "Pf") throw ParseError(name + ": not a PFM file");
  std::int64_t w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoll(token());
    h = std::stoll(token());
    scale = std::stod(token());
  } catch (const std::logic_error&) {
    throw ParseError(name + ": malformed PFM header");
  }
  check_dims(w, h, name);
  if (scale == 0.0 || !std::isfinite(scale)) throw ParseError(name + ": bad PFM scale");
  ++pos;  // single separator byte
  const std::size_t payload = static_cast<std::size_t>(w) * h * 4;
  if (pos > bytes.size() || bytes.size() - pos != payload) {
    throw ParseError(name + ": expected " + std::to_string(payload) + " payload bytes");
  }
  const std::endian order = scale < 0.0 ? std::endian::little : std::endian::big;
  detail::ByteReader r(std::string_view(bytes).substr(pos), name);
  DepthMap depth(static_cast<int>(w), static_cast<int>(h));
  for (int y = depth.height() - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width(); ++x) depth.at(x, y) = r.get<float>(order);
  }
  return depth;
}

void write_pfm(const DepthMap& depth, const std::filesystem::path& path,
               std::endian order) {
  detail::ByteWriter w;
  w.raw("Pf\n" + std::to_string(depth.width()) + " " + std::to_string(depth.height()) +
        "\n" + (order == std::endian::little ? "-1.0" : "1.0") + "\n");
  for (int y = depth.height() - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width(); ++x) w.put(depth.at(x, y), order);
  }
  detail::write_file(path, w.bytes());
}

Flow3D read_f3d(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string name = path.string();
  detail::ByteReader r(bytes, name);
  if (r.raw(kF3dMagic.size()) != kF3dMagic) throw ParseError(name + ": bad magic");
  const auto w = r.get<std::int32_t>();
  const auto h = r.get<std::int32_t>();
  check_dims(w, h, name);
  const std::size_t expected = 12 + static_cast<std::size_t>(w) * h * 12;
  if (bytes.size() != expected) {
    throw ParseError(name + ": expected " + std::to_string(expected) + " bytes");
  }
  Flow3D flow(w, h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) flow.at(x, y, c) = r.get<float>();
    }
  }
  return flow;
}

void write_f3d(const Flow3D& flow, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(kF3dMagic);
  w.put(static_cast<std::int32_t>(flow.width()));
  w.put(static_cast<std::int32_t>(flow.height()));
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < flow.height(); ++y) {
      for (int x = 0; x < flow.width(); ++x) w.put(flow.at(x, y, c));
    }
  }
  detail::write_file(path, w.bytes());
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::vector<double> v;
  try {
    v = parse_doubles(text.substr(0, text.find('\n')));
  } catch (const ParseError&) {
    throw ParseError(path.string() + ": malformed intrinsics");
  }
  if (v.size() != 5) {
    throw ParseError(path.string() + ": expected \"fx fy cx cy skew\", got " +
                     std::to_string(v.size()) + " values");
  }
  CameraIntrinsics intr{v[0], v[1], v[2], v[3], v[4]};
  try {
    intr.validate();
  } catch (const InvariantError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return intr;
}

void write_intrinsics(const CameraIntrinsics& intr, const std::filesystem::path& path) {
  detail::write_file(path, format_double(intr.fx) + " " + format_double(intr.fy) + " " +
                               format_double(intr.cx) + " " + format_double(intr.cy) + " " +
                               format_double(intr.skew) + "\n");
}

ColorImage read_ppm(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string name = path.string();
  std::size_t pos = 0;
  auto token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError(name + ": truncated PPM header");
    return bytes.substr(start, pos - start);
  };
  if (token() != "P6") throw ParseError(name + ": only binary P6 PPM is supported");
  ColorImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    if (std::stoi(token()) != 255) throw ParseError(name + ": maxval must be 255");
  } catch (const std::logic_error&) {
    throw ParseError(name + ": malformed PPM header");
  }
  check_dims(img.width, img.height, name);
  ++pos;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * 3;
  if (pos > bytes.size() || bytes.size() - pos != n) throw ParseError(name + ": bad PPM size");
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void write_ppm(const ColorImage& image, const std::filesystem::path& path) {
  std::string out = "P6\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(image.data.begin(), image.data.end());
  detail::write_file(path, out);
}

}  // namespace lvo
