#include "lvo/pipeline.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "lvo/error.hpp"
#include "lvo/flow_association.hpp"
#include "lvo/formats.hpp"

namespace lvo {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw IoError("missing " + what + ": " + p.string());
}

/// Runs one stage, re-raising errors with the stage name prepended while
/// keeping their failure class.
template <class F>
auto run_stage(const std::string& name, F&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError("stage " + name + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError("stage " + name + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError("stage " + name + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError("stage " + name + ": " + e.what());
  }
}

std::uint64_t pair_seed(std::uint64_t seed, int pair) {
  return seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(pair + 1));
}

}  // namespace

std::string frame_file_name(int frame, const char* extension) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.%s", frame, extension);
  return buf;
}

SequenceIndex index_sequence(const fs::path& root, const std::string& id, double frame_period) {
  SequenceIndex seq;
  seq.id = id;
  seq.frame_period = frame_period;
  const fs::path dir = root / "sequences" / id;
  seq.intrinsics_path = dir / "calib.txt";
  while (fs::is_regular_file(dir / "depth" / frame_file_name(seq.frame_count, "pfm"))) {
    seq.depth_paths.push_back(dir / "depth" / frame_file_name(seq.frame_count, "pfm"));
    ++seq.frame_count;
  }
  if (seq.frame_count == 0) throw IoError("sequence " + id + ": no depth frames in " + dir.string());
  for (int k = 0; k + 1 < seq.frame_count; ++k) {
    seq.flow_paths.push_back(dir / "flow" / frame_file_name(k, "flo"));
  }
  if (fs::is_regular_file(dir / "image" / frame_file_name(0, "ppm"))) {
    for (int k = 0; k < seq.frame_count; ++k) {
      seq.image_paths.push_back(dir / "image" / frame_file_name(k, "ppm"));
    }
  }
  const fs::path poses = root / "poses" / (id + ".txt");
  if (fs::is_regular_file(poses)) seq.pose_path = poses;
  return seq;
}

std::vector<fs::path> cmd_associate(const SequenceIndex& seq, const AssociationConfig& cfg,
                                    const fs::path& out_dir) {
  ensure_dir(out_dir);
  std::vector<fs::path> written;
  auto load_depth = [&](int k) {
    require_file(seq.depth_paths.at(k), "depth for frame " + std::to_string(k));
    return downsample_raster(read_pfm(seq.depth_paths[k]), cfg.downsample);
  };
  DepthMap depth_k = seq.frame_count > 1 ? load_depth(0) : DepthMap{};
  for (int k = 0; k + 1 < seq.frame_count; ++k) {
    require_file(seq.flow_paths.at(k), "flow for frame " + std::to_string(k));
    const FlowField2D flow = downsample_raster(read_flo(seq.flow_paths[k]), cfg.downsample);
    DepthMap depth_k1 = load_depth(k + 1);
    const Flow3D f3d = cfg.metric_depth
                           ? associate_3d_flow_metric(flow, depth_k, depth_k1)
                           : associate_3d_flow(flow, invert_depth(depth_k, cfg.max_inverse_depth),
                                               invert_depth(depth_k1, cfg.max_inverse_depth));
    const fs::path out = out_dir / frame_file_name(k, "f3d");
    write_f3d(f3d, out);
    written.push_back(out);
    depth_k = std::move(depth_k1);
  }
  return written;
}

std::vector<TrainingSample> load_training_samples(const SequenceIndex& seq,
                                                  const fs::path& f3d_dir) {
  if (!seq.pose_path) throw IoError("sequence " + seq.id + ": missing ground-truth poses");
  const Trajectory gt = load_poses(*seq.pose_path);
  if (static_cast<int>(gt.size()) != seq.frame_count) {
    throw ShapeError("sequence " + seq.id + ": " + std::to_string(gt.size()) +
                     " ground-truth poses for " + std::to_string(seq.frame_count) + " frames");
  }
  if (gt.size() < 2) return {};
  const auto rels = relative_from_absolute(gt);
  std::vector<TrainingSample> out;
  for (std::size_t k = 0; k < rels.size(); ++k) {
    const fs::path p = f3d_dir / frame_file_name(static_cast<int>(k), "f3d");
    require_file(p, "associated flow for frame " + std::to_string(k) + " (run associate first)");
    out.push_back({read_f3d(p), rels[k]});
  }
  return out;
}

TrainResult cmd_train(const PipelineConfig& cfg) {
  const OutputLayout layout{cfg.output_dir};
  const auto& ids = cfg.train_sequences.empty() ? cfg.sequences : cfg.train_sequences;
  std::vector<TrainingSample> data;
  for (const auto& id : ids) {
    const SequenceIndex seq = index_sequence(cfg.dataset_root, id, cfg.eval.frame_period);
    auto samples = load_training_samples(seq, layout.f3d_dir(id));
    for (auto& s : samples) data.push_back(std::move(s));
  }
  if (data.empty()) throw InvariantError("train: no training samples");
  ensure_dir(layout.root);
  TrainResult result = train(init_model(cfg.lvo, cfg.train.seed), data, cfg.train, cfg.loss);
  save_checkpoint(result.model, layout.checkpoint());
  std::string log = "epoch,loss,learning_rate\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::ostringstream row;
    row << e << ',' << std::setprecision(17) << result.epoch_loss[e] << ','
        << cfg.train.learning_rate * std::pow(cfg.train.lr_decay, static_cast<double>(e))
        << '\n';
    log += row.str();
  }
  detail::write_file(layout.loss_log(), log);
  return result;
}

Trajectory cmd_odometry(const LvoModel& model, const fs::path& f3d_dir, int pair_count,
                        const PredictConfig& predict, const fs::path& out_file) {
  ensure_dir(out_file.parent_path().empty() ? fs::path(".") : out_file.parent_path());
  PoseWriter writer(out_file);
  Trajectory traj;
  SE3Pose pose = SE3Pose::identity();
  traj.poses.push_back(pose);
  writer.write(pose);
  for (int k = 0; k < pair_count; ++k) {
    const fs::path p = f3d_dir / frame_file_name(k, "f3d");
    require_file(p, "associated flow for frame " + std::to_string(k));
    const RawPoseOutput raw = forward(model, read_f3d(p));
    PredictConfig pc = predict;
    pc.seed = pair_seed(predict.seed, k);
    const RelativePose rel = to_relative_pose(decode(raw), pc);
    pose = pose * rel.to_se3();
    traj.poses.push_back(pose);
    writer.write(pose);
  }
  writer.close();
  return traj;
}

ErrorReport cmd_evaluate(const fs::path& gt_file, const fs::path& pred_file,
                         const fs::path& out_dir, const EvalConfig& cfg) {
  const Trajectory gt = load_poses(gt_file);
  const Trajectory pred = load_poses(pred_file);
  ErrorReport report = kitti_errors(gt, pred, cfg);
  report_csv(report, out_dir);
  return report;
}

VoxelList cmd_map(const fs::path& trajectory_file, const SequenceIndex& seq,
                  const OctreeConfig& octree, const MapConfig& map, const fs::path& out_ply) {
  const Trajectory traj = load_poses(trajectory_file);
  if (static_cast<int>(traj.size()) != seq.frame_count) {
    throw ShapeError("map: trajectory has " + std::to_string(traj.size()) + " poses but " +
                     seq.id + " has " + std::to_string(seq.frame_count) + " depth frames");
  }
  OccupancyOctree tree(octree);
  if (seq.frame_count > 0) {
    require_file(seq.intrinsics_path, "intrinsics");
    const CameraIntrinsics intr = read_intrinsics(seq.intrinsics_path);
    for (int k = 0; k < seq.frame_count; ++k) {
      DepthMap depth = read_pfm(seq.depth_paths[k]);
      std::optional<ColorImage> image;
      if (!seq.image_paths.empty()) image = read_ppm(seq.image_paths[k]);
      if (map.pixel_stride > 1) {
        // Keep every n-th pixel by invalidating the rest.
        for (int v = 0; v < depth.height(); ++v) {
          for (int u = 0; u < depth.width(); ++u) {
            if (u % map.pixel_stride != 0 || v % map.pixel_stride != 0) {
              depth.at(u, v) = std::numeric_limits<float>::quiet_NaN();
            }
          }
        }
      }
      PointCloud cloud = backproject(intr, depth, image ? &*image : nullptr);
      cloud.transform(traj.poses[k]);
      tree.insert_point_cloud(traj.poses[k].translation, cloud);
    }
  }
  VoxelList voxels = tree.extract_occupied();
  if (!out_ply.parent_path().empty()) ensure_dir(out_ply.parent_path());
  export_ply(voxels, out_ply);
  return voxels;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(detail::read_file(path)); }

std::string cmd_run(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.sequences.empty()) throw ParseError("run: no sequences configured");
  const OutputLayout layout{cfg.output_dir};
  ensure_dir(layout.root);

  nlohmann::ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["config_sha256"] = sha256_hex(cfg.canonical_text());
  manifest["seeds"] = {{"train", cfg.train.seed}, {"predict", cfg.predict.seed}};
  manifest["deterministic"] = cfg.predict.deterministic;
  std::vector<fs::path> outputs;

  std::vector<SequenceIndex> seqs;
  for (const auto& id : cfg.sequences) {
    seqs.push_back(index_sequence(cfg.dataset_root, id, cfg.eval.frame_period));
  }
  for (const auto& id : cfg.train_sequences) {
    if (std::find(cfg.sequences.begin(), cfg.sequences.end(), id) == cfg.sequences.end()) {
      seqs.push_back(index_sequence(cfg.dataset_root, id, cfg.eval.frame_period));
    }
  }

  run_stage("associate", [&] {
    for (const auto& seq : seqs) {
      for (auto& p : cmd_associate(seq, cfg.association, layout.f3d_dir(seq.id))) {
        outputs.push_back(p);
      }
    }
    return 0;
  });

  LvoModel model;
  if (cfg.checkpoint) {
    model = run_stage("load checkpoint", [&] { return load_checkpoint(*cfg.checkpoint); });
    manifest["model"] = {{"source", "checkpoint"}, {"sha256", sha256_file(*cfg.checkpoint)}};
  } else {
    model = run_stage("train", [&] { return cmd_train(cfg).model; });
    // Odometry uses the model exactly as stored on disk.
    model = load_checkpoint(layout.checkpoint());
    outputs.push_back(layout.checkpoint());
    outputs.push_back(layout.loss_log());
    manifest["model"] = {{"source", "trained"}, {"epochs", cfg.train.epochs}};
  }

  auto& stages = manifest["sequences"];
  for (const auto& seq : seqs) {
    if (std::find(cfg.sequences.begin(), cfg.sequences.end(), seq.id) == cfg.sequences.end()) {
      continue;
    }
    nlohmann::ordered_json entry;
    entry["id"] = seq.id;
    entry["frames"] = seq.frame_count;
    run_stage("odometry", [&] {
      return cmd_odometry(model, layout.f3d_dir(seq.id), seq.frame_count - 1, cfg.predict,
                          layout.trajectory(seq.id));
    });
    outputs.push_back(layout.trajectory(seq.id));
    if (seq.pose_path) {
      const ErrorReport report = run_stage("evaluate", [&] {
        return cmd_evaluate(*seq.pose_path, layout.trajectory(seq.id), layout.report_dir(seq.id),
                            cfg.eval);
      });
      entry["evaluation"] = {{"status", "ok"}, {"segments", report.segments.size()}};
      if (!report.segments.empty()) {
        entry["evaluation"]["t_rel_percent"] = report.t_rel;
        entry["evaluation"]["r_rel_deg_per_m"] = report.r_rel;
      }
      for (const char* f : {"tl.csv", "rl.csv", "ts.csv", "rs.csv", "summary.csv"}) {
        outputs.push_back(layout.report_dir(seq.id) / f);
      }
    } else {
      entry["evaluation"] = {{"status", "skipped: no ground truth"}};
    }
    const VoxelList voxels = run_stage("map", [&] {
      return cmd_map(layout.trajectory(seq.id), seq, cfg.octree, cfg.map, layout.map(seq.id));
    });
    entry["occupied_voxels"] = voxels.size();
    outputs.push_back(layout.map(seq.id));
    stages.push_back(entry);
  }

  auto& hashes = manifest["outputs"];
  for (const auto& p : outputs) {
    hashes[fs::relative(p, layout.root).generic_string()] = sha256_file(p);
  }
  const std::string text = manifest.dump(2) + "\n";
  detail::write_file(layout.manifest(), text);
  return text;
}

}  // namespace lvo
