#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lvo/config.hpp"
#include "lvo/kitti_eval.hpp"
#include "lvo/network.hpp"
#include "lvo/octree.hpp"

namespace lvo {

/// File layout of one sequence:
///   <root>/sequences/<id>/calib.txt          "fx fy cx cy skew"
///   <root>/sequences/<id>/depth/NNNNNN.pfm   one per frame (defines the count)
///   <root>/sequences/<id>/flow/NNNNNN.flo    frame k -> k+1
///   <root>/sequences/<id>/image/NNNNNN.ppm   optional, colours the map
///   <root>/poses/<id>.txt                    optional ground truth
struct SequenceIndex {
  std::string id;
  int frame_count = 0;
  std::vector<std::filesystem::path> depth_paths;
  std::vector<std::filesystem::path> flow_paths;   // frame_count - 1 entries
  std::vector<std::filesystem::path> image_paths;  // empty or frame_count entries
  std::optional<std::filesystem::path> pose_path;
  std::filesystem::path intrinsics_path;
  double frame_period = 0.1;
};

/// Scans the sequence directory. Throws IoError if it has no depth frames.
SequenceIndex index_sequence(const std::filesystem::path& root, const std::string& id,
                             double frame_period = 0.1);

/// Output locations under the pipeline output directory.
struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path f3d_dir(const std::string& seq) const { return root / seq / "f3d"; }
  std::filesystem::path trajectory(const std::string& seq) const {
    return root / seq / "trajectory.txt";
  }
  std::filesystem::path report_dir(const std::string& seq) const { return root / seq / "eval"; }
  std::filesystem::path map(const std::string& seq) const { return root / seq / "map.ply"; }
  std::filesystem::path checkpoint() const { return root / "model.ckpt"; }
  std::filesystem::path loss_log() const { return root / "train_loss.csv"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
};

std::string frame_file_name(int frame, const char* extension);

/// Flow/depth -> .f3d per frame pair. Returns the written files. Throws
/// IoError naming the frame when an input is missing.
std::vector<std::filesystem::path> cmd_associate(const SequenceIndex& seq,
                                                 const AssociationConfig& cfg,
                                                 const std::filesystem::path& out_dir);

/// Loads associated rasters and ground-truth relative poses of a sequence.
std::vector<TrainingSample> load_training_samples(const SequenceIndex& seq,
                                                  const std::filesystem::path& f3d_dir);

/// Trains on cfg.train_sequences (falling back to cfg.sequences), writing the
/// checkpoint and a per-epoch CSV loss log to the output layout.
TrainResult cmd_train(const PipelineConfig& cfg);

/// Predicts a trajectory from the .f3d files of a sequence, streaming one
/// frame pair at a time into a KITTI pose file.
Trajectory cmd_odometry(const LvoModel& model, const std::filesystem::path& f3d_dir,
                        int pair_count, const PredictConfig& predict,
                        const std::filesystem::path& out_file);

/// Loads both pose files, evaluates and writes the CSV tables.
ErrorReport cmd_evaluate(const std::filesystem::path& gt_file,
                         const std::filesystem::path& pred_file,
                         const std::filesystem::path& out_dir, const EvalConfig& cfg);

/// Fuses every frame's back-projected depth into an octree along the given
/// trajectory and exports the occupied voxels. Throws ShapeError if the
/// trajectory and depth frame counts differ.
VoxelList cmd_map(const std::filesystem::path& trajectory_file, const SequenceIndex& seq,
                  const OctreeConfig& octree, const MapConfig& map,
                  const std::filesystem::path& out_ply);

/// associate -> (train when no checkpoint is configured) -> odometry ->
/// evaluate (when ground truth exists) -> map, then writes manifest.json.
/// Returns the manifest text.
std::string cmd_run(const PipelineConfig& cfg);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

}  // namespace lvo
