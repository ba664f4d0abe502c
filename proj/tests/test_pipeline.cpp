#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lvo/error.hpp"
#include "lvo/flow_association.hpp"
#include "lvo/formats.hpp"
#include "lvo/pipeline.hpp"
#include "lvo/synthetic.hpp"

namespace lvo {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("lvo_test_pipeline_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

/// Hand-written sequence: constant depth, constant flow.
void write_constant_sequence(const fs::path& root, int frames, int w, int h, float depth,
                             float flow_u, float flow_v) {
  const fs::path dir = root / "sequences" / "00";
  fs::create_directories(dir / "depth");
  fs::create_directories(dir / "flow");
  write_intrinsics({1.0, 1.0, 0.0, 0.0, 0.0}, dir / "calib.txt");
  for (int k = 0; k < frames; ++k) {
    DepthMap d(w, h);
    for (float& v : d.data()) v = depth + 0.5f * k;
    write_pfm(d, dir / "depth" / frame_file_name(k, "pfm"));
    if (k + 1 < frames) {
      FlowField2D f(w, h);
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          f.at(u, v, 0) = flow_u;
          f.at(u, v, 1) = flow_v;
        }
      }
      write_flo(f, dir / "flow" / frame_file_name(k, "flo"));
    }
  }
}

PipelineConfig mini_config(const fs::path& data, const fs::path& out) {
  PipelineConfig cfg = parse_config(R"(
[dataset]
sequences = 00
[association]
downsample = 4
[lvo]
input_width = 16
input_height = 8
stream_channels = 4, 8
squeeze_divisor = 4
fc_hidden = 16
[train]
epochs = 2
batch_size = 4
learning_rate = 0.001
seed = 3
[predict]
n_samples = 200
seed = 5
[octree]
resolution = 0.5
max_range = 30
[map]
pixel_stride = 4
[eval]
lengths = 2, 4
)",
                                    "/");
  cfg.dataset_root = data;
  cfg.output_dir = out;
  return cfg;
}

fs::path synth_mini(const std::string& name, int frames) {
  const fs::path root = fresh_dir(name);
  SyntheticSequenceConfig sc;
  sc.frames = frames;
  generate_corridor_sequence(root / "data", "00", sc);
  return root;
}

TEST(Index, CountsFramesAndFindsOptionalFiles) {
  const fs::path root = synth_mini("index", 4);
  const SequenceIndex seq = index_sequence(root / "data", "00");
  EXPECT_EQ(seq.frame_count, 4);
  EXPECT_EQ(seq.flow_paths.size(), 3u);
  EXPECT_EQ(seq.image_paths.size(), 4u);
  ASSERT_TRUE(seq.pose_path.has_value());
  EXPECT_THROW(index_sequence(root / "data", "99"), IoError);
}

TEST(Associate, TwoFramesGiveOneFileAndRerunIsBitIdentical) {
  const fs::path root = synth_mini("assoc", 2);
  const SequenceIndex seq = index_sequence(root / "data", "00");
  const auto a = cmd_associate(seq, {}, root / "a");
  ASSERT_EQ(a.size(), 1u);
  const auto b = cmd_associate(seq, {}, root / "b");
  EXPECT_EQ(slurp(a[0]), slurp(b[0]));
}

TEST(Associate, ZeroFlowGivesInverseDepthDifference) {
  const fs::path root = fresh_dir("zeroflow");
  write_constant_sequence(root, 2, 6, 4, 2.0f, 0.0f, 0.0f);
  const SequenceIndex seq = index_sequence(root, "00");
  const auto files = cmd_associate(seq, {}, root / "f3d");
  const Flow3D f = read_f3d(files.at(0));
  for (int v = 0; v < 4; ++v) {
    for (int u = 0; u < 6; ++u) {
      EXPECT_EQ(f.at(u, v, 0), 0.0f);
      EXPECT_EQ(f.at(u, v, 1), 0.0f);
      EXPECT_FLOAT_EQ(f.at(u, v, 2), 1.0f / 2.5f - 1.0f / 2.0f);
    }
  }
}

TEST(Associate, MissingInputNamesTheFrame) {
  const fs::path root = fresh_dir("missing");
  write_constant_sequence(root, 3, 4, 4, 2.0f, 0.0f, 0.0f);
  fs::remove(root / "sequences" / "00" / "flow" / frame_file_name(1, "flo"));
  const SequenceIndex seq = index_sequence(root, "00");
  try {
    cmd_associate(seq, {}, root / "f3d");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos) << e.what();
  }
}

TEST(Train, ZeroEpochsWritesInitialization) {
  const fs::path root = synth_mini("train0", 3);
  PipelineConfig cfg = mini_config(root / "data", root / "out");
  cfg.train.epochs = 0;
  const SequenceIndex seq = index_sequence(cfg.dataset_root, "00");
  cmd_associate(seq, cfg.association, OutputLayout{cfg.output_dir}.f3d_dir("00"));
  cmd_train(cfg);
  const LvoModel loaded = load_checkpoint(OutputLayout{cfg.output_dir}.checkpoint());
  EXPECT_EQ(loaded, quantize_to_float(init_model(cfg.lvo, cfg.train.seed)));
  EXPECT_EQ(slurp(OutputLayout{cfg.output_dir}.loss_log()), "epoch,loss,learning_rate\n");
}

TEST(Train, SameSeedSameCheckpointAndLogRows) {
  const fs::path root = synth_mini("train2", 4);
  PipelineConfig cfg = mini_config(root / "data", root / "out1");
  const SequenceIndex seq = index_sequence(cfg.dataset_root, "00");
  cmd_associate(seq, cfg.association, OutputLayout{cfg.output_dir}.f3d_dir("00"));
  cmd_train(cfg);
  PipelineConfig cfg2 = cfg;
  cfg2.output_dir = root / "out2";
  cmd_associate(seq, cfg2.association, OutputLayout{cfg2.output_dir}.f3d_dir("00"));
  cmd_train(cfg2);
  EXPECT_EQ(slurp(root / "out1" / "model.ckpt"), slurp(root / "out2" / "model.ckpt"));
  const std::string log = slurp(root / "out1" / "train_loss.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);
}

TEST(Train, MissingGroundTruthIsAnError) {
  const fs::path root = fresh_dir("nogt");
  write_constant_sequence(root, 3, 64, 32, 2.0f, 0.0f, 0.0f);
  PipelineConfig cfg = mini_config(root, root / "out");
  const SequenceIndex seq = index_sequence(root, "00");
  cmd_associate(seq, cfg.association, OutputLayout{cfg.output_dir}.f3d_dir("00"));
  EXPECT_THROW(cmd_train(cfg), IoError);
}

LvoModel identity_model(const LvoConfig& cfg) {
  LvoModel m = init_model(cfg, 1);
  m.for_each_tensor([](std::span<double> t, bool) {
    for (double& v : t) v = 0.0;
  });
  return m;
}

TEST(Odometry, IdentityModelWritesIdentityLines) {
  const fs::path root = synth_mini("odo_id", 5);
  PipelineConfig cfg = mini_config(root / "data", root / "out");
  const SequenceIndex seq = index_sequence(cfg.dataset_root, "00");
  const fs::path f3d = OutputLayout{cfg.output_dir}.f3d_dir("00");
  cmd_associate(seq, cfg.association, f3d);
  cfg.predict.deterministic = true;
  const fs::path out = root / "traj.txt";
  cmd_odometry(identity_model(cfg.lvo), f3d, seq.frame_count - 1, cfg.predict, out);
  std::ifstream in(out);
  int lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    EXPECT_EQ(line, "1 0 0 0 0 1 0 0 0 0 1 0");
  }
  EXPECT_EQ(lines, 5);
}

TEST(Odometry, LineCountAndDeterminism) {
  const fs::path root = synth_mini("odo_det", 6);
  PipelineConfig cfg = mini_config(root / "data", root / "out");
  const SequenceIndex seq = index_sequence(cfg.dataset_root, "00");
  const fs::path f3d = OutputLayout{cfg.output_dir}.f3d_dir("00");
  cmd_associate(seq, cfg.association, f3d);
  const LvoModel model = init_model(cfg.lvo, 11);
  for (bool det : {true, false}) {
    cfg.predict.deterministic = det;
    const Trajectory t1 = cmd_odometry(model, f3d, 5, cfg.predict, root / "a.txt");
    cmd_odometry(model, f3d, 5, cfg.predict, root / "b.txt");
    EXPECT_EQ(t1.size(), 6u);
    EXPECT_EQ(load_poses(root / "a.txt").size(), 6u);
    EXPECT_EQ(slurp(root / "a.txt"), slurp(root / "b.txt"));
  }
}

TEST(Odometry, RasterShapeMismatchIsShapeError) {
  const fs::path root = synth_mini("odo_shape", 2);
  PipelineConfig cfg = mini_config(root / "data", root / "out");
  const SequenceIndex seq = index_sequence(cfg.dataset_root, "00");
  const fs::path f3d = root / "f3d";
  cmd_associate(seq, AssociationConfig{}, f3d);  // full resolution, not 16x8
  EXPECT_THROW(cmd_odometry(init_model(cfg.lvo, 1), f3d, 1, cfg.predict, root / "t.txt"),
               ShapeError);
}

TEST(Evaluate, SelfAndScaledPoseFiles) {
  const fs::path root = fresh_dir("eval");
  Trajectory gt, scaled;
  for (int k = 0; k < 1001; ++k) {
    SE3Pose p;
    p.translation = Eigen::Vector3d(0, 0, k);
    gt.poses.push_back(p);
    p.translation *= 1.05;
    scaled.poses.push_back(p);
  }
  save_poses(gt, root / "gt.txt");
  save_poses(scaled, root / "pred.txt");
  const ErrorReport self = cmd_evaluate(root / "gt.txt", root / "gt.txt", root / "self", {});
  EXPECT_EQ(self.t_rel, 0.0);
  EXPECT_EQ(self.r_rel, 0.0);
  const ErrorReport r = cmd_evaluate(root / "gt.txt", root / "pred.txt", root / "scaled", {});
  EXPECT_NEAR(r.t_rel, 5.0, 5e-6);
  EXPECT_TRUE(fs::is_regular_file(root / "scaled" / "summary.csv"));
  EXPECT_THROW(cmd_evaluate(root / "nope.txt", root / "gt.txt", root / "x", {}), IoError);
}

TEST(Map, TrajectoryFrameMismatchIsShapeError) {
  const fs::path root = fresh_dir("map_mismatch");
  write_constant_sequence(root, 3, 4, 4, 2.0f, 0.0f, 0.0f);
  save_poses(Trajectory{{SE3Pose::identity()}}, root / "t.txt");
  EXPECT_THROW(cmd_map(root / "t.txt", index_sequence(root, "00"), {}, {}, root / "m.ply"),
               ShapeError);
}

TEST(Map, ZeroFramesGiveEmptyPly) {
  const fs::path root = fresh_dir("map_empty");
  save_poses(Trajectory{}, root / "t.txt");
  SequenceIndex seq;
  seq.id = "empty";
  const VoxelList v = cmd_map(root / "t.txt", seq, {}, {}, root / "m.ply");
  EXPECT_TRUE(v.empty());
  EXPECT_NE(slurp(root / "m.ply").find("element vertex 0\n"), std::string::npos);
}

TEST(Map, OneValidPixelOccupiesItsVoxel) {
  const fs::path root = fresh_dir("map_one");
  const fs::path dir = root / "sequences" / "00";
  fs::create_directories(dir / "depth");
  write_intrinsics({1.0, 1.0, 0.0, 0.0, 0.0}, dir / "calib.txt");
  DepthMap d(3, 3);
  for (float& v : d.data()) v = std::numeric_limits<float>::quiet_NaN();
  d.at(1, 2) = 3.3f;
  write_pfm(d, dir / "depth" / frame_file_name(0, "pfm"));
  save_poses(Trajectory{{SE3Pose::identity()}}, root / "t.txt");
  OctreeConfig oc;
  oc.resolution = 0.5;
  const VoxelList v = cmd_map(root / "t.txt", index_sequence(root, "00"), oc, {}, root / "m.ply");
  ASSERT_EQ(v.size(), 1u);
  const OccupancyOctree tree(oc);
  const Eigen::Vector3d point(1.0 * 3.3f, 2.0 * 3.3f, 3.3f);
  EXPECT_EQ(tree.key_of(v[0].center), tree.key_of(point));
  EXPECT_NEAR(v[0].probability, oc.prob_hit, 1e-12);
}

TEST(Map, WallSeenFromThreePosesMatchesThreeHitClosedForm) {
  const fs::path root = fresh_dir("map_wall");
  const fs::path dir = root / "sequences" / "00";
  fs::create_directories(dir / "depth");
  write_intrinsics({1.0, 1.0, 0.0, 0.0, 0.0}, dir / "calib.txt");
  // One pixel on the optical axis; the camera advances 0.1 m per frame
  // towards a wall at z = 5.5.
  Trajectory traj;
  for (int k = 0; k < 3; ++k) {
    DepthMap d(1, 1);
    d.at(0, 0) = static_cast<float>(5.5 - 0.1 * k);
    write_pfm(d, dir / "depth" / frame_file_name(k, "pfm"));
    SE3Pose p;
    p.translation = Eigen::Vector3d(0, 0, 0.1 * k);
    traj.poses.push_back(p);
  }
  save_poses(traj, root / "t.txt");
  OctreeConfig oc;
  oc.resolution = 1.0;
  const VoxelList v = cmd_map(root / "t.txt", index_sequence(root, "00"), oc, {}, root / "m.ply");
  ASSERT_EQ(v.size(), 1u);
  const double odds = std::pow(oc.prob_hit / (1.0 - oc.prob_hit), 3.0);
  EXPECT_NEAR(v[0].probability, odds / (1.0 + odds), 1e-6);  // float depth, double fusion
  EXPECT_NEAR(v[0].probability, 343.0 / 370.0, 1e-9);
  EXPECT_EQ(v[0].center.z(), 5.5);
}

fs::path write_mini_config(const fs::path& root, const std::string& extra = "") {
  const fs::path ini = root / "mini.ini";
  std::ofstream(ini) << "[dataset]\nroot = data\nsequences = 00\n[output]\ndir = out\n"
                        "[association]\ndownsample = 4\n"
                        "[lvo]\ninput_width = 16\ninput_height = 8\nstream_channels = 4, 8\n"
                        "squeeze_divisor = 4\nfc_hidden = 16\n"
                        "[train]\nepochs = 2\nbatch_size = 4\nseed = 3\n"
                        "[predict]\nn_samples = 200\nseed = 5\n"
                        "[octree]\nresolution = 0.5\nmax_range = 30\n"
                        "[map]\npixel_stride = 4\n[eval]\nlengths = 2, 4\n"
                     << extra;
  return ini;
}

TEST(Run, ManifestAndDeterminism) {
  const fs::path root = synth_mini("run", 6);
  PipelineConfig cfg = load_config(write_mini_config(root));
  const std::string m1 = cmd_run(cfg);
  const std::string traj = slurp(OutputLayout{cfg.output_dir}.trajectory("00"));
  const std::string ply = slurp(OutputLayout{cfg.output_dir}.map("00"));
  const std::string m2 = cmd_run(cfg);
  EXPECT_EQ(m1, m2);
  EXPECT_EQ(traj, slurp(OutputLayout{cfg.output_dir}.trajectory("00")));
  EXPECT_EQ(ply, slurp(OutputLayout{cfg.output_dir}.map("00")));

  const auto j = nlohmann::json::parse(m1);
  EXPECT_EQ(j["config_sha256"], sha256_hex(cfg.canonical_text()));
  EXPECT_EQ(j["sequences"][0]["frames"], 6);
  EXPECT_EQ(j["sequences"][0]["evaluation"]["status"], "ok");
  EXPECT_GT(j["sequences"][0]["evaluation"]["segments"].get<int>(), 0);
  EXPECT_EQ(j["outputs"]["00/trajectory.txt"], sha256_file(OutputLayout{cfg.output_dir}.trajectory("00")));
  EXPECT_EQ(load_poses(OutputLayout{cfg.output_dir}.trajectory("00")).size(), 6u);
}

TEST(Run, EqualsManualStages) {
  const fs::path root = synth_mini("run_manual", 5);
  PipelineConfig cfg = load_config(write_mini_config(root));
  cfg.predict.deterministic = true;
  cmd_run(cfg);
  const OutputLayout layout{cfg.output_dir};
  const std::string traj = slurp(layout.trajectory("00"));
  const std::string ply = slurp(layout.map("00"));

  PipelineConfig manual = cfg;
  manual.output_dir = root / "manual";
  const OutputLayout ml{manual.output_dir};
  const SequenceIndex seq = index_sequence(manual.dataset_root, "00");
  cmd_associate(seq, manual.association, ml.f3d_dir("00"));
  cmd_train(manual);
  cmd_odometry(load_checkpoint(ml.checkpoint()), ml.f3d_dir("00"), seq.frame_count - 1,
               manual.predict, ml.trajectory("00"));
  cmd_map(ml.trajectory("00"), seq, manual.octree, manual.map, ml.map("00"));
  EXPECT_EQ(traj, slurp(ml.trajectory("00")));
  EXPECT_EQ(ply, slurp(ml.map("00")));
}

TEST(Run, MissingGroundTruthSkipsEvaluation) {
  const fs::path root = synth_mini("run_nogt", 4);
  PipelineConfig cfg = load_config(write_mini_config(root));
  // Train from a checkpoint so ground truth is not needed at all.
  cfg.checkpoint = root / "init.ckpt";
  save_checkpoint(init_model(cfg.lvo, 1), *cfg.checkpoint);
  fs::remove(root / "data" / "poses" / "00.txt");
  const auto j = nlohmann::json::parse(cmd_run(cfg));
  EXPECT_EQ(j["sequences"][0]["evaluation"]["status"], "skipped: no ground truth");
  EXPECT_EQ(j["model"]["source"], "checkpoint");
  EXPECT_TRUE(fs::is_regular_file(OutputLayout{cfg.output_dir}.map("00")));
}

TEST(Run, StageFailureNamesStageAndKeepsEarlierOutputs) {
  const fs::path root = synth_mini("run_fail", 4);
  PipelineConfig cfg = load_config(write_mini_config(root));
  cfg.checkpoint = root / "missing.ckpt";
  try {
    cmd_run(cfg);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("stage load checkpoint"), std::string::npos);
  }
  EXPECT_TRUE(fs::is_regular_file(OutputLayout{cfg.output_dir}.f3d_dir("00") / "000000.f3d"));
}

#ifdef LVO_CLI_PATH
int cli(const std::string& args) {
  const std::string cmd = std::string(LVO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path root = synth_mini("cli", 4);
  const fs::path ini = write_mini_config(root);
  EXPECT_EQ(cli(""), 1);
  EXPECT_EQ(cli("bogus"), 1);
  EXPECT_EQ(cli("run"), 1);
  EXPECT_EQ(cli("run -c " + (root / "nope.ini").string()), 4);
  std::ofstream(root / "bad.ini") << "[nonsense]\n";
  EXPECT_EQ(cli("run -c " + (root / "bad.ini").string()), 2);
  EXPECT_EQ(cli("evaluate --gt " + (root / "none.txt").string() + " --pred x -o " +
                (root / "e").string()),
            4);
  EXPECT_EQ(cli("run --deterministic -c " + ini.string()), 0);
  const fs::path traj = root / "out" / "00" / "trajectory.txt";
  EXPECT_EQ(cli("evaluate --gt " + traj.string() + " --pred " + traj.string() + " -o " +
                (root / "e").string()),
            0);
  std::ofstream(root / "short.txt") << "1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1 0\n";
  EXPECT_EQ(cli("evaluate --gt " + traj.string() + " --pred " + (root / "short.txt").string() +
                " -o " + (root / "e").string()),
            3);
}

TEST(Cli, StagesByHandMatchRun) {
  const fs::path root = synth_mini("cli_stages", 4);
  const fs::path ini = write_mini_config(root);
  const std::string base = " --deterministic -c " + ini.string() + " -o ";
  ASSERT_EQ(cli("run" + base + (root / "r").string()), 0);
  for (const char* stage : {"associate", "train", "odometry", "map"}) {
    ASSERT_EQ(cli(std::string(stage) + base + (root / "s").string()), 0) << stage;
  }
  EXPECT_EQ(slurp(root / "r" / "00" / "trajectory.txt"),
            slurp(root / "s" / "00" / "trajectory.txt"));
  EXPECT_EQ(slurp(root / "r" / "00" / "map.ply"), slurp(root / "s" / "00" / "map.ply"));
}
#endif

}  // namespace
}  // namespace lvo
