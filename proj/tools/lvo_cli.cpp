// Command-line front end for the odometry and mapping pipeline.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lvo/config.hpp"
#include "lvo/error.hpp"
#include "lvo/formats.hpp"
#include "lvo/pipeline.hpp"
#include "lvo/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kShape = 3,
  kIo = 4,
  kOther = 5,
};

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
  std::vector<std::string> sequences;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("-c,--config", opt.config, "pipeline config file")->required();
  cmd->add_option("--seed", opt.seed, "override train and predict seeds");
  cmd->add_flag("--deterministic", opt.deterministic, "use the mean instead of sampling");
  cmd->add_option("-o,--out", opt.out, "override the output directory");
  cmd->add_option("-s,--sequence", opt.sequences, "restrict to these sequence ids");
}

lvo::PipelineConfig resolve(const CommonOptions& opt) {
  lvo::PipelineConfig cfg = lvo::load_config(opt.config);
  if (opt.seed) {
    cfg.train.seed = *opt.seed;
    cfg.predict.seed = *opt.seed;
  }
  if (opt.deterministic) cfg.predict.deterministic = true;
  if (!opt.out.empty()) cfg.output_dir = opt.out;
  if (!opt.sequences.empty()) cfg.sequences = opt.sequences;
  cfg.validate();
  return cfg;
}

lvo::LvoModel model_for(const lvo::PipelineConfig& cfg) {
  const lvo::OutputLayout layout{cfg.output_dir};
  return lvo::load_checkpoint(cfg.checkpoint ? *cfg.checkpoint : layout.checkpoint());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular learned visual odometry and occupancy mapping"};
  app.require_subcommand(1);

  CommonOptions opt;
  auto* associate = app.add_subcommand("associate", "flow + depth -> 3D flow rasters");
  auto* train = app.add_subcommand("train", "train the network and write a checkpoint");
  auto* odometry = app.add_subcommand("odometry", "predict trajectories");
  auto* map = app.add_subcommand("map", "fuse depth into an occupancy map");
  auto* run = app.add_subcommand("run", "associate, train if needed, odometry, evaluate, map");
  for (auto* cmd : {associate, train, odometry, map, run}) add_common(cmd, opt);

  std::string gt_file, pred_file, eval_out;
  int eval_step = 1;
  auto* evaluate = app.add_subcommand("evaluate", "KITTI segment errors for two pose files");
  evaluate->add_option("--gt", gt_file, "ground-truth pose file")->required();
  evaluate->add_option("--pred", pred_file, "predicted pose file")->required();
  evaluate->add_option("-o,--out", eval_out, "directory for the CSV tables")->required();
  evaluate->add_option("--step", eval_step, "first-frame stride")->check(CLI::PositiveNumber);

  std::string synth_root, synth_id = "00";
  lvo::SyntheticSequenceConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "render a synthetic corridor sequence");
  synth->add_option("--root", synth_root, "dataset root")->required();
  synth->add_option("--id", synth_id, "sequence id");
  synth->add_option("--frames", synth_cfg.frames)->check(CLI::PositiveNumber);
  synth->add_option("--width", synth_cfg.width)->check(CLI::PositiveNumber);
  synth->add_option("--height", synth_cfg.height)->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--speed", synth_cfg.speed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (associate->parsed()) {
      const auto cfg = resolve(opt);
      const lvo::OutputLayout layout{cfg.output_dir};
      for (const auto& id : cfg.sequences) {
        const auto seq = lvo::index_sequence(cfg.dataset_root, id, cfg.eval.frame_period);
        const auto files = lvo::cmd_associate(seq, cfg.association, layout.f3d_dir(id));
        std::cout << id << ": " << files.size() << " flow rasters\n";
      }
    } else if (train->parsed()) {
      const auto cfg = resolve(opt);
      const auto result = lvo::cmd_train(cfg);
      std::cout << "epochs " << result.epoch_loss.size() << ", final loss "
                << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << '\n';
    } else if (odometry->parsed()) {
      const auto cfg = resolve(opt);
      const lvo::OutputLayout layout{cfg.output_dir};
      const auto model = model_for(cfg);
      for (const auto& id : cfg.sequences) {
        const auto seq = lvo::index_sequence(cfg.dataset_root, id, cfg.eval.frame_period);
        lvo::cmd_odometry(model, layout.f3d_dir(id), seq.frame_count - 1, cfg.predict,
                          layout.trajectory(id));
        std::cout << id << ": " << layout.trajectory(id).string() << '\n';
      }
    } else if (map->parsed()) {
      const auto cfg = resolve(opt);
      const lvo::OutputLayout layout{cfg.output_dir};
      for (const auto& id : cfg.sequences) {
        const auto seq = lvo::index_sequence(cfg.dataset_root, id, cfg.eval.frame_period);
        const auto voxels =
            lvo::cmd_map(layout.trajectory(id), seq, cfg.octree, cfg.map, layout.map(id));
        std::cout << id << ": " << voxels.size() << " occupied voxels\n";
      }
    } else if (run->parsed()) {
      std::cout << lvo::cmd_run(resolve(opt));
    } else if (evaluate->parsed()) {
      lvo::EvalConfig cfg;
      cfg.step = eval_step;
      const auto report = lvo::cmd_evaluate(gt_file, pred_file, eval_out, cfg);
      std::cout << "segments " << report.segments.size() << ", t_rel " << report.t_rel
                << " %, r_rel " << report.r_rel << " deg/m\n";
    } else if (synth->parsed()) {
      lvo::generate_corridor_sequence(synth_root, synth_id, synth_cfg);
    }
  } catch (const lvo::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const lvo::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kShape;
  } catch (const lvo::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
