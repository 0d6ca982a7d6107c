#ifndef FNCODE_PIPELINE_H_
#define FNCODE_PIPELINE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fncode/adversarial.h"
#include "fncode/inversion.h"
#include "fncode/refnet.h"
#include "fncode/som.h"

namespace fncode {

// One document holding every experiment parameter. Seeds left unset in the
// JSON are derived from the top-level seed when the document is resolved, so
// the resolved document alone reproduces a run.
struct PipelineConfig {
  uint64_t seed = 7;
  std::string out = "run";
  std::vector<std::string> layers = {"L1", "L2"};

  ShapeDatasetConfig train_data;
  ShapeDatasetConfig probe_data;

  RefNetConfig net;
  uint64_t net_init_seed = 0;
  RefNetTrainOptions net_train;

  int som_rows = 20;
  int som_cols = 20;
  Topology som_topology = Topology::kToroidal;
  TrainConfig som;
  int loss_window = 1000;

  std::optional<double> kde_bandwidth;
  bool kde_periodic = false;
  // Classes exported by class-density; empty means every class.
  std::vector<uint32_t> density_classes;
  int attractor_top_k = 5;
  double attractor_min_percentile = 50.0;

  int cluster_k = 8;
  int cluster_n_seeds = 5;
  uint64_t cluster_seed = 0;

  std::vector<double> attack_eps = {0.01, 0.02, 0.04, 0.08};
  PgdConfig pgd;
  int attack_images = 100;
  bool attack_planar = false;
  double ttest_eps_a = 0.01;
  double ttest_eps_b = 0.04;

  InversionConfig invert;
  int invert_top_k = 5;
};

// Parses a JSON document, filling unspecified fields with defaults and
// unspecified seeds from `seed`. Throws InvalidArgument on malformed input.
PipelineConfig ParsePipelineConfig(const std::string& json_text);
PipelineConfig LoadPipelineConfig(const std::string& path);
// Default document with derived seeds resolved.
PipelineConfig DefaultPipelineConfig(uint64_t seed = 7);
// Re-derives every seed from a new top-level seed.
void ReseedPipelineConfig(PipelineConfig& cfg, uint64_t seed);
std::string PipelineConfigJson(const PipelineConfig& cfg);

// Per-command file overrides; empty means the default path in the run
// directory.
struct CommandPaths {
  std::string net;
  std::string hlr;
  std::string som;
};

struct CommandResult {
  std::vector<std::string> outputs;  // paths relative to cfg.out
  std::map<std::string, double> metrics;
};

// Each command writes its artifacts into cfg.out (created if missing) plus a
// manifest_<name>.json listing the resolved config, inputs, seeds and output
// hashes.
CommandResult CmdRefnetTrain(const PipelineConfig& cfg);
CommandResult CmdExtract(const PipelineConfig& cfg, const std::string& layer,
                         const CommandPaths& paths = {});
CommandResult CmdTrainSom(const PipelineConfig& cfg, const std::string& layer,
                          const CommandPaths& paths = {});
CommandResult CmdDensity(const PipelineConfig& cfg, const std::string& layer,
                         const CommandPaths& paths = {});
CommandResult CmdClassDensity(const PipelineConfig& cfg,
                              const std::string& layer,
                              const CommandPaths& paths = {});
CommandResult CmdClusterScore(const PipelineConfig& cfg,
                              const std::string& layer,
                              const CommandPaths& paths = {});
CommandResult CmdAttack(const PipelineConfig& cfg,
                        const CommandPaths& paths = {});
CommandResult CmdInvert(const PipelineConfig& cfg, const std::string& layer,
                        const CommandPaths& paths = {});
// Runs every command above for every configured layer.
CommandResult CmdPipeline(const PipelineConfig& cfg);

std::string DefaultNetPath(const PipelineConfig& cfg);
std::string DefaultHlrPath(const PipelineConfig& cfg, const std::string& layer);
std::string DefaultSomPath(const PipelineConfig& cfg, const std::string& layer);

}  // namespace fncode

#endif  // FNCODE_PIPELINE_H_
