#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fncode/error.h"
#include "fncode/format.h"
#include "fncode/pipeline.h"

namespace {

enum ExitCode { kOk = 0, kOther = 1, kBadArgs = 2, kBadFormat = 3, kNumeric = 4 };

struct GlobalFlags {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
};

struct LayerFlags {
  std::string layer = "L1";
  fncode::CommandPaths paths;
};

void Report(const fncode::CommandResult& result) {
  for (const std::string& path : result.outputs) std::cout << "wrote " << path << "\n";
  for (const auto& [name, value] : result.metrics) {
    std::cout << name << " = " << fncode::FormatDouble(value) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional-code analysis of a reference CNN with self-organizing maps"};
  app.require_subcommand(1);

  GlobalFlags global;
  app.add_option("--config", global.config, "JSON config or run manifest")
      ->check(CLI::ExistingFile);
  app.add_option("--out", global.out, "Run directory");
  app.add_option("--seed", global.seed, "Top-level seed; re-derives every sub-seed");

  LayerFlags lf;
  std::optional<int> rows, cols, epochs, top_k, n_seeds, k, n_images, n_iter,
      steps;
  std::optional<double> bandwidth;
  std::vector<uint32_t> classes;
  std::vector<double> eps;
  std::vector<std::string> layers;
  bool planar = false;
  bool periodic = false;

  const auto add_layer = [&lf](CLI::App* sub) {
    sub->add_option("--layer", lf.layer, "Probe layer tag (L1 or L2)");
  };
  const auto add_net = [&lf](CLI::App* sub) {
    sub->add_option("--net", lf.paths.net, "RNET checkpoint");
  };
  const auto add_hlr = [&lf](CLI::App* sub) {
    sub->add_option("--hlr", lf.paths.hlr, "HLR1 dataset");
  };
  const auto add_som = [&lf](CLI::App* sub) {
    sub->add_option("--som", lf.paths.som, "SOM1 checkpoint");
  };

  CLI::App* refnet_train = app.add_subcommand("refnet-train", "Train the reference network");
  refnet_train->add_option("--steps", steps, "SGD steps");

  CLI::App* extract = app.add_subcommand("extract", "Extract pooled, normalized HLRs");
  add_layer(extract);
  add_net(extract);

  CLI::App* train_som = app.add_subcommand("train-som", "Train a SOM on an HLR file");
  add_layer(train_som);
  add_hlr(train_som);
  train_som->add_option("--rows", rows, "Grid height");
  train_som->add_option("--cols", cols, "Grid width");
  train_som->add_option("--epochs", epochs, "Passes over the data");

  CLI::App* density = app.add_subcommand("density", "KDE density and attractors");
  add_layer(density);
  add_hlr(density);
  add_som(density);
  density->add_option("--top-k", top_k, "Attractors to report");
  density->add_option("--bandwidth", bandwidth, "Fixed KDE bandwidth in cells");
  density->add_flag("--periodic", periodic, "Wrap KDE offsets around the grid");

  CLI::App* class_density = app.add_subcommand("class-density", "Per-class KDE density");
  add_layer(class_density);
  add_hlr(class_density);
  add_som(class_density);
  class_density->add_option("--class", classes, "Class ids (default: all)")->delimiter(',');
  class_density->add_option("--bandwidth", bandwidth, "Fixed KDE bandwidth in cells");
  class_density->add_flag("--periodic", periodic, "Wrap KDE offsets around the grid");

  CLI::App* cluster_score = app.add_subcommand("cluster-score", "k-means V-measure of BMUs");
  add_layer(cluster_score);
  add_hlr(cluster_score);
  add_som(cluster_score);
  cluster_score->add_option("--k", k, "Number of clusters");
  cluster_score->add_option("--n-seeds", n_seeds, "k-means repetitions");

  CLI::App* attack = app.add_subcommand("attack", "PGD displacement sweep");
  add_net(attack);
  add_som(attack);
  attack->add_option("--layers", layers, "Probe layers")->delimiter(',');
  attack->add_option("--eps", eps, "Perturbation budgets")->delimiter(',');
  attack->add_option("--n-images", n_images, "Images attacked");
  attack->add_flag("--planar", planar, "Measure displacement without wrap-around");

  CLI::App* invert = app.add_subcommand("invert", "Invert attractor codes to images");
  add_layer(invert);
  add_net(invert);
  add_hlr(invert);
  add_som(invert);
  invert->add_option("--top-k", top_k, "Attractors to invert");
  invert->add_option("--n-iter", n_iter, "Optimizer steps");

  CLI::App* pipeline = app.add_subcommand("pipeline", "Run every command for every layer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadArgs;
  }

  try {
    fncode::PipelineConfig cfg = global.config.empty()
                                     ? fncode::DefaultPipelineConfig()
                                     : fncode::LoadPipelineConfig(global.config);
    if (global.seed) fncode::ReseedPipelineConfig(cfg, *global.seed);
    if (!global.out.empty()) cfg.out = global.out;
    if (steps) cfg.net_train.steps = *steps;
    if (rows) cfg.som_rows = *rows;
    if (cols) cfg.som_cols = *cols;
    if (epochs) cfg.som.epochs = *epochs;
    if (bandwidth) cfg.kde_bandwidth = *bandwidth;
    if (periodic) cfg.kde_periodic = true;
    if (!classes.empty()) cfg.density_classes = classes;
    if (k) cfg.cluster_k = *k;
    if (n_seeds) cfg.cluster_n_seeds = *n_seeds;
    if (!layers.empty()) cfg.layers = layers;
    if (!eps.empty()) cfg.attack_eps = eps;
    if (n_images) cfg.attack_images = *n_images;
    if (planar) cfg.attack_planar = true;
    if (n_iter) cfg.invert.n_iter = *n_iter;
    if (top_k) {
      cfg.attractor_top_k = *top_k;
      cfg.invert_top_k = *top_k;
    }
    if (cfg.som_rows < 1 || cfg.som_cols < 1) {
      throw fncode::InvalidArgument("--rows and --cols must be >= 1");
    }
    cfg.som.Validate();
    cfg.invert.Validate();

    fncode::CommandResult result;
    if (*refnet_train) {
      result = fncode::CmdRefnetTrain(cfg);
    } else if (*extract) {
      result = fncode::CmdExtract(cfg, lf.layer, lf.paths);
    } else if (*train_som) {
      result = fncode::CmdTrainSom(cfg, lf.layer, lf.paths);
    } else if (*density) {
      result = fncode::CmdDensity(cfg, lf.layer, lf.paths);
    } else if (*class_density) {
      result = fncode::CmdClassDensity(cfg, lf.layer, lf.paths);
    } else if (*cluster_score) {
      result = fncode::CmdClusterScore(cfg, lf.layer, lf.paths);
    } else if (*attack) {
      result = fncode::CmdAttack(cfg, lf.paths);
    } else if (*invert) {
      result = fncode::CmdInvert(cfg, lf.layer, lf.paths);
    } else if (*pipeline) {
      result = fncode::CmdPipeline(cfg);
    }
    Report(result);
    return kOk;
  } catch (const fncode::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadArgs;
  } catch (const fncode::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadFormat;
  } catch (const fncode::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadFormat;
  } catch (const fncode::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
