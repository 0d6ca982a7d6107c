#include "fncode/pipeline.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "fncode/binary_io.h"
#include "fncode/clustering.h"
#include "fncode/density.h"
#include "fncode/error.h"
#include "fncode/format.h"
#include "fncode/hlr.h"
#include "fncode/random.h"
#include "json.hpp"

namespace fncode {

using nlohmann::json;

namespace {

// Stream ids for seeds derived from the top-level seed.
enum SeedStream : uint64_t {
  kTrainDataSeed = 1,
  kProbeDataSeed,
  kNetInitSeed,
  kNetTrainSeed,
  kSomSeed,
  kClusterSeed,
  kPgdSeed,
  kInvertSeed,
};

void CheckKeys(const json& obj, const char* section,
               std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    throw InvalidArgument(std::string("config: '") + section +
                          "' must be an object");
  }
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) {
      throw InvalidArgument(std::string("config: unknown key '") + item.key() +
                            "' in '" + section + "'");
    }
  }
}

template <typename T>
void Read(const json& obj, const char* key, T& field) {
  if (!obj.contains(key)) return;
  try {
    field = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: bad value for '") + key +
                          "': " + e.what());
  }
}

// Reads a seed when present; returns whether it was given.
bool ReadSeed(const json& obj, const char* key, uint64_t& field) {
  if (!obj.contains(key) || obj.at(key).is_null()) return false;
  Read(obj, key, field);
  return true;
}

const json& Section(const json& doc, const char* name) {
  static const json kEmpty = json::object();
  return doc.contains(name) ? doc.at(name) : kEmpty;
}

}  // namespace

void ReseedPipelineConfig(PipelineConfig& cfg, uint64_t seed) {
  cfg.seed = seed;
  cfg.train_data.seed = DeriveSeed(seed, kTrainDataSeed);
  cfg.probe_data.seed = DeriveSeed(seed, kProbeDataSeed);
  cfg.net_init_seed = DeriveSeed(seed, kNetInitSeed);
  cfg.net_train.seed = DeriveSeed(seed, kNetTrainSeed);
  cfg.som.seed = DeriveSeed(seed, kSomSeed);
  cfg.cluster_seed = DeriveSeed(seed, kClusterSeed);
  cfg.pgd.seed = DeriveSeed(seed, kPgdSeed);
  cfg.invert.seed = DeriveSeed(seed, kInvertSeed);
}

PipelineConfig DefaultPipelineConfig(uint64_t seed) {
  PipelineConfig cfg;
  ReseedPipelineConfig(cfg, seed);
  return cfg;
}

PipelineConfig ParsePipelineConfig(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config: invalid JSON: ") + e.what());
  }
  // A run manifest embeds the resolved config under "config".
  if (doc.is_object() && doc.contains("command") && doc.contains("config")) {
    doc = doc.at("config");
  }
  CheckKeys(doc, "root",
            {"seed", "out", "layers", "data", "refnet", "som", "density",
             "cluster", "attack", "invert"});
  PipelineConfig cfg;
  Read(doc, "seed", cfg.seed);
  ReseedPipelineConfig(cfg, cfg.seed);
  Read(doc, "out", cfg.out);
  Read(doc, "layers", cfg.layers);
  for (const std::string& layer : cfg.layers) ParseProbe(layer);

  const json& data = Section(doc, "data");
  CheckKeys(data, "data",
            {"n_classes", "size", "noise", "train_per_class", "probe_per_class",
             "train_seed", "probe_seed"});
  Read(data, "n_classes", cfg.train_data.n_classes);
  Read(data, "size", cfg.train_data.size);
  Read(data, "noise", cfg.train_data.noise);
  Read(data, "train_per_class", cfg.train_data.per_class);
  cfg.probe_data.n_classes = cfg.train_data.n_classes;
  cfg.probe_data.size = cfg.train_data.size;
  cfg.probe_data.noise = cfg.train_data.noise;
  Read(data, "probe_per_class", cfg.probe_data.per_class);
  ReadSeed(data, "train_seed", cfg.train_data.seed);
  ReadSeed(data, "probe_seed", cfg.probe_data.seed);
  cfg.net.height = cfg.net.width = cfg.train_data.size;
  cfg.net.n_classes = cfg.train_data.n_classes;

  const json& net = Section(doc, "refnet");
  CheckKeys(net, "refnet",
            {"kernel", "conv1", "conv2", "init_seed", "steps", "batch", "lr",
             "momentum", "train_seed"});
  Read(net, "kernel", cfg.net.kernel);
  Read(net, "conv1", cfg.net.conv1);
  Read(net, "conv2", cfg.net.conv2);
  ReadSeed(net, "init_seed", cfg.net_init_seed);
  Read(net, "steps", cfg.net_train.steps);
  Read(net, "batch", cfg.net_train.batch);
  Read(net, "lr", cfg.net_train.lr);
  Read(net, "momentum", cfg.net_train.momentum);
  ReadSeed(net, "train_seed", cfg.net_train.seed);
  cfg.net.Validate();

  const json& som = Section(doc, "som");
  CheckKeys(som, "som",
            {"rows", "cols", "topology", "sigma0", "alpha0", "decay", "epochs",
             "epsilon_stab", "tau", "sigma_tau_scale", "max_updates", "window", "seed"});
  Read(som, "rows", cfg.som_rows);
  Read(som, "cols", cfg.som_cols);
  if (som.contains("topology")) {
    std::string topo;
    Read(som, "topology", topo);
    if (topo == "toroidal") {
      cfg.som_topology = Topology::kToroidal;
    } else if (topo == "planar") {
      cfg.som_topology = Topology::kPlanar;
    } else {
      throw InvalidArgument("config: som.topology must be 'toroidal' or 'planar'");
    }
  }
  if (som.contains("decay")) {
    std::string decay;
    Read(som, "decay", decay);
    if (decay != "exp") throw InvalidArgument("config: som.decay must be 'exp'");
  }
  Read(som, "sigma0", cfg.som.sigma0);
  Read(som, "alpha0", cfg.som.alpha0);
  Read(som, "epochs", cfg.som.epochs);
  Read(som, "epsilon_stab", cfg.som.epsilon_stab);
  Read(som, "tau", cfg.som.tau);
  Read(som, "sigma_tau_scale", cfg.som.sigma_tau_scale);
  Read(som, "max_updates", cfg.som.max_updates);
  Read(som, "window", cfg.loss_window);
  ReadSeed(som, "seed", cfg.som.seed);
  cfg.som.Validate();
  if (cfg.som_rows < 1 || cfg.som_cols < 1) {
    throw InvalidArgument("config: som.rows and som.cols must be >= 1");
  }
  if (cfg.loss_window < 1) throw InvalidArgument("config: som.window must be >= 1");

  const json& density = Section(doc, "density");
  CheckKeys(density, "density",
            {"bandwidth", "periodic", "classes", "top_k", "min_percentile"});
  if (density.contains("bandwidth") && !density.at("bandwidth").is_null()) {
    double bw = 0.0;
    Read(density, "bandwidth", bw);
    cfg.kde_bandwidth = bw;
  }
  Read(density, "periodic", cfg.kde_periodic);
  Read(density, "classes", cfg.density_classes);
  Read(density, "top_k", cfg.attractor_top_k);
  Read(density, "min_percentile", cfg.attractor_min_percentile);

  const json& cluster = Section(doc, "cluster");
  CheckKeys(cluster, "cluster", {"k", "n_seeds", "seed"});
  Read(cluster, "k", cfg.cluster_k);
  Read(cluster, "n_seeds", cfg.cluster_n_seeds);
  ReadSeed(cluster, "seed", cfg.cluster_seed);

  const json& attack = Section(doc, "attack");
  CheckKeys(attack, "attack",
            {"eps", "n_iter", "step", "rand_init", "targeted", "target_class",
             "clip_min", "clip_max", "n_images", "planar", "ttest_eps", "seed"});
  Read(attack, "eps", cfg.attack_eps);
  Read(attack, "n_iter", cfg.pgd.n_iter);
  Read(attack, "step", cfg.pgd.step);
  Read(attack, "rand_init", cfg.pgd.rand_init);
  Read(attack, "targeted", cfg.pgd.targeted);
  if (attack.contains("target_class") && !attack.at("target_class").is_null()) {
    uint32_t t = 0;
    Read(attack, "target_class", t);
    cfg.pgd.target_class = t;
  }
  Read(attack, "clip_min", cfg.pgd.clip_min);
  Read(attack, "clip_max", cfg.pgd.clip_max);
  Read(attack, "n_images", cfg.attack_images);
  Read(attack, "planar", cfg.attack_planar);
  if (attack.contains("ttest_eps")) {
    std::vector<double> pair;
    Read(attack, "ttest_eps", pair);
    if (pair.size() != 2) {
      throw InvalidArgument("config: attack.ttest_eps must hold two values");
    }
    cfg.ttest_eps_a = pair[0];
    cfg.ttest_eps_b = pair[1];
  }
  ReadSeed(attack, "seed", cfg.pgd.seed);
  cfg.pgd.Validate();

  const json& invert = Section(doc, "invert");
  CheckKeys(invert, "invert",
            {"top_k", "lr", "n_iter", "smoothness", "init", "seed"});
  Read(invert, "top_k", cfg.invert_top_k);
  Read(invert, "lr", cfg.invert.lr);
  Read(invert, "n_iter", cfg.invert.n_iter);
  Read(invert, "smoothness", cfg.invert.smoothness_lambda);
  if (invert.contains("init")) {
    std::string init;
    Read(invert, "init", init);
    if (init == "random") {
      cfg.invert.init = InversionInit::kRandomUniform;
    } else if (init == "gray") {
      cfg.invert.init = InversionInit::kGray;
    } else {
      throw InvalidArgument("config: invert.init must be 'random' or 'gray'");
    }
  }
  ReadSeed(invert, "seed", cfg.invert.seed);
  cfg.invert.Validate();
  return cfg;
}

PipelineConfig LoadPipelineConfig(const std::string& path) {
  std::string text;
  try {
    text = ReadFileBytes(path);
  } catch (const IoError&) {
    throw InvalidArgument("config: cannot read '" + path + "'");
  }
  return ParsePipelineConfig(text);
}

namespace {

json ConfigToJson(const PipelineConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["out"] = cfg.out;
  doc["layers"] = cfg.layers;
  doc["data"] = {{"n_classes", cfg.train_data.n_classes},
                 {"size", cfg.train_data.size},
                 {"noise", cfg.train_data.noise},
                 {"train_per_class", cfg.train_data.per_class},
                 {"probe_per_class", cfg.probe_data.per_class},
                 {"train_seed", cfg.train_data.seed},
                 {"probe_seed", cfg.probe_data.seed}};
  doc["refnet"] = {{"kernel", cfg.net.kernel},
                   {"conv1", cfg.net.conv1},
                   {"conv2", cfg.net.conv2},
                   {"init_seed", cfg.net_init_seed},
                   {"steps", cfg.net_train.steps},
                   {"batch", cfg.net_train.batch},
                   {"lr", cfg.net_train.lr},
                   {"momentum", cfg.net_train.momentum},
                   {"train_seed", cfg.net_train.seed}};
  doc["som"] = {
      {"rows", cfg.som_rows},
      {"cols", cfg.som_cols},
      {"topology",
       cfg.som_topology == Topology::kToroidal ? "toroidal" : "planar"},
      {"sigma0", cfg.som.sigma0},
      {"alpha0", cfg.som.alpha0},
      {"decay", "exp"},
      {"epochs", cfg.som.epochs},
      {"epsilon_stab", cfg.som.epsilon_stab},
      {"tau", cfg.som.tau},
      {"sigma_tau_scale", cfg.som.sigma_tau_scale},
      {"max_updates", cfg.som.max_updates},
      {"window", cfg.loss_window},
      {"seed", cfg.som.seed}};
  doc["density"] = {
      {"bandwidth", cfg.kde_bandwidth ? json(*cfg.kde_bandwidth) : json(nullptr)},
      {"periodic", cfg.kde_periodic},
      {"classes", cfg.density_classes},
      {"top_k", cfg.attractor_top_k},
      {"min_percentile", cfg.attractor_min_percentile}};
  doc["cluster"] = {{"k", cfg.cluster_k},
                    {"n_seeds", cfg.cluster_n_seeds},
                    {"seed", cfg.cluster_seed}};
  doc["attack"] = {
      {"eps", cfg.attack_eps},
      {"n_iter", cfg.pgd.n_iter},
      {"step", cfg.pgd.step},
      {"rand_init", cfg.pgd.rand_init},
      {"targeted", cfg.pgd.targeted},
      {"target_class",
       cfg.pgd.target_class ? json(*cfg.pgd.target_class) : json(nullptr)},
      {"clip_min", cfg.pgd.clip_min},
      {"clip_max", cfg.pgd.clip_max},
      {"n_images", cfg.attack_images},
      {"planar", cfg.attack_planar},
      {"ttest_eps", {cfg.ttest_eps_a, cfg.ttest_eps_b}},
      {"seed", cfg.pgd.seed}};
  doc["invert"] = {
      {"top_k", cfg.invert_top_k},
      {"lr", cfg.invert.lr},
      {"n_iter", cfg.invert.n_iter},
      {"smoothness", cfg.invert.smoothness_lambda},
      {"init", cfg.invert.init == InversionInit::kGray ? "gray" : "random"},
      {"seed", cfg.invert.seed}};
  return doc;
}

namespace fs = std::filesystem;

// Collects artifacts written by one command and emits its manifest.
class RunDir {
 public:
  RunDir(const PipelineConfig& cfg, std::string command)
      : cfg_(cfg), command_(std::move(command)) {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.out + "'");
  }

  std::string Path(const std::string& name) const {
    return (fs::path(cfg_.out) / name).string();
  }

  void Write(const std::string& name, std::string_view bytes) {
    WriteFileBytes(Path(name), bytes);
    result_.outputs.push_back(name);
    outputs_.push_back({{"path", name}, {"fnv1a64", HexDigest(Fnv1a64(bytes))}});
  }

  // Records a file another command already wrote.
  void Existing(const std::string& name) {
    result_.outputs.push_back(name);
    outputs_.push_back({{"path", name}, {"fnv1a64", HexDigest(Fnv1a64(ReadFileBytes(Path(name))))}});
  }

  void Input(const std::string& path) {
    inputs_.push_back(
        {{"path", path}, {"fnv1a64", HexDigest(Fnv1a64(ReadFileBytes(path)))}});
  }

  void Metric(const std::string& name, double value) {
    result_.metrics[name] = value;
  }

  CommandResult Finish(const json& args = json::object()) {
    json manifest;
    manifest["command"] = command_;
    manifest["args"] = args;
    manifest["config"] = ConfigToJson(cfg_);
    manifest["inputs"] = inputs_;
    manifest["outputs"] = outputs_;
    json metrics = json::object();
    for (const auto& [k, v] : result_.metrics) metrics[k] = v;
    manifest["metrics"] = metrics;
    std::string name = "manifest_" + command_;
    if (args.contains("layer")) name += "_" + args.at("layer").get<std::string>();
    name += ".json";
    WriteFileBytes(Path(name), manifest.dump(2) + "\n");
    result_.outputs.push_back(name);
    return result_;
  }

 private:
  const PipelineConfig& cfg_;
  std::string command_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  CommandResult result_;
};

std::string Or(const std::string& override_path, const std::string& fallback) {
  return override_path.empty() ? fallback : override_path;
}

KdeOptions Kde(const PipelineConfig& cfg) {
  return {cfg.kde_bandwidth, cfg.kde_periodic};
}

std::string BmuCsv(const std::vector<BmuAssignment>& bmus,
                   const HlrDataset& data) {
  std::string out = "sample,row,col,label,quantization_error\n";
  for (const BmuAssignment& b : bmus) {
    out += std::to_string(b.sample_index) + "," + std::to_string(b.row) + "," +
           std::to_string(b.col) + "," +
           (data.labels ? std::to_string((*data.labels)[b.sample_index]) : "") +
           "," + FormatDouble(b.quantization_error) + "\n";
  }
  return out;
}

// Loads the SOM and HLR inputs shared by the analysis commands and maps every
// sample to its BMU.
struct LayerInputs {
  SomGrid som;
  HlrDataset data;
  std::vector<BmuAssignment> bmus;
};

LayerInputs LoadLayer(const PipelineConfig& cfg, const std::string& layer,
                      const CommandPaths& paths, RunDir& run) {
  ParseProbe(layer);
  const std::string som_path = Or(paths.som, DefaultSomPath(cfg, layer));
  const std::string hlr_path = Or(paths.hlr, DefaultHlrPath(cfg, layer));
  run.Input(som_path);
  run.Input(hlr_path);
  LayerInputs in{LoadSom(som_path), ReadHlr(hlr_path), {}};
  in.bmus = FindBmus(in.som, in.data);
  return in;
}

}  // namespace

std::string PipelineConfigJson(const PipelineConfig& cfg) {
  return ConfigToJson(cfg).dump(2) + "\n";
}

std::string DefaultNetPath(const PipelineConfig& cfg) {
  return (fs::path(cfg.out) / "refnet.rnet").string();
}

std::string DefaultHlrPath(const PipelineConfig& cfg, const std::string& layer) {
  return (fs::path(cfg.out) / ("hlr_" + layer + ".hlr")).string();
}

std::string DefaultSomPath(const PipelineConfig& cfg, const std::string& layer) {
  return (fs::path(cfg.out) / ("som_" + layer + ".som")).string();
}

CommandResult CmdRefnetTrain(const PipelineConfig& cfg) {
  RunDir run(cfg, "refnet-train");
  const ShapeDataset train = GenerateShapes(cfg.train_data);
  RefNet net = RefNet::Initialize(cfg.net, cfg.net_init_seed);
  const RefNetTrainReport report = TrainRefNet(net, train, cfg.net_train);
  const double probe_accuracy = Accuracy(net, GenerateShapes(cfg.probe_data));
  run.Write("refnet.rnet", EncodeRefNet(net));
  run.Write("refnet_report.csv",
            "metric,value\ninitial_accuracy," +
                FormatDouble(report.initial_accuracy) + "\nfinal_accuracy," +
                FormatDouble(report.final_accuracy) + "\nfinal_loss," +
                FormatDouble(report.final_loss) + "\nprobe_accuracy," +
                FormatDouble(probe_accuracy) + "\n");
  run.Metric("initial_accuracy", report.initial_accuracy);
  run.Metric("final_accuracy", report.final_accuracy);
  run.Metric("probe_accuracy", probe_accuracy);
  return run.Finish();
}

CommandResult CmdExtract(const PipelineConfig& cfg, const std::string& layer,
                         const CommandPaths& paths) {
  const Probe probe = ParseProbe(layer);
  RunDir run(cfg, "extract");
  const std::string net_path = Or(paths.net, DefaultNetPath(cfg));
  run.Input(net_path);
  const RefNet net = LoadRefNet(net_path);
  const HlrDataset hlr = ExtractHlr(net, GenerateShapes(cfg.probe_data), probe);
  run.Write("hlr_" + layer + ".hlr", EncodeHlr(hlr));
  run.Metric("n_samples", hlr.n_samples);
  run.Metric("dim", hlr.dim);
  run.Metric("zero_vectors", hlr.zero_vectors);
  return run.Finish({{"layer", layer}});
}

CommandResult CmdTrainSom(const PipelineConfig& cfg, const std::string& layer,
                          const CommandPaths& paths) {
  ParseProbe(layer);
  RunDir run(cfg, "train-som");
  const std::string hlr_path = Or(paths.hlr, DefaultHlrPath(cfg, layer));
  run.Input(hlr_path);
  const HlrDataset data = ReadHlr(hlr_path);
  if (data.layer_tag != layer) {
    Warn("train-som: HLR file tag '" + data.layer_tag + "' differs from layer '" +
         layer + "'");
  }
  SomGrid grid = SomGrid::Random(cfg.som_rows, cfg.som_cols,
                                 static_cast<int>(data.dim), cfg.som.seed,
                                 cfg.som_topology);
  LossTrace trace = Train(grid, data, cfg.som);
  trace.window = cfg.loss_window;
  const std::vector<double> smoothed = MovingAverage(trace);
  std::string csv = "update,normalized_loss\n";
  for (size_t i = 0; i < smoothed.size(); ++i) {
    csv += std::to_string(i + trace.window) + "," + FormatDouble(smoothed[i]) + "\n";
  }
  run.Write("som_" + layer + ".som", EncodeSom(grid));
  run.Write("som_" + layer + "_loss.csv", csv);
  run.Metric("n_updates", static_cast<double>(trace.errors.size()));
  if (!smoothed.empty()) run.Metric("final_normalized_loss", smoothed.back());
  return run.Finish({{"layer", layer}});
}

CommandResult CmdDensity(const PipelineConfig& cfg, const std::string& layer,
                         const CommandPaths& paths) {
  RunDir run(cfg, "density");
  const LayerInputs in = LoadLayer(cfg, layer, paths, run);
  const DensityMap map =
      KdeDensity(in.bmus, in.som.rows(), in.som.cols(), Kde(cfg));
  const std::vector<Attractor> attractors =
      FindAttractors(map, cfg.attractor_top_k, cfg.attractor_min_percentile);
  const double dead = DeadUnitFraction(in.bmus, in.som.rows(), in.som.cols());
  std::string attractor_csv = "rank,row,col,density\n";
  for (const Attractor& a : attractors) {
    attractor_csv += std::to_string(a.rank) + "," + std::to_string(a.row) + "," +
                     std::to_string(a.col) + "," + FormatDouble(a.density) + "\n";
  }
  run.Write("bmu_" + layer + ".csv", BmuCsv(in.bmus, in.data));
  run.Write("density_" + layer + ".csv", DensityCsv(map));
  run.Write("density_" + layer + ".pgm", DensityPgm(map));
  run.Write("attractors_" + layer + ".csv", attractor_csv);
  run.Write("density_" + layer + "_summary.csv",
            "metric,value\nn_samples," + std::to_string(in.bmus.size()) +
                "\ndead_unit_fraction," + FormatDouble(dead) +
                "\nbandwidth_row," + FormatDouble(map.bandwidth_row) +
                "\nbandwidth_col," + FormatDouble(map.bandwidth_col) + "\n");
  run.Metric("dead_unit_fraction", dead);
  run.Metric("n_attractors", static_cast<double>(attractors.size()));
  return run.Finish({{"layer", layer}});
}

CommandResult CmdClassDensity(const PipelineConfig& cfg,
                              const std::string& layer,
                              const CommandPaths& paths) {
  RunDir run(cfg, "class-density");
  const LayerInputs in = LoadLayer(cfg, layer, paths, run);
  if (!in.data.labels) {
    throw InvalidArgument("class-density: HLR file carries no labels");
  }
  std::vector<uint32_t> classes = cfg.density_classes;
  if (classes.empty()) {
    const std::set<uint32_t> present(in.data.labels->begin(),
                                     in.data.labels->end());
    classes.assign(present.begin(), present.end());
  }
  for (uint32_t c : classes) {
    const DensityMap map = ClassDensity(in.bmus, *in.data.labels, c,
                                        in.som.rows(), in.som.cols(),
                                        Kde(cfg));
    const std::string stem = "density_" + layer + "_class" + std::to_string(c);
    run.Write(stem + ".csv", DensityCsv(map));
    run.Write(stem + ".pgm", DensityPgm(map));
  }
  run.Metric("n_classes", static_cast<double>(classes.size()));
  return run.Finish({{"layer", layer}});
}

CommandResult CmdClusterScore(const PipelineConfig& cfg,
                              const std::string& layer,
                              const CommandPaths& paths) {
  RunDir run(cfg, "cluster-score");
  const LayerInputs in = LoadLayer(cfg, layer, paths, run);
  if (!in.data.labels) {
    throw InvalidArgument("cluster-score: HLR file carries no labels");
  }
  const VScoreReport report = ClusteringScoreExperiment(
      in.bmus, *in.data.labels, cfg.cluster_k, cfg.cluster_n_seeds,
      in.som.rows(), in.som.cols(), cfg.cluster_seed);
  run.Write("vscore_" + layer + ".csv", VScoreCsv(report, layer));
  run.Metric("mean_vscore", report.mean);
  run.Metric("std_vscore", report.std);
  return run.Finish({{"layer", layer}});
}

CommandResult CmdAttack(const PipelineConfig& cfg, const CommandPaths& paths) {
  RunDir run(cfg, "attack");
  const std::string net_path = Or(paths.net, DefaultNetPath(cfg));
  run.Input(net_path);
  const RefNet net = LoadRefNet(net_path);
  std::vector<SomGrid> soms;
  std::vector<Probe> probes;
  for (const std::string& layer : cfg.layers) {
    const std::string som_path =
        cfg.layers.size() == 1 ? Or(paths.som, DefaultSomPath(cfg, layer))
                               : DefaultSomPath(cfg, layer);
    run.Input(som_path);
    soms.push_back(LoadSom(som_path));
    probes.push_back(ParseProbe(layer));
  }
  std::vector<SomProbe> som_probes;
  for (size_t i = 0; i < soms.size(); ++i) som_probes.push_back({probes[i], &soms[i]});

  const ShapeDataset data = GenerateShapes(cfg.probe_data);
  if (cfg.attack_images < 1 ||
      static_cast<size_t>(cfg.attack_images) > data.images.size()) {
    throw InvalidArgument("attack: n_images must be in [1, " +
                          std::to_string(data.images.size()) + "]");
  }
  const std::span<const Image> images(data.images.data(), cfg.attack_images);
  const std::span<const uint32_t> labels(data.labels.data(), cfg.attack_images);
  const std::vector<DisplacementCurve> curves = DisplacementExperiment(
      net, som_probes, images, labels, cfg.attack_eps, cfg.pgd,
      cfg.attack_planar);
  run.Write("displacement.csv", DisplacementCsv(curves));
  run.Write("displacement_raw.csv", DisplacementRawCsv(curves));
  const auto has = [&cfg](double e) {
    return std::find(cfg.attack_eps.begin(), cfg.attack_eps.end(), e) !=
           cfg.attack_eps.end();
  };
  if (has(cfg.ttest_eps_a) && has(cfg.ttest_eps_b)) {
    const std::vector<TTestRow> rows =
        CompareEps(curves, cfg.ttest_eps_a, cfg.ttest_eps_b);
    run.Write("ttest.csv", TTestCsv(rows));
    for (const TTestRow& r : rows) run.Metric("p_" + r.layer_tag, r.result.p);
  }
  for (const DisplacementCurve& c : curves) {
    for (size_t e = 0; e < c.eps.size(); ++e) {
      run.Metric("mean_" + c.layer_tag + "_eps" + FormatDouble(c.eps[e]),
                 c.mean[e]);
    }
  }
  return run.Finish();
}

CommandResult CmdInvert(const PipelineConfig& cfg, const std::string& layer,
                        const CommandPaths& paths) {
  const Probe probe = ParseProbe(layer);
  RunDir run(cfg, "invert");
  const std::string net_path = Or(paths.net, DefaultNetPath(cfg));
  run.Input(net_path);
  const RefNet net = LoadRefNet(net_path);
  const LayerInputs in = LoadLayer(cfg, layer, paths, run);
  const DensityMap map =
      KdeDensity(in.bmus, in.som.rows(), in.som.cols(), Kde(cfg));
  const std::vector<Attractor> attractors =
      FindAttractors(map, cfg.invert_top_k, cfg.attractor_min_percentile);
  const std::vector<InversionResult> results =
      InvertAttractors(net, in.som, probe, map, cfg.invert_top_k, cfg.invert,
                       cfg.attractor_min_percentile);
  std::string summary = "rank,row,col,density,final_loss\n";
  for (size_t i = 0; i < results.size(); ++i) {
    const std::string stem = "invert_" + layer + "_" + std::to_string(i);
    const Image& img = results[i].image;
    run.Write(stem + ".pgm", EncodePgm(img.height, img.width, img.pixels, 0.0, 1.0));
    run.Write(stem + "_loss.csv", LossTraceCsv(results[i]));
    summary += std::to_string(attractors[i].rank) + "," +
               std::to_string(attractors[i].row) + "," +
               std::to_string(attractors[i].col) + "," +
               FormatDouble(attractors[i].density) + "," +
               FormatDouble(results[i].final_loss) + "\n";
  }
  run.Write("invert_" + layer + ".csv", summary);
  run.Metric("n_inverted", static_cast<double>(results.size()));
  return run.Finish({{"layer", layer}});
}

CommandResult CmdPipeline(const PipelineConfig& cfg) {
  CommandResult all;
  const auto merge = [&all](const CommandResult& r, const std::string& prefix) {
    all.outputs.insert(all.outputs.end(), r.outputs.begin(), r.outputs.end());
    for (const auto& [k, v] : r.metrics) all.metrics[prefix + k] = v;
  };
  merge(CmdRefnetTrain(cfg), "refnet.");
  for (const std::string& layer : cfg.layers) {
    merge(CmdExtract(cfg, layer), "extract." + layer + ".");
    merge(CmdTrainSom(cfg, layer), "som." + layer + ".");
    merge(CmdDensity(cfg, layer), "density." + layer + ".");
    merge(CmdClassDensity(cfg, layer), "class-density." + layer + ".");
    merge(CmdClusterScore(cfg, layer), "cluster." + layer + ".");
    merge(CmdInvert(cfg, layer), "invert." + layer + ".");
  }
  merge(CmdAttack(cfg), "attack.");

  // Top-level manifest covering every artifact of the run.
  RunDir run(cfg, "pipeline");
  for (const std::string& name : all.outputs) run.Existing(name);
  for (const auto& [k, v] : all.metrics) run.Metric(k, v);
  return run.Finish();
}

}  // namespace fncode
