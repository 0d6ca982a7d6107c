// Python bindings for the main fncode operations.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "fncode/clustering.h"
#include "fncode/density.h"
#include "fncode/error.h"
#include "fncode/hlr.h"
#include "fncode/pipeline.h"
#include "fncode/som.h"
#include "fncode/stats.h"

namespace py = pybind11;

namespace fncode {
namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int64_t, py::array::c_style | py::array::forcecast>;

HlrDataset ToDataset(const FloatArray& vectors, const std::optional<std::vector<uint32_t>>& labels,
                     const std::string& tag) {
  if (vectors.ndim() != 2) throw InvalidArgument("vectors must be a 2-D array");
  HlrDataset d;
  d.n_samples = static_cast<uint32_t>(vectors.shape(0));
  d.dim = static_cast<uint32_t>(vectors.shape(1));
  d.vectors.assign(vectors.data(), vectors.data() + vectors.size());
  d.labels = labels;
  d.layer_tag = tag;
  return d;
}

FloatArray ToArray(const std::vector<float>& v, size_t rows, size_t cols) {
  FloatArray out({rows, cols});
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(float));
  return out;
}

std::vector<BmuAssignment> ToAssignments(const IntArray& coords) {
  if (coords.ndim() != 2 || coords.shape(1) != 2) throw InvalidArgument("bmus must have shape (n, 2)");
  std::vector<BmuAssignment> a(static_cast<size_t>(coords.shape(0)));
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] = {static_cast<uint32_t>(i), static_cast<int>(coords.at(i, 0)), static_cast<int>(coords.at(i, 1)), 0.0};
  }
  return a;
}

py::array_t<double> DensityArray(const DensityMap& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::memcpy(out.mutable_data(), m.values.data(), m.values.size() * sizeof(double));
  return out;
}

DensityMap FromDensityArray(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw InvalidArgument("density must be a 2-D array");
  DensityMap m;
  m.rows = static_cast<int>(a.shape(0));
  m.cols = static_cast<int>(a.shape(1));
  m.values.assign(a.data(), a.data() + a.size());
  return m;
}

}  // namespace
}  // namespace fncode

PYBIND11_MODULE(_core, m) {
  using namespace fncode;
  m.doc() = "Self-organizing-map analysis of hidden-layer representations";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("read_hlr", [](const std::string& path) {
    const HlrDataset d = ReadHlr(path);
    py::object labels = py::none();
    if (d.labels) labels = py::cast(*d.labels);
    return py::make_tuple(ToArray(d.vectors, d.n_samples, d.dim), labels, d.layer_tag);
  }, py::arg("path"), "Returns (vectors, labels or None, layer_tag).");
  m.def("write_hlr", [](const std::string& path, const FloatArray& vectors,
                        std::optional<std::vector<uint32_t>> labels, const std::string& tag) {
    WriteHlr(ToDataset(vectors, labels, tag), path);
  }, py::arg("path"), py::arg("vectors"), py::arg("labels") = py::none(), py::arg("layer_tag") = "");

  py::class_<SomGrid>(m, "SomGrid")
      .def_static("random", [](int rows, int cols, int dim, uint64_t seed, bool toroidal) {
        return SomGrid::Random(rows, cols, dim, seed, toroidal ? Topology::kToroidal : Topology::kPlanar);
      }, py::arg("rows"), py::arg("cols"), py::arg("dim"), py::arg("seed") = 0, py::arg("toroidal") = true)
      .def_static("load", &LoadSom, py::arg("path"))
      .def("save", [](const SomGrid& g, const std::string& path) { SaveSom(g, path); }, py::arg("path"))
      .def_property_readonly("rows", &SomGrid::rows)
      .def_property_readonly("cols", &SomGrid::cols)
      .def_property_readonly("dim", &SomGrid::dim)
      .def_property_readonly("weights", [](const SomGrid& g) {
        FloatArray out({g.rows(), g.cols(), g.dim()});
        std::memcpy(out.mutable_data(), g.data().data(), g.data().size() * sizeof(float));
        return out;
      })
      .def("grid_distance", [](const SomGrid& g, int r1, int c1, int r2, int c2) {
        return g.GridDistance({r1, c1}, {r2, c2});
      })
      .def("train", [](SomGrid& g, const FloatArray& vectors, double sigma0, double alpha0, int epochs,
                       uint64_t seed, int64_t max_updates) {
        TrainConfig cfg;
        cfg.sigma0 = sigma0;
        cfg.alpha0 = alpha0;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.max_updates = max_updates;
        return Train(g, ToDataset(vectors, std::nullopt, ""), cfg).errors;
      }, py::arg("vectors"), py::arg("sigma0") = 5.0, py::arg("alpha0") = 0.01, py::arg("epochs") = 5,
         py::arg("seed") = 0, py::arg("max_updates") = 0,
         "Trains in place and returns per-update quantization errors.")
      .def("find_bmus", [](const SomGrid& g, const FloatArray& vectors) {
        const auto bmus = FindBmus(g, ToDataset(vectors, std::nullopt, ""));
        py::array_t<int64_t> out({bmus.size(), size_t{2}});
        for (size_t i = 0; i < bmus.size(); ++i) {
          out.mutable_at(i, 0) = bmus[i].row;
          out.mutable_at(i, 1) = bmus[i].col;
        }
        return out;
      }, py::arg("vectors"));

  m.def("moving_average", [](const std::vector<double>& errors, int window) {
    return MovingAverage(errors, window);
  }, py::arg("errors"), py::arg("window") = 1000);
  m.def("kde_density", [](const IntArray& bmus, int rows, int cols, std::optional<double> bandwidth,
                          bool periodic) {
    return DensityArray(KdeDensity(ToAssignments(bmus), rows, cols, KdeOptions{bandwidth, periodic}));
  }, py::arg("bmus"), py::arg("rows"), py::arg("cols"), py::arg("bandwidth") = py::none(),
     py::arg("periodic") = false);
  m.def("find_attractors", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& density,
                              int top_k, double min_percentile) {
    std::vector<std::tuple<int, int, double>> out;
    for (const Attractor& a : FindAttractors(FromDensityArray(density), top_k, min_percentile)) {
      out.emplace_back(a.row, a.col, a.density);
    }
    return out;
  }, py::arg("density"), py::arg("top_k") = 5, py::arg("min_percentile") = 50.0,
     "Returns [(row, col, density)] sorted by density.");
  m.def("dead_unit_fraction", [](const IntArray& bmus, int rows, int cols) {
    return DeadUnitFraction(ToAssignments(bmus), rows, cols);
  }, py::arg("bmus"), py::arg("rows"), py::arg("cols"));
  m.def("v_measure", [](const std::vector<int64_t>& truth, const std::vector<int64_t>& predicted) {
    return VMeasure(truth, predicted);
  }, py::arg("truth"), py::arg("predicted"));
  m.def("welch_ttest", [](const std::vector<double>& a, const std::vector<double>& b) {
    const TTestResult r = WelchTTest(a, b);
    return py::make_tuple(r.t, r.p);
  }, py::arg("a"), py::arg("b"), "Returns (t, two-sided p).");

  m.def("default_config", [](uint64_t seed) { return PipelineConfigJson(DefaultPipelineConfig(seed)); },
        py::arg("seed") = 7, "Default pipeline config as a JSON string.");
  m.def("run_pipeline", [](const std::string& config_json, const std::string& out) {
    PipelineConfig cfg = ParsePipelineConfig(config_json);
    cfg.out = out;
    py::gil_scoped_release release;
    return CmdPipeline(cfg).metrics;
  }, py::arg("config_json"), py::arg("out"), "Runs every stage and returns the merged metrics.");
}
