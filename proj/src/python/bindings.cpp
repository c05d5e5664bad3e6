/*
 * Copyright 2026 The pacstab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pacstab/config.hpp"
#include "pacstab/dataset.hpp"
#include "pacstab/error.hpp"
#include "pacstab/experiments.hpp"
#include "pacstab/model.hpp"
#include "pacstab/noise.hpp"
#include "pacstab/random.hpp"
#include "pacstab/stability.hpp"
#include "pacstab/text_format.hpp"
#include "pacstab/trainer.hpp"
#include "pacstab/treenet.hpp"

namespace py = pybind11;

namespace pacstab {
namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>;

FeatureDataset MakeDataset(FloatArray x, LabelArray y, std::optional<std::size_t> classes) {
  if (x.ndim() != 2) throw InvalidArgument("features must be a 2-D array");
  if (y.ndim() != 1) throw InvalidArgument("labels must be a 1-D array");
  const auto n = static_cast<std::size_t>(x.shape(0));
  const auto d = static_cast<std::size_t>(x.shape(1));
  std::vector<float> features(x.data(), x.data() + x.size());
  std::vector<std::uint16_t> labels(y.data(), y.data() + y.size());
  std::size_t c = 2;
  if (classes) {
    c = *classes;
  } else {
    for (auto l : labels) c = std::max<std::size_t>(c, std::size_t{l} + 1);
  }
  return FeatureDataset(n, d, c, std::move(features), std::move(labels));
}

py::array_t<float> Features(const FeatureDataset& ds) {
  py::array_t<float> out({ds.n_samples(), ds.feature_dim()});
  std::copy(ds.features().begin(), ds.features().end(), out.mutable_data());
  return out;
}

py::array_t<std::uint16_t> Labels(const FeatureDataset& ds) {
  py::array_t<std::uint16_t> out(ds.n_samples());
  std::copy(ds.labels().begin(), ds.labels().end(), out.mutable_data());
  return out;
}

ParamVector MakeModel(DoubleArray values, std::size_t feature_dim, std::size_t n_classes) {
  return ParamVector(ParamLayout{feature_dim, n_classes},
                     std::vector<double>(values.data(), values.data() + values.size()));
}

py::array_t<double> Values(const ParamVector& p) {
  py::array_t<double> out(p.size());
  std::copy(p.values().begin(), p.values().end(), out.mutable_data());
  return out;
}

// Python values become config strings so keyword arguments share the CLI's
// parser and validation.
ConfigMap ToConfigMap(const py::dict& kwargs) {
  ConfigMap map;
  for (const auto& [key, value] : kwargs) {
    const auto name = py::cast<std::string>(key);
    std::string text;
    if (py::isinstance<py::bool_>(value)) {
      text = py::cast<bool>(value) ? "true" : "false";
    } else if (py::isinstance<py::float_>(value)) {
      text = FormatReal(py::cast<double>(value));
    } else if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
      for (const auto& item : value) {
        if (!text.empty()) text += ",";
        text += FormatReal(py::cast<double>(item));
      }
    } else {
      text = py::cast<std::string>(py::str(value));
    }
    map[name] = text;
  }
  return map;
}

TrainingConfig ConfigFromKwargs(const py::dict& kwargs, std::size_t n_params) {
  const ConfigMap map = ToConfigMap(kwargs);
  CheckKeys(map, TrainingKeys());
  return TrainingConfigFromMap(map, n_params);
}

py::object JsonToPython(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace
}  // namespace pacstab

PYBIND11_MODULE(_pacstab, m) {
  using namespace pacstab;
  m.doc() = "Stability measurement and noise calibration for linear-model ensembles";

  // Translators registered later are tried first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<Divergence>(m, "Divergence", PyExc_ArithmeticError);

  py::class_<FeatureDataset>(m, "Dataset")
      .def(py::init(&MakeDataset), py::arg("features"), py::arg("labels"),
           py::arg("n_classes") = py::none())
      .def_property_readonly("n_samples", &FeatureDataset::n_samples)
      .def_property_readonly("feature_dim", &FeatureDataset::feature_dim)
      .def_property_readonly("n_classes", &FeatureDataset::n_classes)
      .def_property_readonly("features", &Features)
      .def_property_readonly("labels", &Labels)
      .def("__len__", &FeatureDataset::n_samples)
      .def("__eq__", [](const FeatureDataset& a, const FeatureDataset& b) { return a == b; });

  m.def(
      "load_dataset",
      [](const std::filesystem::path& path, std::optional<std::size_t> n_classes) {
        return LoadDataset(path, FormatFromExtension(path), n_classes);
      },
      py::arg("path"), py::arg("n_classes") = py::none());
  m.def(
      "save_dataset",
      [](const FeatureDataset& ds, const std::filesystem::path& path) {
        SaveDataset(ds, path, FormatFromExtension(path));
      },
      py::arg("dataset"), py::arg("path"));
  m.def("synthesize_dataset", &SynthesizeDataset, py::arg("n"), py::arg("d"),
        py::arg("n_classes"), py::arg("separation"), py::arg("seed"));
  m.def(
      "random_subset",
      [](const FeatureDataset& ds, std::size_t count, std::uint64_t seed) {
        return ResolveSubset(ds, {SubsetMode::random_subset, count, seed});
      },
      py::arg("dataset"), py::arg("count"), py::arg("seed"));
  m.def(
      "remove_points",
      [](const FeatureDataset& ds, std::size_t count, std::uint64_t seed) {
        return ResolveSubset(ds, {SubsetMode::point_removal, count, seed});
      },
      py::arg("dataset"), py::arg("count"), py::arg("seed"));

  py::class_<ParamVector>(m, "Model")
      .def(py::init(&MakeModel), py::arg("values"), py::arg("feature_dim"),
           py::arg("n_classes"))
      .def_static(
          "zeros",
          [](std::size_t d, std::size_t c) { return ParamVector(ParamLayout{d, c}); },
          py::arg("feature_dim"), py::arg("n_classes"))
      .def_static(
          "random",
          [](std::size_t d, std::size_t c, double stddev, std::uint64_t seed) {
            return RandomParams(ParamLayout{d, c}, stddev, seed);
          },
          py::arg("feature_dim"), py::arg("n_classes"), py::arg("stddev"), py::arg("seed"))
      .def_property_readonly("feature_dim",
                             [](const ParamVector& p) { return p.layout().feature_dim; })
      .def_property_readonly("n_classes",
                             [](const ParamVector& p) { return p.layout().n_classes; })
      .def_property_readonly("values", &Values)
      .def("norm", &ParamVector::Norm)
      .def("__len__", &ParamVector::size)
      .def("__eq__", [](const ParamVector& a, const ParamVector& b) { return a == b; })
      .def("predict",
           [](const ParamVector& p, FloatArray x) {
             return Predict(p, std::span<const float>(x.data(), x.size()));
           })
      .def("predict_class",
           [](const ParamVector& p, FloatArray x) {
             return PredictClass(p, std::span<const float>(x.data(), x.size()));
           })
      .def("accuracy", &Accuracy, py::arg("dataset"))
      .def(
          "loss",
          [](const ParamVector& p, const FeatureDataset& ds, const std::string& loss) {
            return ComputeLoss(p, ds, ParseLossKind(loss));
          },
          py::arg("dataset"), py::arg("loss") = "softmax")
      .def(
          "gradient",
          [](const ParamVector& p, const FeatureDataset& ds, const std::string& loss) {
            return Values(ComputeLossAndGradient(p, ds, ParseLossKind(loss)).gradient);
          },
          py::arg("dataset"), py::arg("loss") = "softmax");

  m.def("load_model", &LoadParamVector, py::arg("path"));
  m.def("save_model", &SaveParamVector, py::arg("model"), py::arg("path"));
  m.def("least_squares_closed_form", &LeastSquaresClosedForm, py::arg("dataset"));

  m.def(
      "train",
      [](const ParamVector& p0, const FeatureDataset& data, const std::string& loss,
         const FeatureDataset* test, py::kwargs kwargs) {
        const TrainingConfig cfg = ConfigFromKwargs(kwargs, p0.size());
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = Train(p0, data, test, ParseLossKind(loss), cfg);
        }
        py::list trace;
        for (const auto& rec : result.trace.records) {
          trace.append(py::dict(py::arg("epoch") = rec.epoch, py::arg("loss") = rec.loss,
                                py::arg("test_accuracy") = rec.test_accuracy));
        }
        return py::make_tuple(result.params, trace);
      },
      py::arg("init"), py::arg("data"), py::arg("loss") = "softmax",
      py::arg("test") = nullptr,
      "Full-batch training; keyword arguments use the config keys (lr, epochs, clip, ...). "
      "Returns (model, trace).");

  m.def(
      "train_ensemble",
      [](const ParamVector& p0, const std::vector<FeatureDataset>& sets,
         const std::string& loss, const FeatureDataset* test, std::size_t workers,
         py::kwargs kwargs) {
        const TrainingConfig cfg = ConfigFromKwargs(kwargs, p0.size());
        std::vector<ParamVector> models;
        {
          py::gil_scoped_release release;
          auto members = TrainEnsemble(p0, sets, test, ParseLossKind(loss), cfg, workers);
          for (auto& member : members) models.push_back(std::move(member.params));
        }
        return models;
      },
      py::arg("init"), py::arg("datasets"), py::arg("loss") = "softmax",
      py::arg("test") = nullptr, py::arg("workers") = 1);

  py::class_<DeviationReport>(m, "DeviationReport")
      .def_readonly("n_models", &DeviationReport::n_models)
      .def_readonly("deviation_l2", &DeviationReport::deviation_l2)
      .def_readonly("mean_model_l2", &DeviationReport::mean_model_l2)
      .def_readonly("percent_deviation", &DeviationReport::percent_deviation)
      .def_property_readonly("eigenvalues",
                             [](const DeviationReport& r) { return r.spectrum.eigenvalues; })
      .def_property_readonly("sqrt_sum",
                             [](const DeviationReport& r) { return r.spectrum.sqrt_sum; })
      .def_property_readonly("sqrt_total",
                             [](const DeviationReport& r) { return r.spectrum.sqrt_total; })
      .def_property_readonly(
          "directions", [](const DeviationReport& r) { return r.spectrum.directions; })
      .def("to_dict", [](const DeviationReport& r) { return JsonToPython(ReportToJson(r, true)); });

  m.def(
      "deviation_report",
      [](const std::vector<ParamVector>& models, bool directions) {
        return ComputeDeviationReport(models, ReportOptions{.with_directions = directions});
      },
      py::arg("models"), py::arg("directions") = true);

  m.def(
      "privatize",
      [](const ParamVector& p, const DeviationReport& report, const std::string& mode,
         double scale, std::uint64_t seed) {
        const auto result = Privatize(p, report, {ParseNoiseMode(mode), scale, seed});
        return py::make_tuple(result.params, result.degenerate_spectrum);
      },
      py::arg("model"), py::arg("report"), py::arg("mode") = "anisotropic",
      py::arg("scale") = 1.0, py::arg("seed") = 0,
      "Returns (noisy_model, degenerate_spectrum).");
  m.def("perturb_inputs", &PerturbInputs, py::arg("dataset"), py::arg("sigma"),
        py::arg("seed"));

  py::class_<TreeSpec>(m, "Tree")
      .def_property_readonly("skeleton", [](const TreeSpec& t) { return SkeletonToString(t); })
      .def_property_readonly("internal_count", &TreeSpec::InternalCount)
      .def_property_readonly("depth", &TreeSpec::Depth)
      .def_property_readonly("trained_count",
                             [](const TreeSpec& t) {
                               std::size_t k = 0;
                               for (const auto& node : t.nodes) k += node.classifier.has_value();
                               return k;
                             })
      .def("predict",
           [](const TreeSpec& t, FloatArray x) {
             return TreePredict(t, std::span<const float>(x.data(), x.size()));
           })
      .def("accuracy", &TreeAccuracy, py::arg("dataset"))
      .def("save", &SaveTree, py::arg("dir"));
  m.def("load_tree", &LoadTree, py::arg("dir"));

  m.def(
      "train_tree",
      [](const FeatureDataset& data, const std::string& skeleton, const std::string& loss,
         std::size_t workers, py::kwargs kwargs) {
        const std::size_t C = data.n_classes();
        TreeSpec spec;
        if (skeleton == "balanced") {
          spec = BalancedSkeleton(C);
        } else if (skeleton == "cifar10") {
          if (C != 10) throw InvalidArgument("the cifar10 skeleton needs 10 classes");
          spec = Cifar10Skeleton();
        } else {
          spec = ParseSkeleton(skeleton, C);
        }
        const TrainingConfig cfg =
            ConfigFromKwargs(kwargs, ParamLayout{data.feature_dim(), 2}.size());
        py::gil_scoped_release release;
        return TrainTree(spec, data, ParseLossKind(loss), cfg, workers);
      },
      py::arg("data"), py::arg("skeleton") = "balanced", py::arg("loss") = "softmax",
      py::arg("workers") = 1);

  m.def(
      "run_experiment",
      [](py::dict config, const FeatureDataset& train, const FeatureDataset* test,
         std::size_t workers, std::optional<std::filesystem::path> out) {
        const ConfigMap map = ToConfigMap(config);
        CheckKeys(map, ExperimentKeys());
        const ExperimentSpec spec =
            ExperimentSpecFromMap(map, ParamLayout{train.feature_dim(), train.n_classes()}.size());
        ExperimentReport report;
        {
          py::gil_scoped_release release;
          report = RunExperiment(spec, train, test, RunOptions{workers, out});
        }
        return JsonToPython(ExperimentReportToJson(report));
      },
      py::arg("config"), py::arg("train"), py::arg("test") = nullptr,
      py::arg("workers") = 1, py::arg("out") = py::none(),
      "Runs an experiment described by config keys and returns the report as a dict.");

  m.def("fnv1a64", [](const std::string& s) { return Fnv1a64(s); });
  m.def("hash64", [](const std::vector<std::uint64_t>& words) {
    return Hash64(std::span<const std::uint64_t>(words));
  });
  m.def("member_seed", &MemberSeed, py::arg("master_seed"), py::arg("name"),
        py::arg("sweep_index"), py::arg("member_index"));
}
