#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mprt/architectures.h"
#include "mprt/attribution.h"
#include "mprt/config.h"
#include "mprt/dataset.h"
#include "mprt/entropy.h"
#include "mprt/error.h"
#include "mprt/experiment.h"
#include "mprt/metaeval.h"
#include "mprt/metrics.h"
#include "mprt/model_io.h"
#include "mprt/randomisation.h"
#include "mprt/similarity.h"
#include "mprt/train.h"

namespace py = pybind11;
using namespace mprt;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor ToTensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray ToArray(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  FloatArray out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

template <typename T, typename Parse>
T ParseOrThrow(const std::string& name, Parse parse, const char* what) {
  const auto v = parse(name);
  if (!v) throw py::value_error(std::string("unknown ") + what + " '" + name + "'");
  return *v;
}

MethodId Method(const std::string& name) { return ParseOrThrow<MethodId>(name, ParseMethod, "method"); }

RandomisationPlan Plan(const std::string& order, const std::string& reinit, std::uint64_t seed) {
  RandomisationPlan p;
  p.order = ParseOrThrow<RandomisationOrder>(order, ParseOrder, "order");
  p.reinit = ParseOrThrow<ReinitRule>(reinit, ParseReinit, "reinit rule");
  p.seed = seed;
  return p;
}

MethodConfig MethodCfg(const std::string& method, int steps, int samples, double noise_level, double epsilon) {
  MethodConfig c = MethodConfig::Default(Method(method));
  if (steps > 0) c.steps = steps;
  if (samples > 0) c.samples = samples;
  if (noise_level >= 0) c.noise_level = noise_level;
  if (epsilon > 0) c.epsilon = epsilon;
  return c;
}

py::dict CurveDict(const MprtResult& r) {
  py::list stages, means, stds, ns, estimates;
  for (const auto& s : r.curve.stages) {
    stages.append(s.stage_label);
    means.append(s.mean);
    stds.append(s.std);
    ns.append(s.n);
  }
  for (const auto& e : r.estimates) estimates.append(e.value);
  py::dict d;
  d["stages"] = stages;
  d["mean"] = means;
  d["std"] = stds;
  d["n"] = ns;
  d["final_scores"] = estimates;
  d["auc"] = CurveAuc(r.curve);
  d["failures"] = r.failures.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the MPRT bench core";

  static py::exception<Error> error(m, "MprtError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(e.code_name()) + ": " + e.what()).c_str());
    }
  });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](const FloatArray& inputs, const std::vector<int>& labels, int num_classes) {
             if (inputs.ndim() < 2 || std::size_t(inputs.shape(0)) != labels.size())
               throw py::value_error("inputs must be [n, ...] with one label per row");
             Dataset d;
             const Tensor all = ToTensor(inputs);
             Shape item(all.shape().begin() + 1, all.shape().end());
             const std::size_t stride = all.size() / labels.size();
             for (std::size_t i = 0; i < labels.size(); ++i)
               d.inputs.emplace_back(item, std::vector<float>(all.data() + i * stride, all.data() + (i + 1) * stride));
             d.labels = labels;
             d.num_classes = num_classes;
             d.split = "test";
             d.Validate();
             return d;
           }),
           py::arg("inputs"), py::arg("labels"), py::arg("num_classes"))
      .def("__len__", &Dataset::size)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("split", &Dataset::split)
      .def("head", &Dataset::Head)
      .def_property_readonly("inputs", [](const Dataset& d) {
        if (d.empty()) return FloatArray();
        Shape shape = d.inputs.front().shape();
        shape.insert(shape.begin(), int(d.size()));
        std::vector<float> flat;
        for (const Tensor& t : d.inputs) flat.insert(flat.end(), t.data(), t.data() + t.size());
        return ToArray(Tensor(shape, std::move(flat)));
      });

  m.def(
      "generate_synthetic",
      [](int classes, int image_size, int train_samples, int test_samples, double noise, int max_shift,
         std::uint64_t seed) {
        SyntheticSpec s{classes, image_size, train_samples, test_samples, noise, max_shift};
        DatasetSplits d = GenerateSynthetic(s, seed);
        return py::make_tuple(d.train, d.test);
      },
      py::arg("classes") = 10, py::arg("image_size") = 16, py::arg("train_samples") = 2000,
      py::arg("test_samples") = 500, py::arg("noise") = 0.15, py::arg("max_shift") = 3, py::arg("seed") = 1,
      "Returns (train, test) datasets.");

  py::class_<Model>(m, "Model")
      .def_property_readonly("input_shape", &Model::input_shape)
      .def_property_readonly("num_classes", &Model::num_classes)
      .def_property_readonly("metadata", &Model::metadata)
      .def("parameter_count", &Model::ParameterCount)
      .def("layer_names", [](const Model& model) {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < model.num_layers(); ++i) names.push_back(model.LayerName(i));
        return names;
      })
      .def("logits", [](const Model& model, const FloatArray& x) { return ToArray(Forward(model, ToTensor(x)).logits); })
      .def("predict", [](const Model& model, const FloatArray& x) { return Predict(model, ToTensor(x)); })
      .def("accuracy", [](const Model& model, const Dataset& d) { return Accuracy(model, d); })
      .def("save", [](const Model& model, const std::string& prefix) { SaveModel(model, prefix); });

  m.def("load_model", &LoadModel, py::arg("prefix"));
  m.def(
      "build_model",
      [](const std::string& arch, const std::vector<int>& input_shape, int num_classes, std::uint64_t seed) {
        Model model = BuildModel(ParseOrThrow<Architecture>(arch, ParseArchitecture, "architecture"), input_shape,
                                 num_classes);
        InitializeParameters(model, seed);
        return model;
      },
      py::arg("architecture"), py::arg("input_shape"), py::arg("num_classes"), py::arg("seed") = 0,
      "Kaiming-initialised, untrained model.");
  m.def(
      "train",
      [](const std::string& arch, const Dataset& train, std::uint64_t seed, int epochs, double learning_rate,
         double momentum, int batch_size) {
        TrainConfig c;
        c.architecture = ParseOrThrow<Architecture>(arch, ParseArchitecture, "architecture");
        c.epochs = epochs;
        c.learning_rate = learning_rate;
        c.momentum = momentum;
        c.batch_size = batch_size;
        py::gil_scoped_release release;
        return Train(c, train, seed);
      },
      py::arg("architecture"), py::arg("train"), py::arg("seed") = 0, py::arg("epochs") = 20,
      py::arg("learning_rate") = 0.001, py::arg("momentum") = 0.9, py::arg("batch_size") = 1);

  m.def("methods", [] {
    std::vector<std::string> out;
    for (MethodId id : AllMethods()) out.emplace_back(MethodName(id));
    return out;
  });
  m.def(
      "explain",
      [](const Model& model, const FloatArray& x, int class_index, const std::string& method, std::uint64_t seed,
         int steps, int samples, double noise_level, double epsilon) {
        return ToArray(
            Explain(model, ToTensor(x), class_index, MethodCfg(method, steps, samples, noise_level, epsilon), seed)
                .values);
      },
      py::arg("model"), py::arg("x"), py::arg("class_index"), py::arg("method") = "Gradient", py::arg("seed") = 0,
      py::arg("steps") = 0, py::arg("samples") = 0, py::arg("noise_level") = -1.0, py::arg("epsilon") = 0.0,
      "Attribution for one input; zero/negative hyperparameters keep the method default.");
  m.def("normalise", [](const FloatArray& e) { return ToArray(NormaliseSecondMoment(ToTensor(e))); });

  m.def("ssim", [](const FloatArray& a, const FloatArray& b) { return Ssim(ToTensor(a), ToTensor(b)); });
  m.def("spearman", [](const FloatArray& a, const FloatArray& b) {
    return Spearman(ToTensor(a).values(), ToTensor(b).values());
  });
  m.def("pearson", [](const FloatArray& a, const FloatArray& b) {
    return Pearson(ToTensor(a).values(), ToTensor(b).values());
  });
  m.def(
      "histogram_entropy",
      [](const FloatArray& values, int bins) {
        HistogramOptions o;
        o.bins = bins;
        return HistogramEntropy(ToTensor(values).values(), o);
      },
      py::arg("values"), py::arg("bins") = 100);
  m.def("model_output_entropy", [](const FloatArray& p) { return ModelOutputEntropy(ToTensor(p).values()); });
  m.def("emprt_score", &EmprtScore);
  m.def("wilcoxon_p", [](const std::vector<double>& x, const std::vector<double>& y) {
    return WilcoxonSignedRankP(x, y);
  });

  m.def(
      "stage_accuracy",
      [](const Model& model, const Dataset& d, const std::string& order, const std::string& reinit,
         std::uint64_t seed) {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& a : AccuracyUnderRandomisation(RandomiseLayers(model, Plan(order, reinit, seed)), d))
          out.emplace_back(a.stage_label, a.accuracy);
        return out;
      },
      py::arg("model"), py::arg("dataset"), py::arg("order") = "BottomUp", py::arg("reinit") = "ScaledNormal",
      py::arg("seed") = 0);
  m.def(
      "run_mprt",
      [](const Model& model, const Dataset& d, const std::string& method, const std::string& order,
         const std::string& similarity, std::uint64_t seed, int threads) {
        MprtOptions o;
        o.similarity = ParseOrThrow<SimilarityFn>(similarity, ParseSimilarity, "similarity");
        o.seed = seed;
        o.threads = threads;
        py::gil_scoped_release release;
        return RunMprt(model, d, MethodConfig::Default(Method(method)), Plan(order, "ScaledNormal", seed), o);
      },
      py::arg("model"), py::arg("dataset"), py::arg("method") = "Gradient", py::arg("order") = "BottomUp",
      py::arg("similarity") = "SSIM", py::arg("seed") = 0, py::arg("threads") = 1);
  m.def(
      "run_smprt",
      [](const Model& model, const Dataset& d, const std::string& method, int num_samples, double noise_level,
         const std::string& order, std::uint64_t seed, int threads) {
        MprtOptions o;
        o.seed = seed;
        o.threads = threads;
        SmprtOptions s{num_samples, noise_level};
        py::gil_scoped_release release;
        return RunSmprt(model, d, MethodConfig::Default(Method(method)), Plan(order, "ScaledNormal", seed), o, s);
      },
      py::arg("model"), py::arg("dataset"), py::arg("method") = "Gradient", py::arg("num_samples") = 50,
      py::arg("noise_level") = 0.2, py::arg("order") = "BottomUp", py::arg("seed") = 0, py::arg("threads") = 1);
  py::class_<MprtResult>(m, "MprtResult").def("to_dict", &CurveDict);
  m.def(
      "run_emprt",
      [](const Model& model, const Dataset& d, const std::string& method, int bins, std::uint64_t seed,
         int threads) {
        EmprtOptions o;
        o.histogram.bins = bins;
        o.seed = seed;
        o.threads = threads;
        EmprtResult r;
        {
          py::gil_scoped_release release;
          r = RunEmprt(model, d, MethodConfig::Default(Method(method)), Plan("FullOnly", "ScaledNormal", seed), o);
        }
        py::dict out;
        std::vector<double> scores;
        for (const auto& e : r.estimates) scores.push_back(e.value);
        out["scores"] = scores;
        out["aggregate"] = r.aggregate;
        out["degenerate"] = r.degenerate;
        out["failures"] = r.failures.size();
        return out;
      },
      py::arg("model"), py::arg("dataset"), py::arg("method") = "Gradient", py::arg("bins") = 100,
      py::arg("seed") = 0, py::arg("threads") = 1);

  m.def("config_hash", [](const std::string& json_text) { return ConfigHash(ParseConfig(json_text)); });
  m.def("canonical_config", [](const std::string& json_text) { return CanonicalConfigJson(ParseConfig(json_text)); });
  m.def("default_config", [] { return CanonicalConfigJson(ExperimentConfig::Default()); });
  m.def("commands", &CommandNames);
  m.def(
      "run_experiment",
      [](const std::string& json_text, const std::string& command, const std::string& out_dir) {
        ExperimentConfig c = json_text.empty() ? ExperimentConfig::Default() : ParseConfig(json_text);
        if (!out_dir.empty()) c.output_dir = out_dir;
        Experiment e(c);
        bool ok;
        {
          py::gil_scoped_release release;
          ok = e.Run(command);
        }
        py::list failed;
        for (const auto& [cmd, cells] : e.cells())
          for (const auto& cell : cells)
            if (!cell.ok) failed.append(py::make_tuple(cmd, cell.cell, cell.error_class, cell.message));
        return py::make_tuple(ok, failed);
      },
      py::arg("config_json"), py::arg("command"), py::arg("out_dir") = "",
      "Runs one subcommand; returns (all_cells_ok, [(command, cell, error_class, message)]).");
}
