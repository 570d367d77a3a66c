#include "mprt/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "mprt/architectures.h"
#include "mprt/entropy.h"
#include "mprt/error.h"
#include "mprt/metaeval.h"
#include "mprt/model_io.h"
#include "mprt/parallel.h"
#include "mprt/rng.h"
#include "mprt/svg.h"
#include "mprt/table.h"
#include "mprt/train.h"

namespace mprt {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";

// Knobs the code fixes rather than the config; echoed into the manifest.
json FixedChoices() {
  return {
      {"complexity_log_base", "e"},
      {"model_entropy_log_base", "2"},
      {"gradcam_layer", "last Conv2D, nearest-neighbour upsampling"},
      {"gradient_shap_baseline", "zero tensor plus Gaussian noise at noise_level * (x_max - x_min)"},
      {"ssim", "7x7 Gaussian window, sigma 1.5, K1 0.01, K2 0.03, R joint value range; global window below 7x7"},
      {"smprt_noise", "std = noise_level * (x_max - x_min) per sample"},
      {"per_sample_mprt_score", "final-stage similarity"},
      {"iac_nr", "mean over (method, k) of the Wilcoxon signed-rank p between unperturbed and Minor scores"},
      {"iac_ar", "mean over (method, k) of 1 - p under Disruptive perturbation"},
      {"iec_nr", "per sample fraction of method pairs whose order survives Minor perturbation, mean over samples and k"},
      {"iec_ar", "fraction of (method, k) cells whose Disruptive mean score is strictly worse than unperturbed"},
  };
}

std::string MetricLower(MetricId m) {
  switch (m) {
    case MetricId::kMprt: return "mprt";
    case MetricId::kSmprt: return "smprt";
    case MetricId::kEmprt: return "emprt";
  }
  return "";
}

json VectorJson(const MetaEvalVector& v) {
  return {{"iac_nr", v.iac_nr}, {"iac_ar", v.iac_ar}, {"iec_nr", v.iec_nr}, {"iec_ar", v.iec_ar}, {"mc", v.mc()}};
}

void Count(CellStatus& status, const std::vector<SampleFailure>& failures) {
  for (const auto& f : failures) ++status.sample_failures[std::string(ErrorCodeName(f.code))];
}

std::string TrainHash(const ExperimentConfig& c, const TrainConfig& t, std::uint64_t data_seed,
                      std::uint64_t train_seed) {
  const auto& s = c.dataset.synthetic;
  const json j = {{"dataset",
                   {c.dataset.source, s.classes, s.image_size, s.train_samples, s.test_samples, s.noise, s.max_shift,
                    c.dataset.train_images, c.dataset.train_labels, c.dataset.test_images, c.dataset.test_labels}},
                  {"data_seed", data_seed},
                  {"train_seed", train_seed},
                  {"model",
                   {std::string(ArchitectureName(t.architecture)), t.epochs, t.learning_rate, t.momentum,
                    t.batch_size}}};
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(Fnv1a64(j.dump())));
  return buf;
}

}  // namespace

const std::vector<std::string>& CommandNames() {
  static const std::vector<std::string> kNames = {"gen-data", "train",     "explain",  "mprt",
                                                  "smprt",    "emprt",     "layer-order", "bin-change",
                                                  "metaeval", "plot",      "all"};
  return kNames;
}

Experiment::Experiment(ExperimentConfig config)
    : config_(std::move(config)), hash_(ConfigHash(config_)), seeds_(config_.Seeds()) {
  config_.Validate();
  models_.resize(config_.models.size());
}

Experiment::~Experiment() = default;

std::string Experiment::Path(const std::string& relative) const {
  return (fs::path(config_.output_dir) / relative).string();
}

std::string Experiment::ModelLabel(std::size_t index) const {
  const Architecture arch = config_.models.at(index).architecture;
  std::size_t same = 0;
  for (const auto& m : config_.models) same += m.architecture == arch;
  std::string label(ArchitectureName(arch));
  return same > 1 ? label + "_" + std::to_string(index) : label;
}

bool Experiment::RunCell(const std::string& cell, const std::function<void(CellStatus&)>& body) {
  CellStatus status;
  status.cell = cell;
  try {
    body(status);
  } catch (const Error& e) {
    status.ok = false;
    status.error_class = std::string(e.code_name());
    status.message = e.what();
  } catch (const std::exception& e) {
    status.ok = false;
    status.error_class = "Internal";
    status.message = e.what();
  }
  cells_[current_].push_back(status);
  return status.ok;
}

const DatasetSplits& Experiment::Data() {
  if (!data_) {
    const DatasetConfig& d = config_.dataset;
    if (d.source == "idx") {
      DatasetSplits s;
      s.train = ReadIdx(d.train_images, d.train_labels);
      s.test = ReadIdx(d.test_images, d.test_labels, s.train.num_classes);
      s.train.split = "train";
      s.test.split = "test";
      data_ = std::move(s);
    } else {
      data_ = GenerateSynthetic(d.synthetic, seeds_.data);
    }
  }
  return *data_;
}

Dataset Experiment::EvalSet(std::size_t n) { return Data().test.Head(n); }

const Model* Experiment::GetModel(std::size_t index) {
  auto& slot = models_.at(index);
  if (slot) return slot->get();
  const std::string label = ModelLabel(index);
  RunCell("train/" + label, [&](CellStatus&) {
    slot = nullptr;
    const TrainConfig& t = config_.models[index];
    const std::string prefix = Path("models/" + label);
    const std::string train_hash = TrainHash(config_, t, seeds_.data, seeds_.train);
    if (fs::exists(prefix + ".manifest") && fs::exists(prefix + ".weights")) {
      try {
        Model cached = LoadModel(prefix);
        auto it = cached.metadata().find("train_hash");
        if (it != cached.metadata().end() && it->second == train_hash) {
          slot = std::make_unique<Model>(std::move(cached));
          return;
        }
      } catch (const Error&) {
        // Unreadable cache: retrain.
      }
    }
    const DatasetSplits& data = Data();
    Model model = Train(t, data.train, seeds_.train, &data.test);
    model.mutable_metadata()["architecture"] = std::string(ArchitectureName(t.architecture));
    model.mutable_metadata()["train_hash"] = train_hash;
    model.mutable_metadata()["data_seed"] = std::to_string(seeds_.data);
    fs::create_directories(Path("models"));
    SaveModel(model, prefix);
    slot = std::make_unique<Model>(std::move(model));
  });
  return slot->get();
}

RandomisationPlan Experiment::Plan(RandomisationOrder order) const {
  RandomisationPlan plan;
  plan.order = order;
  plan.cumulative = config_.cumulative;
  plan.reinit = config_.reinit;
  plan.seed = seeds_.randomisation;
  return plan;
}

MprtOptions Experiment::MprtOpts() const {
  MprtOptions o = config_.mprt;
  o.seed = seeds_.explain;
  o.threads = config_.threads;
  return o;
}

std::vector<MethodId> Experiment::SmprtMethods() const {
  return config_.smprt.methods.empty() ? config_.methods : config_.smprt.methods;
}

const std::vector<ModelState>& Experiment::States(std::size_t model, RandomisationOrder order) {
  const auto key = std::make_pair(model, order);
  auto it = states_.find(key);
  if (it != states_.end()) return it->second;
  const Model* m = GetModel(model);
  Require(m != nullptr, ErrorCode::kInvalidArgument, "model " + ModelLabel(model) + " unavailable");
  return states_.emplace(key, RandomiseLayers(*m, Plan(order))).first->second;
}

const MprtResult& Experiment::MprtFor(const MprtKey& key, CellStatus& status) {
  auto it = mprt_cache_.find(key);
  if (it == mprt_cache_.end()) {
    const auto& states = States(key.model, key.order);
    const Dataset eval = EvalSet(key.smooth ? config_.smprt.samples : config_.eval_samples);
    const MethodConfig explainer = config_.method_params.For(key.method);
    SmprtOptions smooth;
    smooth.num_samples = config_.smprt.num_samples;
    smooth.noise_level = config_.smprt.noise_level;
    MprtResult r = key.smooth ? RunSmprt(states, Plan(key.order), eval, explainer, MprtOpts(), smooth)
                              : RunMprt(states, Plan(key.order), eval, explainer, MprtOpts());
    it = mprt_cache_.emplace(key, std::move(r)).first;
  }
  Count(status, it->second.failures);
  return it->second;
}

bool Experiment::GenData() {
  return RunCell("gen-data", [&](CellStatus&) {
    const DatasetSplits& data = Data();
    fs::create_directories(Path("data"));
    WriteIdx(data.train, Path("data/train-images.idx"), Path("data/train-labels.idx"));
    WriteIdx(data.test, Path("data/test-images.idx"), Path("data/test-labels.idx"));
    RunTable t(hash_, seeds_.data, {"split", "samples", "classes", "shape", "class", "count"});
    for (const Dataset* d : {&data.train, &data.test}) {
      std::vector<std::size_t> counts(d->num_classes, 0);
      for (int y : d->labels) ++counts[y];
      const std::string shape = d->empty() ? "" : ShapeString(d->inputs.front().shape());
      for (int c = 0; c < d->num_classes; ++c)
        t.Add({d->split, Cell(d->size()), Cell(d->num_classes), shape, Cell(c), Cell(counts[c])});
    }
    t.Write(Path("data/dataset.csv"));
  });
}

bool Experiment::TrainModels() {
  RunTable t(hash_, seeds_.train,
             {"model", "architecture", "epochs", "learning_rate", "momentum", "batch_size", "parameters",
              "train_accuracy", "test_accuracy", "train_hash"});
  bool ok = true;
  for (std::size_t i = 0; i < config_.models.size(); ++i) {
    const Model* m = GetModel(i);
    if (!m) {
      ok = false;
      continue;
    }
    const TrainConfig& c = config_.models[i];
    auto meta = [&](const std::string& k) {
      auto it = m->metadata().find(k);
      return it == m->metadata().end() ? std::string() : it->second;
    };
    t.Add({ModelLabel(i), std::string(ArchitectureName(c.architecture)), Cell(c.epochs), Cell(c.learning_rate),
           Cell(c.momentum), Cell(c.batch_size), Cell(m->ParameterCount()),
           Cell(ParseNumber(meta("train_accuracy"))), Cell(ParseNumber(meta("test_accuracy"))),
           meta("train_hash")});
  }
  ok &= RunCell("train/table", [&](CellStatus&) { t.Write(Path("train.csv")); });
  return ok;
}

bool Experiment::ExplainAll() {
  RunTable summary(hash_, seeds_.explain,
                   {"model", "method", "sample_id", "class", "min", "max", "mean", "entropy"});
  bool ok = true;
  const Dataset eval = EvalSet(config_.eval_samples);
  for (std::size_t mi = 0; mi < config_.models.size(); ++mi) {
    for (MethodId method : config_.methods) {
      const std::string name = ModelLabel(mi) + "_" + std::string(MethodName(method));
      ok &= RunCell("explain/" + ModelLabel(mi) + "/" + std::string(MethodName(method)), [&](CellStatus& status) {
        const Model* m = GetModel(mi);
        Require(m != nullptr, ErrorCode::kInvalidArgument, "model " + ModelLabel(mi) + " unavailable");
        const MethodConfig cfg = config_.method_params.For(method);
        std::vector<std::optional<Attribution>> out(eval.size());
        std::vector<std::optional<Error>> errors(eval.size());
        ParallelFor(eval.size(), config_.threads, [&](std::size_t i) {
          try {
            out[i] = Explain(*m, eval.inputs[i], eval.labels[i], cfg,
                             DeriveSeed(seeds_.explain, {mi, std::uint64_t(method), i}));
          } catch (const Error& e) {
            errors[i] = e;
          }
        });
        std::string blob = "MPRTATTR 1\nconfig_hash " + hash_ + "\nseed " + std::to_string(seeds_.explain) +
                           "\nmethod " + std::string(MethodName(method)) + "\nsamples " +
                           std::to_string(eval.size()) + "\nshape " + ShapeString(m->input_shape()) + "\n";
        for (std::size_t i = 0; i < eval.size(); ++i) {
          if (errors[i]) {
            ++status.sample_failures[std::string(errors[i]->code_name())];
            Tensor nan_fill(m->input_shape(), std::nanf(""));
            blob.append(reinterpret_cast<const char*>(nan_fill.data()), nan_fill.size() * sizeof(float));
            continue;
          }
          const Tensor& v = out[i]->values;
          blob.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
          double sum = 0.0;
          for (float x : v.values()) sum += x;
          summary.Add({ModelLabel(mi), std::string(MethodName(method)), Cell(i), Cell(eval.labels[i]),
                       Cell(double(v.Min())), Cell(double(v.Max())), Cell(sum / double(v.size())),
                       Cell(HistogramEntropy(v.values(), config_.emprt.histogram))});
        }
        WriteTextFile(Path("attributions/" + name + ".bin"), blob);
      });
    }
  }
  ok &= RunCell("explain/summary", [&](CellStatus&) { summary.Write(Path("attributions/summary.csv")); });
  return ok;
}

bool Experiment::Mprt(bool smooth) {
  const MetricId metric = smooth ? MetricId::kSmprt : MetricId::kMprt;
  const std::string metric_name(MetricName(metric));
  const std::string dir = MetricLower(metric) + "/";
  const std::vector<MethodId> methods = smooth ? SmprtMethods() : config_.methods;
  RunTable curves(hash_, seeds_.explain, {"metric", "model", "order", "method", "stage_label", "mean", "std", "n"});
  RunTable scores(hash_, seeds_.explain, {"metric", "model", "order", "method", "sample_id", "q_hat"});
  RunTable aucs(hash_, seeds_.explain, {"metric", "model", "order", "method", "auc", "orientation"});
  RunTable ranking(hash_, seeds_.explain, {"metric", "model", "order", "method", "score", "rank", "tied"});
  RunTable accuracy(hash_, seeds_.randomisation, {"model", "order", "stage_label", "accuracy", "n_samples"});
  bool ok = true;
  for (std::size_t mi = 0; mi < config_.models.size(); ++mi) {
    const std::string model = ModelLabel(mi);
    for (RandomisationOrder order : config_.orders) {
      const std::string order_name(OrderName(order));
      ok &= RunCell(MetricLower(metric) + "/" + model + "/" + order_name + "/accuracy", [&](CellStatus&) {
        for (const auto& a : AccuracyUnderRandomisation(States(mi, order), Data().test))
          accuracy.Add({model, order_name, a.stage_label, Cell(a.accuracy), Cell(a.n_samples)});
      });
      std::vector<std::pair<MethodId, double>> finals;
      for (MethodId method : methods) {
        const std::string method_name(MethodName(method));
        ok &= RunCell(MetricLower(metric) + "/" + model + "/" + order_name + "/" + method_name,
                      [&](CellStatus& status) {
                        const MprtResult& r = MprtFor({mi, order, method, smooth}, status);
                        for (const auto& s : r.curve.stages)
                          curves.Add({metric_name, model, order_name, method_name, s.stage_label, Cell(s.mean),
                                      Cell(s.std), Cell(s.n)});
                        for (const auto& e : r.estimates)
                          scores.Add({metric_name, model, order_name, method_name, Cell(e.sample_id),
                                      Cell(e.value)});
                        aucs.Add({metric_name, model, order_name, method_name, Cell(CurveAuc(r.curve)),
                                  std::string(kAucOrientation)});
                        if (!r.estimates.empty()) finals.emplace_back(method, MeanEstimate(r.estimates));
                      });
      }
      if (!finals.empty())
        for (const auto& r : RankMethods(finals, metric))
          ranking.Add({metric_name, model, order_name, std::string(MethodName(r.method)), Cell(r.score),
                       Cell(r.rank), r.tied ? "1" : "0"});
    }
  }
  ok &= RunCell(MetricLower(metric) + "/tables", [&](CellStatus&) {
    curves.Write(Path(dir + "curves.csv"));
    scores.Write(Path(dir + "scores.csv"));
    aucs.Write(Path(dir + "auc.csv"));
    ranking.Write(Path(dir + "ranking.csv"));
    accuracy.Write(Path(dir + "accuracy.csv"));
  });
  if (smooth) ok &= SmprtConvergence();
  return ok;
}

bool Experiment::SmprtConvergence() {
  const SmprtConfig& sc = config_.smprt;
  if (sc.convergence_n.empty()) return true;
  RunTable t(hash_, seeds_.explain, {"model", "method", "num_samples", "noise_level", "auc", "final_mean", "n"});
  bool ok = true;
  for (std::size_t mi = 0; mi < config_.models.size(); ++mi) {
    for (int n : sc.convergence_n) {
      ok &= RunCell("smprt/convergence/" + ModelLabel(mi) + "/" + std::to_string(n), [&](CellStatus& status) {
        SmprtOptions smooth;
        smooth.num_samples = n;
        smooth.noise_level = sc.noise_level;
        const RandomisationOrder order = RandomisationOrder::kBottomUp;
        const MprtResult r = RunSmprt(States(mi, order), Plan(order), EvalSet(sc.convergence_samples),
                                      config_.method_params.For(sc.convergence_method), MprtOpts(), smooth);
        Count(status, r.failures);
        t.Add({ModelLabel(mi), std::string(MethodName(sc.convergence_method)), Cell(n), Cell(sc.noise_level),
               Cell(CurveAuc(r.curve)), Cell(r.curve.stages.back().mean), Cell(r.curve.stages.back().n)});
      });
    }
  }
  ok &= RunCell("smprt/convergence/table", [&](CellStatus&) { t.Write(Path("smprt/convergence.csv")); });
  return ok;
}

bool Experiment::Emprt() {
  RunTable scores(hash_, seeds_.explain, {"metric", "model", "method", "sample_id", "q_hat"});
  RunTable summary(hash_, seeds_.explain,
                   {"metric", "model", "method", "aggregation", "q_hat", "n", "degenerate", "failed"});
  RunTable curves(hash_, seeds_.explain,
                  {"metric", "model", "method", "stage_label", "complexity_mean", "complexity_std", "n",
                   "model_entropy_bits", "ceiling"});
  RunTable ranking(hash_, seeds_.explain, {"metric", "model", "order", "method", "score", "rank", "tied"});
  const std::string metric_name(MetricName(MetricId::kEmprt));
  bool ok = true;
  const Dataset eval = EvalSet(config_.eval_samples);
  EmprtOptions opts;
  opts.histogram = config_.emprt.histogram;
  opts.curve = config_.emprt.curve;
  opts.aggregation = config_.emprt.aggregation;
  opts.redraw_random_baseline = config_.mprt.redraw_random_baseline;
  opts.seed = seeds_.explain;
  opts.threads = config_.threads;
  const double ceiling = std::log(double(opts.histogram.bins));
  for (std::size_t mi = 0; mi < config_.models.size(); ++mi) {
    const std::string model = ModelLabel(mi);
    std::vector<std::pair<MethodId, double>> aggregates;
    for (MethodId method : config_.methods) {
      const std::string method_name(MethodName(method));
      ok &= RunCell("emprt/" + model + "/" + method_name, [&](CellStatus& status) {
        const RandomisationOrder order = opts.curve ? RandomisationOrder::kBottomUp : RandomisationOrder::kFullOnly;
        const EmprtResult r =
            RunEmprt(States(mi, order), Plan(order), eval, config_.method_params.For(method), opts);
        Count(status, r.failures);
        status.degenerate = r.degenerate;
        for (const auto& e : r.estimates)
          scores.Add({metric_name, model, method_name, Cell(e.sample_id), Cell(e.value)});
        summary.Add({metric_name, model, method_name, std::string(AggregationName(opts.aggregation)),
                     Cell(r.aggregate), Cell(r.estimates.size()), Cell(r.degenerate),
                     Cell(eval.size() - r.estimates.size())});
        if (r.complexity_curve)
          for (std::size_t s = 0; s < r.complexity_curve->stages.size(); ++s) {
            const StageScore& c = r.complexity_curve->stages[s];
            const double h = s < r.model_entropy.size() ? r.model_entropy[s].mean : NAN;
            curves.Add({metric_name, model, method_name, c.stage_label, Cell(c.mean), Cell(c.std), Cell(c.n),
                        Cell(h), Cell(ceiling)});
          }
        if (!r.estimates.empty()) aggregates.emplace_back(method, r.aggregate);
      });
    }
    if (!aggregates.empty())
      for (const auto& r : RankMethods(aggregates, MetricId::kEmprt))
        ranking.Add({metric_name, model, "FullOnly", std::string(MethodName(r.method)), Cell(r.score),
                     Cell(r.rank), r.tied ? "1" : "0"});
  }
  ok &= RunCell("emprt/tables", [&](CellStatus&) {
    scores.Write(Path("emprt/scores.csv"));
    summary.Write(Path("emprt/summary.csv"));
    ranking.Write(Path("emprt/ranking.csv"));
    if (opts.curve)
      curves.Write(Path("emprt/curves.csv"));
    else if (fs::exists(Path("emprt/curves.csv")))
      fs::remove(Path("emprt/curves.csv"));
  });
  return ok;
}

bool Experiment::LayerOrder() {
  RunTable comparison(hash_, seeds_.explain,
                      {"model", "method", "similarity", "bottom_up_final", "top_down_final", "bottom_up_auc",
                       "top_down_auc", "final_difference", "n"});
  RunTable curves(hash_, seeds_.explain, {"model", "order", "method", "stage", "stage_label", "mean", "std", "n"});
  RunTable accuracy(hash_, seeds_.randomisation, {"model", "order", "stage", "stage_label", "accuracy", "n_samples"});
  const std::string sim(SimilarityName(config_.mprt.similarity));
  bool ok = true;
  const RandomisationOrder both[] = {RandomisationOrder::kBottomUp, RandomisationOrder::kTopDown};
  for (std::size_t mi = 0; mi < config_.models.size(); ++mi) {
    const std::string model = ModelLabel(mi);
    for (RandomisationOrder order : both)
      ok &= RunCell("layer-order/" + model + "/" + std::string(OrderName(order)) + "/accuracy", [&](CellStatus&) {
        const auto acc = AccuracyUnderRandomisation(States(mi, order), Data().test);
        for (std::size_t s = 0; s < acc.size(); ++s)
          accuracy.Add({model, std::string(OrderName(order)), Cell(s), acc[s].stage_label, Cell(acc[s].accuracy),
                        Cell(acc[s].n_samples)});
      });
    for (MethodId method : config_.methods) {
      const std::string method_name(MethodName(method));
      ok &= RunCell("layer-order/" + model + "/" + method_name, [&](CellStatus& status) {
        const MprtResult& bu = MprtFor({mi, RandomisationOrder::kBottomUp, method, false}, status);
        const MprtResult& td = MprtFor({mi, RandomisationOrder::kTopDown, method, false}, status);
        for (const MprtResult* r : {&bu, &td})
          for (std::size_t s = 0; s < r->curve.stages.size(); ++s) {
            const StageScore& st = r->curve.stages[s];
            curves.Add({model, std::string(OrderName(r->curve.plan.order)), method_name, Cell(s), st.stage_label,
                        Cell(st.mean), Cell(st.std), Cell(st.n)});
          }
        const double bf = MeanEstimate(bu.estimates), tf = MeanEstimate(td.estimates);
        comparison.Add({model, method_name, sim, Cell(bf), Cell(tf), Cell(CurveAuc(bu.curve)),
                        Cell(CurveAuc(td.curve)), Cell(bf - tf),
                        Cell(std::min(bu.estimates.size(), td.estimates.size()))});
      });
    }
  }
  ok &= RunCell("layer-order/tables", [&](CellStatus&) {
    comparison.Write(Path("layer_order/comparison.csv"));
    curves.Write(Path("layer_order/curves.csv"));
    accuracy.Write(Path("layer_order/accuracy.csv"));
  });
  return ok;
}

bool Experiment::BinChange() {
  RunTable rows(hash_, seeds_.randomisation,
                {"model", "layer_index", "layer_name", "order", "bin", "lower", "upper", "count", "mean_abs_change"});
  RunTable summary(hash_, seeds_.randomisation,
                   {"model", "layer_index", "layer_name", "order", "max_abs", "overall_mean_change"});
  const BinChangeConfig& bc = config_.bin_change;
  bool ok = true;
  for (std::size_t mi = 0; mi < config_.models.size(); ++mi) {
    const std::string model = ModelLabel(mi);
    const Model* m = GetModel(mi);
    if (!m) {
      ok &= RunCell("bin-change/" + model, [&](CellStatus&) {
        Fail(ErrorCode::kInvalidArgument, "model " + model + " unavailable");
      });
      continue;
    }
    std::vector<int> layers = bc.layers;
    if (layers.empty())
      for (std::size_t pos : m->ParameterisedPositions()) layers.push_back(Model::IndexOf(pos));
    const Dataset eval = EvalSet(bc.samples);
    for (int layer : layers) {
      for (RandomisationOrder order : {RandomisationOrder::kBottomUp, RandomisationOrder::kTopDown}) {
        const std::string order_name(OrderName(order));
        ok &= RunCell("bin-change/" + model + "/" + std::to_string(layer) + "/" + order_name, [&](CellStatus&) {
          const BinChangeTable t =
              BinChangeAnalysis(*m, layer, config_.method_params.For(bc.method), eval, Plan(order), bc.bins);
          const std::string name = m->LayerName(std::size_t(layer - 1));
          for (const auto& r : t.rows)
            rows.Add({model, Cell(layer), name, order_name, Cell(r.bin), Cell(r.lower), Cell(r.upper),
                      Cell(r.count), r.mean_abs_change ? Cell(*r.mean_abs_change) : std::string()});
          summary.Add({model, Cell(layer), name, order_name, Cell(t.max_abs), Cell(t.overall_mean_change)});
        });
      }
    }
  }
  ok &= RunCell("bin-change/tables", [&](CellStatus&) {
    rows.Write(Path("bin_change/bins.csv"));
    summary.Write(Path("bin_change/summary.csv"));
  });
  return ok;
}

bool Experiment::MetaEval() {
  const MetaEvalSettings& me = config_.metaeval;
  MetaEvalConfig pc = me.perturbation;
  pc.seed = seeds_.metaeval;
  RunTable csv(hash_, seeds_.metaeval,
               {"model", "method_set", "metric", "test", "iac_nr", "iac_ar", "iec_nr", "iec_ar", "mc", "mc_mean",
                "mc_std", "flags"});
  json reports = json::array();
  const json echo = {
      {"k", pc.k},
      {"iterations", pc.iterations},
      {"samples", me.samples},
      {"input_minor", {{"alpha", pc.input_minor.alpha}, {"beta", pc.input_minor.beta}}},
      {"input_disruptive", {{"alpha", pc.input_disruptive.alpha}, {"beta", pc.input_disruptive.beta}}},
      {"model_minor", {{"mu", pc.model_minor.mu}, {"sigma", pc.model_minor.sigma}}},
      {"model_disruptive", {{"mu", pc.model_disruptive.mu}, {"sigma", pc.model_disruptive.sigma}}},
      {"minor_accuracy_tolerance", pc.minor_accuracy_tolerance},
      {"disruptive_accuracy_margin", pc.disruptive_accuracy_margin},
      {"definitions", FixedChoices()},
  };
  bool ok = true;
  const Dataset eval = EvalSet(me.samples);
  MprtOptions mo = MprtOpts();
  mo.threads = 1;
  SmprtOptions so;
  so.num_samples = config_.smprt.num_samples;
  so.noise_level = config_.smprt.noise_level;
  EmprtOptions eo;
  eo.histogram = config_.emprt.histogram;
  eo.aggregation = config_.emprt.aggregation;
  eo.redraw_random_baseline = config_.mprt.redraw_random_baseline;
  std::vector<std::unique_ptr<QualityEstimator>> owned;
  for (MetricId metric : me.metrics) {
    if (metric == MetricId::kMprt) owned.push_back(MakeMprtEstimator(config_.reinit, mo));
    if (metric == MetricId::kSmprt) owned.push_back(MakeSmprtEstimator(config_.reinit, mo, so));
    if (metric == MetricId::kEmprt) owned.push_back(MakeEmprtEstimator(config_.reinit, eo));
  }
  std::vector<const QualityEstimator*> estimators;
  for (const auto& e : owned) estimators.push_back(e.get());
  for (std::size_t mi = 0; mi < config_.models.size(); ++mi) {
    const std::string model = ModelLabel(mi);
    for (const auto& [set_name, methods] : me.method_sets) {
      ok &= RunCell("metaeval/" + model + "/" + set_name, [&](CellStatus& status) {
        const Model* m = GetModel(mi);
        Require(m != nullptr, ErrorCode::kInvalidArgument, "model " + model + " unavailable");
        std::vector<MethodConfig> cfgs;
        for (MethodId id : methods) cfgs.push_back(config_.method_params.For(id));
        const MetaEvalReport report = MetaEvaluate(estimators, cfgs, set_name, *m, eval, pc, config_.threads);
        for (const auto& s : report.scores) {
          std::string flags;
          for (const auto& f : s.flags) flags += (flags.empty() ? "" : ";") + f;
          if (!s.flags.empty()) ++status.sample_failures["flagged"];
          for (const auto& [test, v] : {std::pair{"IPT", s.ipt}, std::pair{"MPT", s.mpt}})
            csv.Add({model, set_name, s.metric, test, Cell(v.iac_nr), Cell(v.iac_ar), Cell(v.iec_nr),
                     Cell(v.iec_ar), Cell(v.mc()), Cell(s.value), Cell(s.std), flags});
          json iterations = json::array();
          for (const auto& it : s.iterations)
            iterations.push_back({{"IPT", VectorJson(it.ipt)}, {"MPT", VectorJson(it.mpt)}, {"mc", it.mc()}});
          json method_names = json::array();
          for (MethodId id : methods) method_names.push_back(std::string(MethodName(id)));
          reports.push_back({{"config_hash", hash_},
                             {"seed", seeds_.metaeval},
                             {"model", model},
                             {"metric", s.metric},
                             {"method_set", s.method_set},
                             {"methods", method_names},
                             {"per_test", {{"IPT", VectorJson(s.ipt)}, {"MPT", VectorJson(s.mpt)}}},
                             {"mc_mean", s.value},
                             {"mc_std", s.std},
                             {"iterations", iterations},
                             {"flags", s.flags},
                             {"accuracy",
                              {{"original", report.accuracy_original},
                               {"minor", report.accuracy_minor},
                               {"disruptive", report.accuracy_disruptive}}},
                             {"warnings", report.warnings},
                             {"config_echo", echo}});
        }
      });
    }
  }
  ok &= RunCell("metaeval/tables", [&](CellStatus&) {
    csv.Write(Path("metaeval/metaeval.csv"));
    WriteTextFile(Path("metaeval/metaeval.json"), reports.dump(2) + "\n");
  });
  return ok;
}

namespace {

struct Figure {
  std::string command;  // The subcommand that refreshes this figure.
  std::string name;
  std::string csv;  // Relative input table; the figure is skipped when absent.
  std::function<std::vector<std::pair<std::string, std::string>>(const Table&)> render;
};

// Distinct values of a column in first-seen order.
std::vector<std::string> Distinct(const Table& t, const std::string& column,
                                  const std::function<bool(std::size_t)>& keep = nullptr) {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (keep && !keep(r)) continue;
    const std::string& v = t.At(r, column);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

// One line per method over stage labels, one figure per (model, order).
std::vector<std::pair<std::string, std::string>> CurveFigures(const Table& t, const std::string& prefix,
                                                              const std::string& y_label) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& model : Distinct(t, "model")) {
    for (const std::string& order : Distinct(t, "order")) {
      auto in = [&](std::size_t r) { return t.At(r, "model") == model && t.At(r, "order") == order; };
      LinePlot plot;
      plot.title = t.At(0, "metric") + " " + model + " " + order;
      plot.y_label = y_label;
      plot.x_labels = Distinct(t, "stage_label", in);
      if (plot.x_labels.empty()) continue;
      for (const std::string& method : Distinct(t, "method", in)) {
        Series s{method, std::vector<double>(plot.x_labels.size(), NAN), false};
        for (std::size_t r = 0; r < t.size(); ++r) {
          if (!in(r) || t.At(r, "method") != method) continue;
          const auto it = std::find(plot.x_labels.begin(), plot.x_labels.end(), t.At(r, "stage_label"));
          s.y[std::size_t(it - plot.x_labels.begin())] = t.Number(r, "mean");
        }
        plot.series.push_back(std::move(s));
      }
      out.emplace_back(prefix + "_" + model + "_" + order + ".svg", RenderSvg(plot));
    }
  }
  return out;
}

std::vector<Figure> Figures() {
  std::vector<Figure> f;
  f.push_back({"mprt", "mprt_curves", "mprt/curves.csv",
               [](const Table& t) { return CurveFigures(t, "mprt", "similarity to original explanation"); }});
  f.push_back({"smprt", "smprt_curves", "smprt/curves.csv",
               [](const Table& t) { return CurveFigures(t, "smprt", "similarity to original explanation"); }});
  f.push_back({"smprt", "smprt_convergence", "smprt/convergence.csv", [](const Table& t) {
                 LinePlot plot;
                 plot.title = "sMPRT AUC against number of noise samples";
                 plot.y_label = "AUC";
                 plot.x_labels = Distinct(t, "num_samples");
                 for (const std::string& model : Distinct(t, "model")) {
                   Series s{model, {}, false};
                   for (const std::string& n : plot.x_labels)
                     for (std::size_t r = 0; r < t.size(); ++r)
                       if (t.At(r, "model") == model && t.At(r, "num_samples") == n) s.y.push_back(t.Number(r, "auc"));
                   plot.series.push_back(std::move(s));
                 }
                 return std::vector<std::pair<std::string, std::string>>{{"smprt_convergence.svg", RenderSvg(plot)}};
               }});
  f.push_back({"emprt", "emprt_curves", "emprt/curves.csv", [](const Table& t) {
                 std::vector<std::pair<std::string, std::string>> out;
                 for (const std::string& model : Distinct(t, "model")) {
                   auto in = [&](std::size_t r) { return t.At(r, "model") == model; };
                   LinePlot plot;
                   plot.title = "eMPRT complexity " + model;
                   plot.y_label = "complexity (nats) / model entropy (bits)";
                   plot.x_labels = Distinct(t, "stage_label", in);
                   std::vector<double> entropy(plot.x_labels.size(), NAN);
                   double ceiling = NAN;
                   for (const std::string& method : Distinct(t, "method", in)) {
                     Series s{method, std::vector<double>(plot.x_labels.size(), NAN), false};
                     for (std::size_t r = 0; r < t.size(); ++r) {
                       if (!in(r) || t.At(r, "method") != method) continue;
                       const std::size_t i = std::size_t(
                           std::find(plot.x_labels.begin(), plot.x_labels.end(), t.At(r, "stage_label")) -
                           plot.x_labels.begin());
                       s.y[i] = t.Number(r, "complexity_mean");
                       entropy[i] = t.Number(r, "model_entropy_bits");
                       ceiling = t.Number(r, "ceiling");
                     }
                     plot.series.push_back(std::move(s));
                   }
                   plot.series.push_back({"model entropy (bits)", entropy, true});
                   plot.references.push_back({"ln B", ceiling});
                   out.emplace_back("emprt_" + model + ".svg", RenderSvg(plot));
                 }
                 return out;
               }});
  f.push_back({"emprt", "emprt_ranking", "emprt/ranking.csv", [](const Table& t) {
                 std::vector<std::pair<std::string, std::string>> out;
                 for (const std::string& model : Distinct(t, "model")) {
                   BarChart chart;
                   chart.title = "eMPRT ranking " + model + " (rank 1 best)";
                   chart.y_label = "q_hat";
                   Series s{"eMPRT", {}, false};
                   for (std::size_t r = 0; r < t.size(); ++r) {
                     if (t.At(r, "model") != model) continue;
                     chart.categories.push_back(t.At(r, "rank") + ". " + t.At(r, "method"));
                     s.y.push_back(t.Number(r, "score"));
                   }
                   chart.series.push_back(std::move(s));
                   out.emplace_back("ranking_emprt_" + model + ".svg", RenderSvg(chart));
                 }
                 return out;
               }});
  f.push_back({"mprt", "mprt_ranking", "mprt/ranking.csv", [](const Table& t) {
                 std::vector<std::pair<std::string, std::string>> out;
                 for (const std::string& model : Distinct(t, "model"))
                   for (const std::string& order : Distinct(t, "order")) {
                     BarChart chart;
                     chart.title = "MPRT ranking " + model + " " + order + " (rank 1 best)";
                     chart.y_label = "final-stage similarity";
                     Series s{"MPRT", {}, false};
                     for (std::size_t r = 0; r < t.size(); ++r) {
                       if (t.At(r, "model") != model || t.At(r, "order") != order) continue;
                       chart.categories.push_back(t.At(r, "rank") + ". " + t.At(r, "method"));
                       s.y.push_back(t.Number(r, "score"));
                     }
                     if (chart.categories.empty()) continue;
                     chart.series.push_back(std::move(s));
                     out.emplace_back("ranking_mprt_" + model + "_" + order + ".svg", RenderSvg(chart));
                   }
                 return out;
               }});
  f.push_back({"layer-order", "layer_order", "layer_order/comparison.csv", [](const Table& t) {
                 std::vector<std::pair<std::string, std::string>> out;
                 for (const std::string& model : Distinct(t, "model")) {
                   BarChart chart;
                   chart.title = "Final-stage similarity by order " + model;
                   chart.y_label = t.At(0, "similarity");
                   Series bu{"BottomUp", {}, false}, td{"TopDown", {}, false};
                   for (std::size_t r = 0; r < t.size(); ++r) {
                     if (t.At(r, "model") != model) continue;
                     chart.categories.push_back(t.At(r, "method"));
                     bu.y.push_back(t.Number(r, "bottom_up_final"));
                     td.y.push_back(t.Number(r, "top_down_final"));
                   }
                   chart.series = {bu, td};
                   out.emplace_back("layer_order_" + model + ".svg", RenderSvg(chart));
                 }
                 return out;
               }});
  f.push_back({"layer-order", "layer_order_accuracy", "layer_order/accuracy.csv", [](const Table& t) {
                 std::vector<std::pair<std::string, std::string>> out;
                 for (const std::string& model : Distinct(t, "model")) {
                   LinePlot plot;
                   plot.title = "Accuracy under randomisation " + model;
                   plot.y_label = "test accuracy";
                   plot.y_min = 0.0;
                   plot.y_max = 1.0;
                   for (const std::string& order : Distinct(t, "order")) {
                     Series s{order, {}, false};
                     for (std::size_t r = 0; r < t.size(); ++r)
                       if (t.At(r, "model") == model && t.At(r, "order") == order)
                         s.y.push_back(t.Number(r, "accuracy"));
                     if (plot.x_labels.size() < s.y.size()) {
                       plot.x_labels.clear();
                       for (std::size_t i = 0; i < s.y.size(); ++i)
                         plot.x_labels.push_back(i == 0 ? "orig" : "stage " + std::to_string(i));
                     }
                     plot.series.push_back(std::move(s));
                   }
                   out.emplace_back("accuracy_" + model + ".svg", RenderSvg(plot));
                 }
                 return out;
               }});
  f.push_back({"bin-change", "bin_change", "bin_change/bins.csv", [](const Table& t) {
                 std::vector<std::pair<std::string, std::string>> out;
                 for (const std::string& model : Distinct(t, "model"))
                   for (const std::string& layer : Distinct(t, "layer_index", [&](std::size_t r) {
                          return t.At(r, "model") == model;
                        })) {
                     auto in = [&](std::size_t r) { return t.At(r, "model") == model && t.At(r, "layer_index") == layer; };
                     LinePlot plot;
                     std::string layer_name;
                     for (std::size_t r = 0; r < t.size(); ++r)
                       if (in(r)) layer_name = t.At(r, "layer_name");
                     plot.title = "Explanation change by relevance bin " + model + " " + layer_name;
                     plot.y_label = "mean |change|";
                     for (const std::string& order : Distinct(t, "order", in)) {
                       Series s{order, {}, false};
                       std::vector<std::string> labels;
                       for (std::size_t r = 0; r < t.size(); ++r) {
                         if (!in(r) || t.At(r, "order") != order) continue;
                         const std::string& v = t.At(r, "mean_abs_change");
                         s.y.push_back(v.empty() ? NAN : ParseNumber(v));
                         labels.push_back(t.At(r, "bin"));
                       }
                       if (plot.x_labels.empty()) plot.x_labels = labels;
                       plot.series.push_back(std::move(s));
                     }
                     out.emplace_back("bin_change_" + model + "_layer" + layer + ".svg", RenderSvg(plot));
                   }
                 return out;
               }});
  f.push_back({"metaeval", "metaeval", "metaeval/metaeval.csv", [](const Table& t) {
                 BarChart chart;
                 chart.title = "Meta-consistency (MC) by model and method set";
                 chart.y_label = "MC";
                 std::vector<std::string> groups;
                 for (std::size_t r = 0; r < t.size(); ++r) {
                   const std::string g = t.At(r, "model") + " " + t.At(r, "method_set");
                   if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
                 }
                 chart.categories = groups;
                 for (const std::string& metric : Distinct(t, "metric")) {
                   Series s{metric, std::vector<double>(groups.size(), NAN), false};
                   std::vector<double> err(groups.size(), NAN);
                   for (std::size_t r = 0; r < t.size(); ++r) {
                     if (t.At(r, "metric") != metric) continue;
                     const std::size_t g = std::size_t(
                         std::find(groups.begin(), groups.end(), t.At(r, "model") + " " + t.At(r, "method_set")) -
                         groups.begin());
                     s.y[g] = t.Number(r, "mc_mean");
                     err[g] = t.Number(r, "mc_std");
                   }
                   chart.series.push_back(std::move(s));
                   chart.errors.insert(chart.errors.end(), err.begin(), err.end());
                 }
                 return std::vector<std::pair<std::string, std::string>>{{"metaeval_mc.svg", RenderSvg(chart)}};
               }});
  return f;
}

}  // namespace

bool Experiment::Plot() {
  bool ok = true;
  for (const Figure& figure : Figures()) {
    if (current_ != "plot" && figure.command != current_) continue;
    const std::string csv = Path(figure.csv);
    if (!fs::exists(csv)) continue;
    ok &= RunCell("plot/" + figure.name, [&](CellStatus&) {
      const Table t = Table::Read(csv);
      if (t.size() == 0) return;
      for (const auto& [name, svg] : figure.render(t)) WriteTextFile(Path("plots/" + name), svg);
    });
  }
  return ok;
}

std::vector<std::string> RenderPlots(const std::string& out_dir) {
  std::vector<std::string> written;
  for (const Figure& figure : Figures()) {
    const fs::path csv = fs::path(out_dir) / figure.csv;
    if (!fs::exists(csv)) continue;
    const Table t = Table::Read(csv.string());
    if (t.size() == 0) continue;
    for (const auto& [name, svg] : figure.render(t)) {
      WriteTextFile((fs::path(out_dir) / "plots" / name).string(), svg);
      written.push_back("plots/" + name);
    }
  }
  return written;
}

void Experiment::WriteManifest(const std::string& command) {
  const std::string path = Path(kManifest);
  json manifest;
  if (fs::exists(path)) {
    try {
      manifest = json::parse(ReadTextFile(path));
      if (manifest.value("config_hash", "") != hash_) manifest = json();
    } catch (const json::exception&) {
      manifest = json();
    }
  }
  manifest["config_hash"] = hash_;
  manifest["seed"] = config_.seed;
  manifest["config"] = json::parse(CanonicalConfigJson(config_));
  manifest["fixed_choices"] = FixedChoices();
  if (!manifest.contains("commands")) manifest["commands"] = json::object();
  json cells = json::array();
  std::size_t failed = 0;
  for (const CellStatus& c : cells_[command]) {
    json entry = {{"cell", c.cell}, {"status", c.ok ? "ok" : "failed"}};
    if (!c.ok) {
      entry["error_class"] = c.error_class;
      entry["message"] = c.message;
      ++failed;
    }
    if (!c.sample_failures.empty()) entry["sample_failures"] = c.sample_failures;
    if (c.degenerate) entry["degenerate"] = c.degenerate;
    cells.push_back(entry);
  }
  manifest["commands"][command] = {{"complete", failed == 0}, {"failed_cells", failed}, {"cells", cells}};
  bool all_ok = true;
  for (const auto& [name, entry] : manifest["commands"].items()) all_ok &= entry.value("complete", false);
  manifest["complete"] = all_ok;
  WriteTextFile(path, manifest.dump(2) + "\n");
}

bool Experiment::Run(std::string_view command) {
  const std::string name(command);
  Require(std::find(CommandNames().begin(), CommandNames().end(), name) != CommandNames().end(),
          ErrorCode::kInvalidArgument, "unknown command '" + name + "'");
  if (name == "all") {
    bool ok = true;
    auto has = [&](MetricId m) {
      return std::find(config_.metrics.begin(), config_.metrics.end(), m) != config_.metrics.end();
    };
    ok &= Run("gen-data");
    ok &= Run("train");
    ok &= Run("explain");
    if (has(MetricId::kMprt)) ok &= Run("mprt");
    if (has(MetricId::kSmprt)) ok &= Run("smprt");
    if (has(MetricId::kEmprt)) ok &= Run("emprt");
    if (has(MetricId::kMprt)) ok &= Run("layer-order");
    ok &= Run("bin-change");
    ok &= Run("metaeval");
    ok &= Run("plot");
    return ok;
  }
  current_ = name;
  cells_[name].clear();
  fs::create_directories(config_.output_dir);
  bool ok = true;
  if (name == "gen-data") ok = GenData();
  else if (name == "train") ok = TrainModels();
  else if (name == "explain") ok = ExplainAll();
  else if (name == "mprt") ok = Mprt(false);
  else if (name == "smprt") ok = Mprt(true);
  else if (name == "emprt") ok = Emprt();
  else if (name == "layer-order") ok = LayerOrder();
  else if (name == "bin-change") ok = BinChange();
  else if (name == "metaeval") ok = MetaEval();
  if (name != "gen-data" && name != "train" && name != "explain") ok &= Plot();
  WriteManifest(name);
  return ok;
}

}  // namespace mprt
