#include "mprt/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mprt/error.h"

namespace mprt {
namespace {

using json = nlohmann::json;

// Reads one JSON object while tracking which keys were consumed, so that
// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    Require(j_.is_object(), ErrorCode::kInvalidArgument, Where() + " must be an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      Require(used_.count(key) > 0, ErrorCode::kInvalidArgument, "unknown key '" + key + "' in " + Where());
  }

  const json* Get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void Read(const std::string& key, T& out) {
    if (const json* v = Get(key)) out = As<T>(*v, key);
  }

  template <typename T>
  void ReadOptional(const std::string& key, std::optional<T>& out) {
    if (const json* v = Get(key)) out = As<T>(*v, key);
  }

  template <typename T, typename Parse>
  void ReadEnum(const std::string& key, T& out, Parse parse) {
    if (const json* v = Get(key)) out = Enum<T>(*v, key, parse);
  }

  template <typename T, typename Parse>
  void ReadEnumList(const std::string& key, std::vector<T>& out, Parse parse) {
    const json* v = Get(key);
    if (!v) return;
    Require(v->is_array(), ErrorCode::kInvalidArgument, Where(key) + " must be a list");
    out.clear();
    for (const json& item : *v) out.push_back(Enum<T>(item, key, parse));
  }

  std::string Where(const std::string& key = "") const {
    const std::string base = path_.empty() ? "config" : path_;
    return key.empty() ? base : base + "." + key;
  }

 private:
  template <typename T>
  T As(const json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, bool>) {
        Require(v.is_boolean(), ErrorCode::kInvalidArgument, Where(key) + " must be true or false");
      } else if constexpr (std::is_integral_v<T>) {
        Require(v.is_number_integer(), ErrorCode::kInvalidArgument, Where(key) + " must be an integer");
        if constexpr (std::is_unsigned_v<T>)
          Require(v.is_number_unsigned() || v.get<long long>() >= 0, ErrorCode::kInvalidArgument,
                  Where(key) + " must be non-negative");
      } else if constexpr (std::is_floating_point_v<T>) {
        Require(v.is_number(), ErrorCode::kInvalidArgument, Where(key) + " must be a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        Require(v.is_string(), ErrorCode::kInvalidArgument, Where(key) + " must be a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      Fail(ErrorCode::kInvalidArgument, Where(key) + ": " + e.what());
    }
  }

  template <typename T, typename Parse>
  T Enum(const json& v, const std::string& key, Parse parse) const {
    Require(v.is_string(), ErrorCode::kInvalidArgument, Where(key) + " must be a name");
    const auto parsed = parse(v.get<std::string>());
    Require(parsed.has_value(), ErrorCode::kInvalidArgument,
            "unknown value '" + v.get<std::string>() + "' for " + Where(key));
    return *parsed;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void ReadSynthetic(const json& j, SyntheticSpec& s) {
  Reader r(j, "dataset.synthetic");
  r.Read("classes", s.classes);
  r.Read("image_size", s.image_size);
  r.Read("train_samples", s.train_samples);
  r.Read("test_samples", s.test_samples);
  r.Read("noise", s.noise);
  r.Read("max_shift", s.max_shift);
}

void ReadDataset(const json& j, DatasetConfig& d) {
  Reader r(j, "dataset");
  r.Read("source", d.source);
  if (const json* s = r.Get("synthetic")) ReadSynthetic(*s, d.synthetic);
  r.Read("train_images", d.train_images);
  r.Read("train_labels", d.train_labels);
  r.Read("test_images", d.test_images);
  r.Read("test_labels", d.test_labels);
}

TrainConfig ReadModel(const json& j, std::size_t index) {
  TrainConfig t;
  Reader r(j, "models[" + std::to_string(index) + "]");
  r.ReadEnum("architecture", t.architecture, ParseArchitecture);
  r.Read("epochs", t.epochs);
  r.Read("learning_rate", t.learning_rate);
  r.Read("momentum", t.momentum);
  r.Read("batch_size", t.batch_size);
  return t;
}

void ReadPerturbation(Reader& parent, const std::string& key, PerturbationSpec& spec) {
  const json* j = parent.Get(key);
  if (!j) return;
  Reader r(*j, parent.Where(key));
  if (spec.test == PerturbationTest::kInput) {
    r.Read("alpha", spec.alpha);
    r.Read("beta", spec.beta);
  } else {
    r.Read("mu", spec.mu);
    r.Read("sigma", spec.sigma);
  }
}

void ReadMetaEval(const json& j, MetaEvalSettings& m) {
  Reader r(j, "metaeval");
  if (const json* sets = r.Get("method_sets")) {
    Require(sets->is_object(), ErrorCode::kInvalidArgument, "metaeval.method_sets must be an object");
    m.method_sets.clear();
    Reader holder(*sets, "metaeval.method_sets");
    for (const auto& [name, list] : sets->items()) holder.ReadEnumList(name, m.method_sets[name], ParseMethod);
  }
  r.ReadEnumList("metrics", m.metrics, ParseMetric);
  r.Read("samples", m.samples);
  r.Read("k", m.perturbation.k);
  r.Read("iterations", m.perturbation.iterations);
  ReadPerturbation(r, "input_minor", m.perturbation.input_minor);
  ReadPerturbation(r, "input_disruptive", m.perturbation.input_disruptive);
  ReadPerturbation(r, "model_minor", m.perturbation.model_minor);
  ReadPerturbation(r, "model_disruptive", m.perturbation.model_disruptive);
  r.Read("minor_accuracy_tolerance", m.perturbation.minor_accuracy_tolerance);
  r.Read("disruptive_accuracy_margin", m.perturbation.disruptive_accuracy_margin);
}

json Names(const auto& values, auto name) {
  json out = json::array();
  for (const auto& v : values) out.push_back(std::string(name(v)));
  return out;
}

json PerturbationJson(const PerturbationSpec& s) {
  if (s.test == PerturbationTest::kInput) return {{"alpha", s.alpha}, {"beta", s.beta}};
  return {{"mu", s.mu}, {"sigma", s.sigma}};
}

json ToJson(const ExperimentConfig& c) {
  const ResolvedSeeds seeds = c.Seeds();
  json models = json::array();
  for (const TrainConfig& t : c.models)
    models.push_back({{"architecture", std::string(ArchitectureName(t.architecture))},
                      {"epochs", t.epochs},
                      {"learning_rate", t.learning_rate},
                      {"momentum", t.momentum},
                      {"batch_size", t.batch_size}});
  json sets = json::object();
  for (const auto& [name, methods] : c.metaeval.method_sets) sets[name] = Names(methods, MethodName);
  const auto& h = c.emprt.histogram;
  json histogram = {{"bins", h.bins}, {"bin_rule", std::string(BinRuleName(h.rule))}};
  if (h.fixed_range) histogram["fixed_range"] = {h.fixed_range->first, h.fixed_range->second};
  const auto& p = c.metaeval.perturbation;
  return {
      {"seed", c.seed},
      {"seeds",
       {{"data", seeds.data},
        {"train", seeds.train},
        {"randomisation", seeds.randomisation},
        {"explain", seeds.explain},
        {"metaeval", seeds.metaeval}}},
      {"dataset",
       {{"source", c.dataset.source},
        {"synthetic",
         {{"classes", c.dataset.synthetic.classes},
          {"image_size", c.dataset.synthetic.image_size},
          {"train_samples", c.dataset.synthetic.train_samples},
          {"test_samples", c.dataset.synthetic.test_samples},
          {"noise", c.dataset.synthetic.noise},
          {"max_shift", c.dataset.synthetic.max_shift}}},
        {"train_images", c.dataset.train_images},
        {"train_labels", c.dataset.train_labels},
        {"test_images", c.dataset.test_images},
        {"test_labels", c.dataset.test_labels}}},
      {"models", models},
      {"methods", Names(c.methods, MethodName)},
      {"method_params",
       {{"ig_steps", c.method_params.ig_steps},
        {"smoothgrad_samples", c.method_params.smoothgrad_samples},
        {"shap_samples", c.method_params.shap_samples},
        {"noise_level", c.method_params.noise_level},
        {"epsilon", c.method_params.epsilon}}},
      {"metrics", Names(c.metrics, MetricName)},
      {"eval_samples", c.eval_samples},
      {"randomisation",
       {{"orders", Names(c.orders, OrderName)},
        {"reinit", std::string(ReinitName(c.reinit))},
        {"cumulative", c.cumulative}}},
      {"mprt",
       {{"similarity", std::string(SimilarityName(c.mprt.similarity))},
        {"normalise", c.mprt.normalise},
        {"redraw_random_baseline", c.mprt.redraw_random_baseline}}},
      {"smprt",
       {{"num_samples", c.smprt.num_samples},
        {"noise_level", c.smprt.noise_level},
        {"methods", Names(c.smprt.methods, MethodName)},
        {"samples", c.smprt.samples},
        {"convergence_method", std::string(MethodName(c.smprt.convergence_method))},
        {"convergence_n", c.smprt.convergence_n},
        {"convergence_samples", c.smprt.convergence_samples}}},
      {"emprt",
       {{"histogram", histogram},
        {"curve", c.emprt.curve},
        {"aggregation", std::string(AggregationName(c.emprt.aggregation))}}},
      {"bin_change",
       {{"method", std::string(MethodName(c.bin_change.method))},
        {"bins", c.bin_change.bins},
        {"samples", c.bin_change.samples},
        {"layers", c.bin_change.layers}}},
      {"metaeval",
       {{"method_sets", sets},
        {"metrics", Names(c.metaeval.metrics, MetricName)},
        {"samples", c.metaeval.samples},
        {"k", p.k},
        {"iterations", p.iterations},
        {"input_minor", PerturbationJson(p.input_minor)},
        {"input_disruptive", PerturbationJson(p.input_disruptive)},
        {"model_minor", PerturbationJson(p.model_minor)},
        {"model_disruptive", PerturbationJson(p.model_disruptive)},
        {"minor_accuracy_tolerance", p.minor_accuracy_tolerance},
        {"disruptive_accuracy_margin", p.disruptive_accuracy_margin}}},
  };
}

}  // namespace

MethodConfig MethodParams::For(MethodId method) const {
  MethodConfig cfg = MethodConfig::Default(method);
  cfg.steps = ig_steps;
  cfg.samples = method == MethodId::kGradientSHAP ? shap_samples : smoothgrad_samples;
  cfg.noise_level = noise_level;
  cfg.epsilon = epsilon;
  return cfg;
}

ExperimentConfig ExperimentConfig::Default() {
  ExperimentConfig c;
  TrainConfig lenet, resnet;
  resnet.architecture = Architecture::kMiniResNet;
  c.models = {lenet, resnet};
  c.methods = AllMethods();
  // Path-integral and noise-averaging methods cost 5-20 explanations each;
  // times N = 50 they dominate the run, so sMPRT defaults to the rest.
  c.smprt.methods = {MethodId::kGradient,  MethodId::kInputXGradient, MethodId::kGuidedBackprop, MethodId::kGradCAM,
                     MethodId::kLrpEpsilon, MethodId::kLrpZPlus,      MethodId::kRandomBaseline};
  c.metaeval.method_sets = {
      {"M4", {MethodId::kGradient, MethodId::kGradCAM, MethodId::kLrpEpsilon, MethodId::kGuidedBackprop}},
      {"M3", {MethodId::kSaliency, MethodId::kLrpZPlus, MethodId::kInputXGradient}},
  };
  return c;
}

ResolvedSeeds ExperimentConfig::Seeds() const {
  auto pick = [&](const std::optional<std::uint64_t>& explicit_seed, std::uint64_t tag) {
    return explicit_seed ? *explicit_seed : DeriveSeed(seed, {tag}) % (std::uint64_t{1} << 53);
  };
  return {pick(seeds.data, 1), pick(seeds.train, 2), pick(seeds.randomisation, 3), pick(seeds.explain, 4),
          pick(seeds.metaeval, 5)};
}

void ExperimentConfig::Validate() const {
  Require(dataset.source == "synthetic" || dataset.source == "idx", ErrorCode::kInvalidArgument,
          "dataset.source must be 'synthetic' or 'idx'");
  if (dataset.source == "idx")
    Require(!dataset.train_images.empty() && !dataset.train_labels.empty() && !dataset.test_images.empty() &&
                !dataset.test_labels.empty(),
            ErrorCode::kInvalidArgument, "IDX source needs train/test image and label paths");
  Require(!models.empty(), ErrorCode::kInvalidArgument, "config lists no models");
  for (const TrainConfig& t : models)
    Require(t.epochs >= 0 && t.batch_size >= 1 && t.learning_rate > 0, ErrorCode::kInvalidArgument,
            "model training settings out of range");
  Require(!methods.empty(), ErrorCode::kInvalidArgument, "config lists no methods");
  Require(eval_samples >= 1, ErrorCode::kInvalidArgument, "eval_samples must be >= 1");
  Require(threads >= 1, ErrorCode::kInvalidArgument, "threads must be >= 1");
  Require(cumulative, ErrorCode::kUnsupported, "only cumulative randomisation is implemented");
  for (RandomisationOrder o : orders)
    Require(o != RandomisationOrder::kFullOnly, ErrorCode::kInvalidArgument,
            "randomisation.orders takes BottomUp and TopDown; FullOnly is used by eMPRT internally");
  for (MethodId m : methods) method_params.For(m).Validate();
  Require(smprt.num_samples >= 1 && smprt.noise_level >= 0 && smprt.samples >= 1, ErrorCode::kInvalidArgument,
          "smprt needs num_samples >= 1, samples >= 1 and noise_level >= 0");
  for (int n : smprt.convergence_n) Require(n >= 1, ErrorCode::kInvalidArgument, "convergence N must be >= 1");
  Require(emprt.histogram.bins >= 2, ErrorCode::kInvalidArgument, "emprt bins must be >= 2");
  Require(bin_change.method == MethodId::kLrpEpsilon || bin_change.method == MethodId::kLrpZPlus,
          ErrorCode::kInvalidArgument, "bin_change.method must be an LRP method");
  Require(bin_change.bins >= 1, ErrorCode::kInvalidArgument, "bin_change.bins must be >= 1");
  for (const auto& [name, set] : metaeval.method_sets)
    Require(set.size() >= 2, ErrorCode::kInvalidArgument,
            "metaeval method set '" + name + "': at least 2 methods required");
  metaeval.perturbation.Validate();
}

ExperimentConfig ParseConfig(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    Fail(ErrorCode::kFormat, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c = ExperimentConfig::Default();
  {
    Reader r(j, "");
    r.Read("seed", c.seed);
    r.Read("threads", c.threads);
    r.Read("output_dir", c.output_dir);
    if (const json* d = r.Get("dataset")) ReadDataset(*d, c.dataset);
    if (const json* models = r.Get("models")) {
      Require(models->is_array(), ErrorCode::kInvalidArgument, "config.models must be a list");
      c.models.clear();
      for (std::size_t i = 0; i < models->size(); ++i) c.models.push_back(ReadModel((*models)[i], i));
    }
    r.ReadEnumList("methods", c.methods, ParseMethod);
    if (const json* p = r.Get("method_params")) {
      Reader m(*p, "method_params");
      m.Read("ig_steps", c.method_params.ig_steps);
      m.Read("smoothgrad_samples", c.method_params.smoothgrad_samples);
      m.Read("shap_samples", c.method_params.shap_samples);
      m.Read("noise_level", c.method_params.noise_level);
      m.Read("epsilon", c.method_params.epsilon);
    }
    r.ReadEnumList("metrics", c.metrics, ParseMetric);
    r.Read("eval_samples", c.eval_samples);
    if (const json* s = r.Get("seeds")) {
      Reader sr(*s, "seeds");
      sr.ReadOptional("data", c.seeds.data);
      sr.ReadOptional("train", c.seeds.train);
      sr.ReadOptional("randomisation", c.seeds.randomisation);
      sr.ReadOptional("explain", c.seeds.explain);
      sr.ReadOptional("metaeval", c.seeds.metaeval);
    }
    if (const json* p = r.Get("randomisation")) {
      Reader pr(*p, "randomisation");
      pr.ReadEnumList("orders", c.orders, ParseOrder);
      pr.ReadEnum("reinit", c.reinit, ParseReinit);
      pr.Read("cumulative", c.cumulative);
    }
    if (const json* p = r.Get("mprt")) {
      Reader pr(*p, "mprt");
      pr.ReadEnum("similarity", c.mprt.similarity, ParseSimilarity);
      pr.Read("normalise", c.mprt.normalise);
      pr.Read("redraw_random_baseline", c.mprt.redraw_random_baseline);
    }
    if (const json* p = r.Get("smprt")) {
      Reader pr(*p, "smprt");
      pr.Read("num_samples", c.smprt.num_samples);
      pr.Read("noise_level", c.smprt.noise_level);
      pr.Read("samples", c.smprt.samples);
      pr.ReadEnumList("methods", c.smprt.methods, ParseMethod);
      pr.ReadEnum("convergence_method", c.smprt.convergence_method, ParseMethod);
      pr.Read("convergence_n", c.smprt.convergence_n);
      pr.Read("convergence_samples", c.smprt.convergence_samples);
    }
    if (const json* p = r.Get("emprt")) {
      Reader pr(*p, "emprt");
      if (const json* h = pr.Get("histogram")) {
        Reader hr(*h, "emprt.histogram");
        hr.Read("bins", c.emprt.histogram.bins);
        hr.ReadEnum("bin_rule", c.emprt.histogram.rule, ParseBinRule);
        std::optional<std::vector<double>> range;
        hr.ReadOptional("fixed_range", range);
        if (range) {
          Require(range->size() == 2 && (*range)[0] < (*range)[1], ErrorCode::kInvalidArgument,
                  "emprt.histogram.fixed_range must be [lo, hi] with lo < hi");
          c.emprt.histogram.fixed_range = std::make_pair((*range)[0], (*range)[1]);
        }
      }
      pr.Read("curve", c.emprt.curve);
      pr.ReadEnum("aggregation", c.emprt.aggregation, ParseAggregation);
    }
    if (const json* p = r.Get("bin_change")) {
      Reader pr(*p, "bin_change");
      pr.ReadEnum("method", c.bin_change.method, ParseMethod);
      pr.Read("bins", c.bin_change.bins);
      pr.Read("samples", c.bin_change.samples);
      pr.Read("layers", c.bin_change.layers);
    }
    if (const json* p = r.Get("metaeval")) ReadMetaEval(*p, c.metaeval);
  }
  c.Validate();
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kIo, "cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseConfig(buffer.str());
}

std::string CanonicalConfigJson(const ExperimentConfig& config) { return ToJson(config).dump(); }

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ConfigHash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(Fnv1a64(CanonicalConfigJson(config))));
  return buf;
}

}  // namespace mprt
