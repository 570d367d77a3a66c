#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mprt/config.h"
#include "mprt/error.h"
#include "mprt/experiment.h"

namespace {

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

template <typename T, typename Parse>
std::vector<T> ParseList(const std::string& text, Parse parse, const std::string& what) {
  std::vector<T> out;
  for (const std::string& name : SplitList(text)) {
    const auto v = parse(name);
    mprt::Require(v.has_value(), mprt::ErrorCode::kInvalidArgument, "unknown " + what + " '" + name + "'");
    out.push_back(*v);
  }
  return out;
}

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::string> methods, models, metrics, orders;
  std::optional<int> n;
  std::optional<double> noise;
  std::optional<std::size_t> samples;
};

mprt::ExperimentConfig Resolve(const Overrides& o, const std::string& command) {
  mprt::ExperimentConfig c =
      o.config_path.empty() ? mprt::ExperimentConfig::Default() : mprt::LoadConfig(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.threads) c.threads = *o.threads;
  if (o.methods) {
    c.methods = ParseList<mprt::MethodId>(*o.methods, mprt::ParseMethod, "method");
    c.smprt.methods.clear();
    if (command == "metaeval") c.metaeval.method_sets = {{"cli", c.methods}};
  }
  if (o.models) {
    c.models.clear();
    for (auto arch : ParseList<mprt::Architecture>(*o.models, mprt::ParseArchitecture, "architecture")) {
      mprt::TrainConfig t;
      t.architecture = arch;
      c.models.push_back(t);
    }
  }
  if (o.metrics) c.metrics = ParseList<mprt::MetricId>(*o.metrics, mprt::ParseMetric, "metric");
  if (o.orders) c.orders = ParseList<mprt::RandomisationOrder>(*o.orders, mprt::ParseOrder, "order");
  if (o.n) c.smprt.num_samples = *o.n;
  if (o.noise) c.smprt.noise_level = *o.noise;
  if (o.samples) c.eval_samples = c.smprt.samples = c.metaeval.samples = *o.samples;
  c.Validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPRT, sMPRT and eMPRT bench"};
  app.require_subcommand(1, 1);
  Overrides o;
  app.add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Base seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--threads", o.threads, "Worker threads within a cell")->check(CLI::PositiveNumber);
  app.add_option("--methods", o.methods, "Comma-separated method names");
  app.add_option("--models", o.models, "Comma-separated architectures (lenet, mini_resnet)");
  app.add_option("--metrics", o.metrics, "Comma-separated metrics for `all`");
  app.add_option("--orders", o.orders, "Comma-separated randomisation orders");
  app.add_option("--n", o.n, "sMPRT noise samples");
  app.add_option("--noise", o.noise, "sMPRT noise level");
  app.add_option("--samples", o.samples, "Evaluation and meta-evaluation samples");
  app.add_option("--print-config", "Print the resolved config and exit")->expected(0);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "Generate or load the dataset and write it as IDX"},
      {"train", "Train (or load cached) models"},
      {"explain", "Dump attributions for every model and method"},
      {"mprt", "MPRT curves, final-stage scores and AUC"},
      {"smprt", "sMPRT curves and AUC convergence in N"},
      {"emprt", "eMPRT scores and complexity curves"},
      {"layer-order", "Bottom-up against top-down randomisation"},
      {"bin-change", "Explanation change by relevance bin"},
      {"metaeval", "Meta-consistency of the metrics"},
      {"plot", "Render SVGs from the CSV tables"},
      {"all", "Every step the config enables"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();
  app.fallthrough();
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const mprt::ExperimentConfig config = Resolve(o, command);
    if (app.count("--print-config")) {
      std::cout << mprt::CanonicalConfigJson(config) << "\n";
      return 0;
    }
    mprt::Experiment experiment(config);
    std::cerr << "config " << experiment.config_hash() << " -> " << config.output_dir << "\n";
    const bool ok = experiment.Run(command);
    std::size_t failed = 0;
    for (const auto& [cmd, cells] : experiment.cells())
      for (const auto& c : cells)
        if (!c.ok) {
          ++failed;
          std::cerr << "FAILED " << cmd << " " << c.cell << " [" << c.error_class << "] " << c.message << "\n";
        }
    std::cerr << (ok ? "all cells succeeded" : std::to_string(failed) + " cell(s) failed") << "\n";
    return ok ? 0 : 1;
  } catch (const mprt::Error& e) {
    std::cerr << "error [" << e.code_name() << "]: " << e.what() << "\n";
    return 2;
  }
}
