#ifndef MPRT_EXPERIMENT_H_
#define MPRT_EXPERIMENT_H_

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mprt/config.h"
#include "mprt/dataset.h"
#include "mprt/metrics.h"
#include "mprt/model.h"
#include "mprt/randomisation.h"

namespace mprt {

// Outcome of one cell of the experiment grid, such as one (model, order,
// method) MPRT run.
struct CellStatus {
  std::string cell;
  bool ok = true;
  std::string error_class;  // ErrorCode name, or "Internal" for non-library errors.
  std::string message;
  // Per-sample failures inside a successful cell, by error class.
  std::map<std::string, std::size_t> sample_failures;
  std::size_t degenerate = 0;
};

// Subcommands in the order `all` runs them.
const std::vector<std::string>& CommandNames();

// Runs subcommands against one output directory. Every command writes its
// tables, refreshes the SVGs it owns, and merges its cell list into
// <out>/manifest.json. A failing cell is recorded and the run continues.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);
  ~Experiment();

  const ExperimentConfig& config() const { return config_; }
  const std::string& config_hash() const { return hash_; }
  const ResolvedSeeds& seeds() const { return seeds_; }

  // True when every cell of the command succeeded. Unknown names throw.
  bool Run(std::string_view command);
  // Cells of every command run so far, keyed by command.
  const std::map<std::string, std::vector<CellStatus>>& cells() const { return cells_; }

  // Lazily generated or loaded data and (trained or cached) models. A model
  // whose training failed is nullptr.
  const DatasetSplits& Data();
  const Model* GetModel(std::size_t index);
  std::string ModelLabel(std::size_t index) const;

 private:
  struct MprtKey {
    std::size_t model;
    RandomisationOrder order;
    MethodId method;
    bool smooth;
    auto operator<=>(const MprtKey&) const = default;
  };

  bool GenData();
  bool TrainModels();
  bool ExplainAll();
  bool Mprt(bool smooth);
  bool SmprtConvergence();
  bool Emprt();
  bool LayerOrder();
  bool BinChange();
  bool MetaEval();
  bool Plot();

  // Runs body inside a cell; errors are caught and recorded.
  bool RunCell(const std::string& cell, const std::function<void(CellStatus&)>& body);
  void WriteManifest(const std::string& command);
  std::string Path(const std::string& relative) const;
  Dataset EvalSet(std::size_t n);
  const std::vector<ModelState>& States(std::size_t model, RandomisationOrder order);
  RandomisationPlan Plan(RandomisationOrder order) const;
  MprtOptions MprtOpts() const;
  const MprtResult& MprtFor(const MprtKey& key, CellStatus& status);
  std::vector<MethodId> SmprtMethods() const;

  ExperimentConfig config_;
  std::string hash_;
  ResolvedSeeds seeds_;
  std::string current_;
  std::map<std::string, std::vector<CellStatus>> cells_;
  std::optional<DatasetSplits> data_;
  std::vector<std::optional<std::unique_ptr<Model>>> models_;
  std::map<std::pair<std::size_t, RandomisationOrder>, std::vector<ModelState>> states_;
  std::map<MprtKey, MprtResult> mprt_cache_;
};

// Renders every figure whose CSV exists under out_dir. Returns the SVG paths
// written, relative to out_dir.
std::vector<std::string> RenderPlots(const std::string& out_dir);

}  // namespace mprt

#endif  // MPRT_EXPERIMENT_H_
