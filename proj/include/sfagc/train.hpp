#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfagc/dataset.hpp"
#include "sfagc/gradcheck.hpp"
#include "sfagc/network.hpp"

namespace sfagc {

/// Flat key = value run description; see README for the keys.
struct RunConfig {
  std::string task = "classify";
  std::string data;                    // manifest.json
  std::string network = "classify-toy";  // preset name or spec file
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::string lr_schedule = "constant";  // constant | cosine (per epoch, down to 0)
  std::optional<double> dropout;       // overrides the spec
  std::optional<std::size_t> head_hidden;
  std::uint64_t seed = 1;
  std::string ablation = "full";
  std::string out = "run";
  bool rotate_augment = false;         // uniform rotation about z per draw
  bool normalize = true;               // unit-sphere normalization at load

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  /// Applies one "key=value" override.
  void set(const std::string& key, const std::string& value);
  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

/// Preset name, or a path to a spec file.
NetworkSpec resolve_network(const std::string& name_or_path);

struct EvalReport {
  std::string task;
  std::size_t samples = 0;
  double oa = 0.0, macc = 0.0;  // classification
  double miou = 0.0;            // segmentation, mean over shapes
  std::map<std::string, double> per_category;  // per-class accuracy or per-category mIoU
  double mean_loss = 0.0;

  std::string summary() const;
};

/// Inference over the samples. Segmentation predictions are restricted to the
/// parts of each sample's category.
EvalReport evaluate(const Network& net, const std::vector<Sample>& samples, const DatasetManifest& manifest);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  EvalReport test;
};

/// One line of the metrics log.
std::string metrics_line(const EpochRecord& record);

struct TrainResult {
  std::vector<EpochRecord> history;
  std::string checkpoint;
  std::string metrics_log;
  double seconds = 0.0;
};

/// Trains with Adam, writes <out>/metrics.jsonl (one record per epoch),
/// <out>/model.ckpt and its spec sidecar <out>/model.ckpt.spec. `progress`
/// may be null.
TrainResult train(const RunConfig& cfg, std::ostream* progress = nullptr);

/// The network a run config describes, with classes taken from the manifest.
NetworkSpec run_spec(const RunConfig& cfg, const DatasetManifest& manifest);

/// Checkpoint or data that does not fit the stored network.
class IncompatibleCheckpoint : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rebuilds the network from <checkpoint>.spec and loads its weights.
Network load_network(const std::string& checkpoint);
EvalReport evaluate_checkpoint(const std::string& checkpoint, const std::string& manifest,
                               const std::string& split = "test");

/// Finite-difference suite at N=12, k=4, widths ≤ 8 with fixed seeds.
/// layer: one SFAGC layer; pool: score and FPS pooling, propagation, set
/// abstraction; model: a two-phase classifier and a small segmenter.
/// Rows are prefixed with the case name. `corrupt` names a row to perturb.
GradCheckReport run_gradcheck(const std::string& scope, const std::string& corrupt = "");
std::vector<std::string> gradcheck_scopes();

struct AblationRow {
  std::string variant;
  std::vector<double> scores;  // one per seed
  double mean = 0.0;
};

/// Trains every variant for every seed and reports the final test score
/// (mIoU or OA). Nothing is written to disk.
std::vector<AblationRow> ablation_study(RunConfig cfg, const std::vector<std::uint64_t>& seeds,
                                        std::ostream* progress = nullptr);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace sfagc
