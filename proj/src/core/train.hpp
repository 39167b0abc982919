#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "annotations.hpp"
#include "eval.hpp"
#include "labels.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "sampling.hpp"

namespace egopnr {

enum class SelectionMetric { OsccAccuracy, TemporalError, Combined };

const char* selection_metric_name(SelectionMetric m);
SelectionMetric selection_metric_from_name(const std::string& name);

// Rows of the recipe that only apply to pixel pipelines; they are carried in
// the config for completeness but nothing here consumes them.
struct RecordedConfig {
  std::string patch_size = "16x16";
  int tubelet_size = 2;
  std::string input_size = "224x224";
  std::string augmentation = "RandAugment(9, 0.5)";
};

struct TrainConfig {
  OptimConfig optim;
  MixConfig mix;
  ModelConfig model;
  SamplerKind sampler = SamplerKind::StratifiedRandom;
  int n_frames = 16;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::uint64_t seed = 0;
  int epochs = 100;
  int eval_every = 1;
  int eval_views = 3;
  SelectionMetric selection = SelectionMetric::Combined;
  std::string checkpoint_dir;
  RecordedConfig recorded;
};

void validate_train_config(const TrainConfig& cfg);

// JSON config file <-> TrainConfig. Field names mirror the recipe table;
// unknown keys are rejected. Missing keys take the defaults above.
TrainConfig parse_train_config(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train_loss;
  std::optional<double> val_oscc_accuracy;
  std::optional<double> val_abs_temporal_error_s;
  std::int64_t val_temporal_counted = 0;
  double lr = 0.0;  // lr used on the final step of the epoch
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  int best_epoch = 0;
};

std::string history_to_jsonl(const TrainHistory& history);

// Higher is better for accuracy-like metrics; the combined score is
// accuracy - error / clip_duration, with a missing temporal error counted
// as a full clip duration.
double selection_score(const EpochRecord& record, SelectionMetric metric, double duration_s);

// Index of the best epoch; ties resolve to the earlier epoch.
int select_best(const std::vector<EpochRecord>& records, SelectionMetric metric,
                double duration_s);

struct TrainResult {
  TrainHistory history;
  ModelConfig model_cfg;
  ModelParams best_params;
};

// Per epoch: re-trim and re-sample every training clip, build targets, apply
// mixup or cutmix then label smoothing, and take AdamW steps under the
// warmup+cosine schedule. Validation runs on a deterministic full-clip grid.
// Deterministic given cfg.seed. When out_dir is non-empty, history.jsonl and
// best.ckpt are written there.
TrainResult train(const DatasetManifest& manifest_train, const DatasetManifest& manifest_val,
                  const FeatureStore& features_train, const FeatureStore& features_val,
                  const TrainConfig& cfg, const std::string& out_dir = {});

}  // namespace egopnr
