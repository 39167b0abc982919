#pragma once

#include <optional>
#include <string>
#include <vector>

#include "annotations.hpp"
#include "model.hpp"
#include "sampling.hpp"

namespace egopnr {

struct Prediction {
  std::string clip_id;
  double oscc_prob_change = 0.0;
  std::optional<double> pnr_time_s;  // absent when the temporal argmax is class N
};

// Entrywise mean of raw (pre-softmax) logits across views.
HeadLogits aggregate_views(const std::vector<HeadLogits>& views);

// Copies the sampled frames of one stored view into a dense
// [n_frames x dim] double buffer.
void gather_frames(const float* view, const std::vector<int>& grid, int dim, Vec& out);

// Eval-mode forward on every view, aggregate, then read out the heads.
// frame_indices is the sampling grid the views were gathered on; slot i maps
// to frame_indices[i] / fps.
Prediction predict(const ModelConfig& cfg, const ModelParams& params,
                   const std::vector<const double*>& view_features,
                   const std::vector<int>& frame_indices, double fps,
                   const std::string& clip_id);

double abs_temporal_error(double pred_time_s, int gt_frame, double fps);

struct MetricsReport {
  std::optional<double> oscc_accuracy;
  std::optional<double> abs_temporal_error_mean_s;
  std::int64_t n_clips = 0;
  std::int64_t n_state_change_clips = 0;
  // Clips contributing to the temporal mean: both ground truth and the
  // prediction assert a state change.
  std::int64_t n_temporal_counted = 0;
  std::int64_t n_pred_change = 0;
  std::vector<std::pair<std::string, MetricsReport>> baselines;
};

std::string metrics_to_json(const MetricsReport& report);

struct PerClipRow {
  std::string clip_id;
  bool gt_has_change = false;
  std::optional<double> gt_time_s;
  double oscc_prob_change = 0.0;
  std::optional<double> pred_time_s;
  std::optional<double> abs_error_s;
};

// Deterministic full-clip evaluation: evenly spaced frames over the whole
// clip, all views aggregated. `views` limits how many views are used
// (0 = all available).
MetricsReport evaluate_model(const ModelConfig& cfg, const ModelParams& params,
                             const DatasetManifest& manifest, const FeatureStore& store,
                             int views = 0, std::vector<PerClipRow>* per_clip = nullptr);

// Predicts "change" for every clip; accuracy equals the positive fraction.
MetricsReport baseline_always_positive(const DatasetManifest& manifest);

// Predicts pnr_time = fraction * duration for every state-change clip.
MetricsReport baseline_fixed_fraction(const DatasetManifest& manifest, double fraction);

std::string per_clip_csv(const std::vector<PerClipRow>& rows);

}  // namespace egopnr
