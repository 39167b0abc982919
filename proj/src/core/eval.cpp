#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace egopnr {

using nlohmann::ordered_json;

HeadLogits aggregate_views(const std::vector<HeadLogits>& views) {
  if (views.empty()) raise(ErrorKind::Contract, "aggregate_views: no views");
  HeadLogits out;
  out.oscc.assign(views[0].oscc.size(), 0.0);
  out.temporal.assign(views[0].temporal.size(), 0.0);
  for (const HeadLogits& v : views) {
    if (v.oscc.size() != out.oscc.size() || v.temporal.size() != out.temporal.size()) {
      raise(ErrorKind::Contract, "aggregate_views: logit shape mismatch");
    }
    for (std::size_t i = 0; i < out.oscc.size(); ++i) out.oscc[i] += v.oscc[i];
    for (std::size_t i = 0; i < out.temporal.size(); ++i) out.temporal[i] += v.temporal[i];
  }
  const double inv = 1.0 / static_cast<double>(views.size());
  for (double& x : out.oscc) x *= inv;
  for (double& x : out.temporal) x *= inv;
  return out;
}

Prediction predict(const ModelConfig& cfg, const ModelParams& params,
                   const std::vector<const double*>& view_features,
                   const std::vector<int>& frame_indices, double fps,
                   const std::string& clip_id) {
  if (view_features.empty()) raise(ErrorKind::Contract, "predict: no views");
  if (static_cast<int>(frame_indices.size()) != cfg.n_frames) {
    raise(ErrorKind::Contract, "predict: grid size does not match n_frames");
  }
  std::vector<HeadLogits> logits;
  logits.reserve(view_features.size());
  ForwardCache cache;
  for (const double* feats : view_features) {
    logits.push_back(forward(cfg, params, feats, nullptr, cache));
  }
  const HeadLogits agg = aggregate_views(logits);

  Prediction pred;
  pred.clip_id = clip_id;
  // Two-class softmax, stable form.
  const double diff = agg.oscc[1] - agg.oscc[0];
  pred.oscc_prob_change = 1.0 / (1.0 + std::exp(-diff));
  const auto arg =
      std::max_element(agg.temporal.begin(), agg.temporal.end()) - agg.temporal.begin();
  if (arg < cfg.n_frames) {
    pred.pnr_time_s = frame_indices[static_cast<std::size_t>(arg)] / fps;
  }
  return pred;
}

double abs_temporal_error(double pred_time_s, int gt_frame, double fps) {
  return std::abs(pred_time_s - gt_frame / fps);
}

namespace {

ordered_json metrics_json_node(const MetricsReport& r) {
  ordered_json node;
  node["n_clips"] = r.n_clips;
  node["n_state_change_clips"] = r.n_state_change_clips;
  node["n_pred_change"] = r.n_pred_change;
  node["n_temporal_counted"] = r.n_temporal_counted;
  if (r.oscc_accuracy) {
    node["oscc_accuracy"] = *r.oscc_accuracy;
  } else {
    node["oscc_accuracy"] = nullptr;
  }
  if (r.abs_temporal_error_mean_s) {
    node["abs_temporal_error_mean_s"] = *r.abs_temporal_error_mean_s;
  } else {
    node["abs_temporal_error_mean_s"] = nullptr;
  }
  if (!r.baselines.empty()) {
    ordered_json sub;
    for (const auto& [name, report] : r.baselines) {
      sub[name] = metrics_json_node(report);
    }
    node["baselines"] = std::move(sub);
  }
  return node;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report) {
  return metrics_json_node(report).dump(2) + "\n";
}

void gather_frames(const float* view, const std::vector<int>& grid, int dim, Vec& out) {
  out.resize(grid.size() * static_cast<std::size_t>(dim));
  double* dst = out.data();
  for (int frame : grid) {
    const float* src = view + static_cast<std::size_t>(frame) * dim;
    for (int d = 0; d < dim; ++d) *dst++ = src[d];
  }
}

MetricsReport evaluate_model(const ModelConfig& cfg, const ModelParams& params,
                             const DatasetManifest& manifest, const FeatureStore& store,
                             int views, std::vector<PerClipRow>* per_clip) {
  if (store.dim() != cfg.feature_dim) {
    raise(ErrorKind::Contract, "feature store dim does not match the model");
  }
  MetricsReport report;
  report.n_clips = static_cast<std::int64_t>(manifest.clips.size());
  const int use_views = views > 0 ? std::min(views, store.views()) : store.views();
  std::int64_t correct = 0;
  double error_sum = 0.0;

  Rng unused(0);  // evenly spaced sampling draws nothing
  std::vector<Vec> gathered(static_cast<std::size_t>(use_views));
  std::vector<const double*> view_ptrs(static_cast<std::size_t>(use_views));
  for (const ClipAnnotation& clip : manifest.clips) {
    const std::vector<int> grid =
        sample_frames(full_range(clip), cfg.n_frames, SamplerKind::EvenlySpaced, unused);
    for (int v = 0; v < use_views; ++v) {
      gather_frames(store.view_data(clip.clip_id, v), grid, store.dim(),
                    gathered[static_cast<std::size_t>(v)]);
      view_ptrs[static_cast<std::size_t>(v)] = gathered[static_cast<std::size_t>(v)].data();
    }
    const Prediction pred = predict(cfg, params, view_ptrs, grid, clip.fps, clip.clip_id);

    const bool pred_change = pred.oscc_prob_change >= 0.5;
    if (pred_change == clip.has_state_change) ++correct;
    if (pred_change) ++report.n_pred_change;
    if (clip.has_state_change) ++report.n_state_change_clips;

    PerClipRow row;
    row.clip_id = clip.clip_id;
    row.gt_has_change = clip.has_state_change;
    if (clip.pnr_frame) row.gt_time_s = *clip.pnr_frame / clip.fps;
    row.oscc_prob_change = pred.oscc_prob_change;
    row.pred_time_s = pred.pnr_time_s;
    if (clip.has_state_change && pred.pnr_time_s) {
      const double err = abs_temporal_error(*pred.pnr_time_s, *clip.pnr_frame, clip.fps);
      error_sum += err;
      ++report.n_temporal_counted;
      row.abs_error_s = err;
    }
    if (per_clip) per_clip->push_back(std::move(row));
  }

  if (report.n_clips > 0) {
    report.oscc_accuracy = static_cast<double>(correct) / static_cast<double>(report.n_clips);
  }
  if (report.n_temporal_counted > 0) {
    report.abs_temporal_error_mean_s =
        error_sum / static_cast<double>(report.n_temporal_counted);
  }
  return report;
}

MetricsReport baseline_always_positive(const DatasetManifest& manifest) {
  MetricsReport report;
  report.n_clips = static_cast<std::int64_t>(manifest.clips.size());
  std::int64_t positives = 0;
  for (const ClipAnnotation& clip : manifest.clips) {
    if (clip.has_state_change) ++positives;
  }
  report.n_state_change_clips = positives;
  report.n_pred_change = report.n_clips;
  if (report.n_clips > 0) {
    report.oscc_accuracy = static_cast<double>(positives) / static_cast<double>(report.n_clips);
  }
  return report;
}

MetricsReport baseline_fixed_fraction(const DatasetManifest& manifest, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    raise(ErrorKind::InvalidArgument, "fraction must be in [0, 1]");
  }
  MetricsReport report;
  report.n_clips = static_cast<std::int64_t>(manifest.clips.size());
  double error_sum = 0.0;
  for (const ClipAnnotation& clip : manifest.clips) {
    if (!clip.has_state_change) continue;
    ++report.n_state_change_clips;
    const double pred_time = fraction * clip.duration_s();
    error_sum += abs_temporal_error(pred_time, *clip.pnr_frame, clip.fps);
  }
  report.n_pred_change = report.n_state_change_clips;
  report.n_temporal_counted = report.n_state_change_clips;
  if (report.n_temporal_counted > 0) {
    report.abs_temporal_error_mean_s =
        error_sum / static_cast<double>(report.n_temporal_counted);
  }
  return report;
}

std::string per_clip_csv(const std::vector<PerClipRow>& rows) {
  std::ostringstream out;
  out << "clip_id,gt_has_change,gt_time_s,oscc_prob_change,pred_time_s,abs_error_s\n";
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string();
    std::ostringstream s;
    s.precision(17);
    s << *v;
    return s.str();
  };
  for (const PerClipRow& row : rows) {
    std::ostringstream prob;
    prob.precision(17);
    prob << row.oscc_prob_change;
    out << row.clip_id << ',' << (row.gt_has_change ? 1 : 0) << ',' << opt(row.gt_time_s) << ','
        << prob.str() << ',' << opt(row.pred_time_s) << ',' << opt(row.abs_error_s) << '\n';
  }
  return out.str();
}

}  // namespace egopnr
