#include "egopnr.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "annotations.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "model.hpp"
#include "sampling.hpp"
#include "train.hpp"

using namespace egopnr;

struct egopnr_manifest {
  DatasetManifest value;
};

struct egopnr_features {
  FeatureStore value;
};

struct egopnr_model {
  ModelConfig cfg;
  ModelParams params;
};

namespace {

thread_local std::string g_last_error;

egopnr_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return EGOPNR_ERR_INVALID_ARGUMENT;
    case ErrorKind::Parse: return EGOPNR_ERR_PARSE;
    case ErrorKind::Validation: return EGOPNR_ERR_VALIDATION;
    case ErrorKind::Io: return EGOPNR_ERR_IO;
    case ErrorKind::Format: return EGOPNR_ERR_FORMAT;
    case ErrorKind::Numeric: return EGOPNR_ERR_NUMERIC;
    case ErrorKind::Contract: return EGOPNR_ERR_CONTRACT;
  }
  return EGOPNR_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes + last-error text.
template <typename F>
egopnr_status guarded(F&& fn) {
  try {
    g_last_error.clear();
    fn();
    return EGOPNR_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EGOPNR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return EGOPNR_ERR_INTERNAL;
  }
}

egopnr_status fail_invalid(const char* message) {
  g_last_error = message;
  return EGOPNR_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

SamplerKind sampler_of(int sampler) {
  switch (sampler) {
    case EGOPNR_SAMPLER_EVEN: return SamplerKind::EvenlySpaced;
    case EGOPNR_SAMPLER_STRATIFIED: return SamplerKind::StratifiedRandom;
    case EGOPNR_SAMPLER_RANDOM: return SamplerKind::UniformRandom;
    default:
      raise(ErrorKind::InvalidArgument, "unknown sampler code " + std::to_string(sampler));
  }
}

Split split_of(int split) {
  switch (split) {
    case EGOPNR_SPLIT_TRAIN: return Split::Train;
    case EGOPNR_SPLIT_VAL: return Split::Val;
    case EGOPNR_SPLIT_TEST: return Split::Test;
    default:
      raise(ErrorKind::InvalidArgument, "unknown split code " + std::to_string(split));
  }
}

SynthConfig synth_of(const egopnr_synth_config& c) {
  SynthConfig cfg;
  cfg.clip_count = c.clip_count;
  cfg.p_pos = c.p_pos;
  cfg.prior = c.prior == EGOPNR_PRIOR_BETA ? PnrPrior::BetaPeaked : PnrPrior::Uniform;
  if (c.prior != EGOPNR_PRIOR_UNIFORM && c.prior != EGOPNR_PRIOR_BETA) {
    raise(ErrorKind::InvalidArgument, "unknown prior code " + std::to_string(c.prior));
  }
  cfg.prior_fraction = c.prior_fraction;
  cfg.snr = c.snr;
  cfg.feature_dim = c.feature_dim;
  cfg.views_per_clip = c.views_per_clip;
  cfg.num_frames = c.num_frames;
  cfg.fps = c.fps;
  cfg.bump_half_width = c.bump_half_width;
  cfg.split = split_of(c.split);
  validate_synth_config(cfg);
  return cfg;
}

}  // namespace

extern "C" {

const char* egopnr_status_name(egopnr_status status) {
  switch (status) {
    case EGOPNR_OK: return "ok";
    case EGOPNR_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case EGOPNR_ERR_PARSE: return "parse_error";
    case EGOPNR_ERR_VALIDATION: return "validation_error";
    case EGOPNR_ERR_IO: return "io_error";
    case EGOPNR_ERR_FORMAT: return "format_error";
    case EGOPNR_ERR_NUMERIC: return "numeric_error";
    case EGOPNR_ERR_CONTRACT: return "contract_error";
    case EGOPNR_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* egopnr_last_error(void) { return g_last_error.c_str(); }

egopnr_status egopnr_manifest_parse(const char* json_text, egopnr_manifest** out) {
  if (!json_text || !out) return fail_invalid("null argument");
  return guarded([&]() {
    auto* handle = new egopnr_manifest{parse_manifest(json_text)};
    *out = handle;
  });
}

egopnr_status egopnr_manifest_load(const char* path, egopnr_manifest** out) {
  if (!path || !out) return fail_invalid("null argument");
  return guarded([&]() { *out = new egopnr_manifest{read_manifest_file(path)}; });
}

egopnr_status egopnr_manifest_save(const egopnr_manifest* manifest, const char* path) {
  if (!manifest || !path) return fail_invalid("null argument");
  return guarded([&]() { write_manifest_file(manifest->value, path); });
}

int64_t egopnr_manifest_clip_count(const egopnr_manifest* manifest) {
  return manifest ? static_cast<int64_t>(manifest->value.clips.size()) : 0;
}

void egopnr_manifest_free(egopnr_manifest* manifest) { delete manifest; }

egopnr_status egopnr_features_load(const char* path, egopnr_features** out) {
  if (!path || !out) return fail_invalid("null argument");
  return guarded([&]() { *out = new egopnr_features{read_features_file(path)}; });
}

egopnr_status egopnr_features_save(const egopnr_features* features, const char* path) {
  if (!features || !path) return fail_invalid("null argument");
  return guarded([&]() { write_features_file(features->value, path); });
}

void egopnr_features_free(egopnr_features* features) { delete features; }

void egopnr_synth_config_init(egopnr_synth_config* cfg) {
  if (!cfg) return;
  SynthConfig d;
  cfg->clip_count = d.clip_count;
  cfg->p_pos = d.p_pos;
  cfg->prior = d.prior == PnrPrior::BetaPeaked ? EGOPNR_PRIOR_BETA : EGOPNR_PRIOR_UNIFORM;
  cfg->prior_fraction = d.prior_fraction;
  cfg->snr = d.snr;
  cfg->feature_dim = d.feature_dim;
  cfg->views_per_clip = d.views_per_clip;
  cfg->num_frames = d.num_frames;
  cfg->fps = d.fps;
  cfg->bump_half_width = d.bump_half_width;
  cfg->split = EGOPNR_SPLIT_TRAIN;
}

egopnr_status egopnr_generate_manifest(const egopnr_synth_config* cfg, uint64_t seed,
                                       egopnr_manifest** out) {
  if (!cfg || !out) return fail_invalid("null argument");
  return guarded([&]() { *out = new egopnr_manifest{generate_manifest(synth_of(*cfg), seed)}; });
}

egopnr_status egopnr_generate_synthetic(const egopnr_synth_config* cfg, uint64_t seed,
                                        egopnr_manifest** out_manifest,
                                        egopnr_features** out_features) {
  if (!cfg || !out_manifest || !out_features) return fail_invalid("null argument");
  return guarded([&]() {
    auto [manifest, store] = generate_synthetic(synth_of(*cfg), seed);
    *out_manifest = new egopnr_manifest{std::move(manifest)};
    *out_features = new egopnr_features{std::move(store)};
  });
}

egopnr_status egopnr_half_gap_expected_shift(int32_t n, double fps, int32_t s_min, int32_t s_max,
                                             double* out_seconds) {
  if (!out_seconds) return fail_invalid("null argument");
  return guarded([&]() { *out_seconds = half_gap_expected_shift(n, fps, s_min, s_max); });
}

egopnr_status egopnr_monte_carlo_shift(int sampler, int32_t n, double fps, uint64_t trials,
                                       uint64_t seed, int32_t fixed_length_frames,
                                       egopnr_shift_stats* out) {
  if (!out) return fail_invalid("null argument");
  return guarded([&]() {
    MonteCarloConfig cfg;
    cfg.kind = sampler_of(sampler);
    cfg.n = n;
    cfg.fps = fps;
    cfg.trials = trials;
    cfg.seed = seed;
    if (fixed_length_frames > 0) cfg.fixed_length_frames = fixed_length_frames;
    const ShiftStats stats = monte_carlo_shift(cfg);
    out->mean_s = stats.mean_s;
    out->std_s = stats.std_s;
    out->max_s = stats.max_s;
    out->trials = stats.trials;
  });
}

egopnr_status egopnr_train_run(const char* config_json, const egopnr_manifest* train_manifest,
                               const egopnr_manifest* val_manifest,
                               const egopnr_features* train_features,
                               const egopnr_features* val_features, const char* out_dir,
                               egopnr_model** out_best) {
  if (!config_json || !train_manifest || !val_manifest || !train_features || !val_features ||
      !out_best) {
    return fail_invalid("null argument");
  }
  return guarded([&]() {
    const TrainConfig cfg = parse_train_config(config_json);
    TrainResult result =
        train(train_manifest->value, val_manifest->value, train_features->value,
              val_features->value, cfg, out_dir ? out_dir : std::string());
    *out_best = new egopnr_model{result.model_cfg, std::move(result.best_params)};
  });
}

egopnr_status egopnr_model_load(const char* path, egopnr_model** out) {
  if (!path || !out) return fail_invalid("null argument");
  return guarded([&]() {
    auto [cfg, params] = load_checkpoint(path);
    *out = new egopnr_model{cfg, std::move(params)};
  });
}

egopnr_status egopnr_model_save(const egopnr_model* model, const char* path) {
  if (!model || !path) return fail_invalid("null argument");
  return guarded([&]() { save_checkpoint(model->cfg, model->params, path); });
}

void egopnr_model_free(egopnr_model* model) { delete model; }

egopnr_status egopnr_evaluate(const egopnr_model* model, const egopnr_manifest* manifest,
                              const egopnr_features* features, int32_t views,
                              char** out_report_json, char** out_per_clip_csv) {
  if (!model || !manifest || !features || !out_report_json) {
    return fail_invalid("null argument");
  }
  return guarded([&]() {
    std::vector<PerClipRow> rows;
    const MetricsReport report =
        evaluate_model(model->cfg, model->params, manifest->value, features->value, views,
                       out_per_clip_csv ? &rows : nullptr);
    *out_report_json = dup_string(metrics_to_json(report));
    if (out_per_clip_csv) *out_per_clip_csv = dup_string(per_clip_csv(rows));
  });
}

egopnr_status egopnr_baseline(const egopnr_manifest* manifest, int mode, double fraction,
                              char** out_report_json) {
  if (!manifest || !out_report_json) return fail_invalid("null argument");
  return guarded([&]() {
    MetricsReport report;
    switch (mode) {
      case EGOPNR_BASELINE_POSITIVE:
        report = baseline_always_positive(manifest->value);
        break;
      case EGOPNR_BASELINE_CENTER:
        report = baseline_fixed_fraction(manifest->value, 0.5);
        break;
      case EGOPNR_BASELINE_FIXED:
        report = baseline_fixed_fraction(manifest->value, fraction);
        break;
      default:
        raise(ErrorKind::InvalidArgument, "unknown baseline mode " + std::to_string(mode));
    }
    *out_report_json = dup_string(metrics_to_json(report));
  });
}

void egopnr_string_free(char* s) { std::free(s); }

}  // extern "C"
