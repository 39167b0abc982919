#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"

namespace egopnr {

using nlohmann::ordered_json;

const char* selection_metric_name(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::OsccAccuracy: return "oscc_accuracy";
    case SelectionMetric::TemporalError: return "temporal_error";
    case SelectionMetric::Combined: return "combined";
  }
  return "combined";
}

SelectionMetric selection_metric_from_name(const std::string& name) {
  if (name == "oscc_accuracy") return SelectionMetric::OsccAccuracy;
  if (name == "temporal_error") return SelectionMetric::TemporalError;
  if (name == "combined") return SelectionMetric::Combined;
  raise(ErrorKind::InvalidArgument, "unknown selection metric '" + name + "'");
}

void validate_train_config(const TrainConfig& cfg) {
  validate_optim_config(cfg.optim);
  validate_mix_config(cfg.mix);
  validate_model_config(cfg.model);
  if (cfg.n_frames < 1) raise(ErrorKind::InvalidArgument, "n_frames must be >= 1");
  if (cfg.epochs < 1) raise(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (cfg.eval_every < 1) raise(ErrorKind::InvalidArgument, "eval_every must be >= 1");
  if (cfg.eval_views < 0) raise(ErrorKind::InvalidArgument, "eval_views must be >= 0");
  if (!std::isfinite(cfg.lambda1) || !std::isfinite(cfg.lambda2)) {
    raise(ErrorKind::InvalidArgument, "loss weights must be finite");
  }
  if (cfg.model.n_frames != cfg.n_frames) {
    raise(ErrorKind::InvalidArgument, "model n_frames must equal the sampling n_frames");
  }
}

namespace {

const std::set<std::string> kConfigKeys = {
    "optimizer",     "base_lr",       "weight_decay", "adam_betas",   "adam_eps",
    "batch_size",    "lr_schedule",   "epochs",       "warmup_lr",    "warmup_epochs",
    "layer_decay",   "min_lr",        "loss_weights", "drop_path",    "mixup",
    "cutmix",        "label_smoothing", "patch_size", "tubelet_size", "input_size",
    "augmentation",  "n_frames",      "sampler",      "seed",         "eval_every",
    "eval_views",    "selection_metric", "checkpoint_dir", "model"};

const std::set<std::string> kModelKeys = {"feature_dim", "hidden_dim", "depth", "pos_scale"};

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    raise(ErrorKind::Parse, std::string("train config parse error: ") + e.what());
  }
  if (!root.is_object()) raise(ErrorKind::Parse, "train config must be a JSON object");
  for (auto it = root.begin(); it != root.end(); ++it) {
    if (!kConfigKeys.count(it.key())) {
      raise(ErrorKind::Validation, "train config: unknown key '" + it.key() + "'");
    }
  }

  TrainConfig cfg;
  try {
    const std::string optimizer = root.value("optimizer", std::string("adamw"));
    if (optimizer != "adamw") {
      raise(ErrorKind::Validation, "unsupported optimizer '" + optimizer + "'");
    }
    const std::string sched = root.value("lr_schedule", std::string("cosine"));
    if (sched != "cosine") {
      raise(ErrorKind::Validation, "unsupported lr_schedule '" + sched + "'");
    }
    cfg.optim.base_lr = root.value("base_lr", cfg.optim.base_lr);
    cfg.optim.weight_decay = root.value("weight_decay", cfg.optim.weight_decay);
    if (root.contains("adam_betas")) {
      const auto betas = root.at("adam_betas");
      if (!betas.is_array() || betas.size() != 2) {
        raise(ErrorKind::Validation, "adam_betas must be a 2-element array");
      }
      cfg.optim.beta1 = betas[0].get<double>();
      cfg.optim.beta2 = betas[1].get<double>();
    }
    cfg.optim.eps = root.value("adam_eps", cfg.optim.eps);
    cfg.optim.batch_size = root.value("batch_size", cfg.optim.batch_size);
    cfg.epochs = root.value("epochs", cfg.epochs);
    cfg.optim.total_epochs = cfg.epochs;
    cfg.optim.warmup_lr = root.value("warmup_lr", cfg.optim.warmup_lr);
    cfg.optim.warmup_epochs = root.value("warmup_epochs", cfg.optim.warmup_epochs);
    cfg.optim.layer_decay = root.value("layer_decay", cfg.optim.layer_decay);
    cfg.optim.min_lr = root.value("min_lr", cfg.optim.min_lr);
    if (root.contains("loss_weights")) {
      const auto lw = root.at("loss_weights");
      if (!lw.is_array() || lw.size() != 2) {
        raise(ErrorKind::Validation, "loss_weights must be a 2-element array");
      }
      cfg.lambda1 = lw[0].get<double>();
      cfg.lambda2 = lw[1].get<double>();
    }
    cfg.model.drop_path_rate = root.value("drop_path", cfg.model.drop_path_rate);
    cfg.mix.mixup_alpha = root.value("mixup", cfg.mix.mixup_alpha);
    cfg.mix.cutmix_alpha = root.value("cutmix", cfg.mix.cutmix_alpha);
    cfg.mix.smoothing_eps = root.value("label_smoothing", cfg.mix.smoothing_eps);
    cfg.recorded.patch_size = root.value("patch_size", cfg.recorded.patch_size);
    cfg.recorded.tubelet_size = root.value("tubelet_size", cfg.recorded.tubelet_size);
    cfg.recorded.input_size = root.value("input_size", cfg.recorded.input_size);
    cfg.recorded.augmentation = root.value("augmentation", cfg.recorded.augmentation);
    cfg.n_frames = root.value("n_frames", cfg.n_frames);
    cfg.sampler = sampler_from_name(root.value("sampler", sampler_name(cfg.sampler)));
    cfg.seed = root.value("seed", cfg.seed);
    cfg.eval_every = root.value("eval_every", cfg.eval_every);
    cfg.eval_views = root.value("eval_views", cfg.eval_views);
    cfg.selection =
        selection_metric_from_name(root.value("selection_metric", selection_metric_name(cfg.selection)));
    cfg.checkpoint_dir = root.value("checkpoint_dir", cfg.checkpoint_dir);
    if (root.contains("model")) {
      const auto& model = root.at("model");
      if (!model.is_object()) raise(ErrorKind::Validation, "'model' must be an object");
      for (auto it = model.begin(); it != model.end(); ++it) {
        if (!kModelKeys.count(it.key())) {
          raise(ErrorKind::Validation, "train config model: unknown key '" + it.key() + "'");
        }
      }
      cfg.model.feature_dim = model.value("feature_dim", cfg.model.feature_dim);
      cfg.model.hidden_dim = model.value("hidden_dim", cfg.model.hidden_dim);
      cfg.model.depth = model.value("depth", cfg.model.depth);
      cfg.model.pos_scale = model.value("pos_scale", cfg.model.pos_scale);
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::Validation, std::string("train config field error: ") + e.what());
  }
  cfg.model.n_frames = cfg.n_frames;
  validate_train_config(cfg);
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  ordered_json root;
  root["optimizer"] = "adamw";
  root["base_lr"] = cfg.optim.base_lr;
  root["weight_decay"] = cfg.optim.weight_decay;
  root["adam_betas"] = {cfg.optim.beta1, cfg.optim.beta2};
  root["adam_eps"] = cfg.optim.eps;
  root["batch_size"] = cfg.optim.batch_size;
  root["lr_schedule"] = "cosine";
  root["epochs"] = cfg.epochs;
  root["warmup_lr"] = cfg.optim.warmup_lr;
  root["warmup_epochs"] = cfg.optim.warmup_epochs;
  root["layer_decay"] = cfg.optim.layer_decay;
  root["min_lr"] = cfg.optim.min_lr;
  root["loss_weights"] = {cfg.lambda1, cfg.lambda2};
  root["drop_path"] = cfg.model.drop_path_rate;
  root["mixup"] = cfg.mix.mixup_alpha;
  root["cutmix"] = cfg.mix.cutmix_alpha;
  root["label_smoothing"] = cfg.mix.smoothing_eps;
  root["patch_size"] = cfg.recorded.patch_size;
  root["tubelet_size"] = cfg.recorded.tubelet_size;
  root["input_size"] = cfg.recorded.input_size;
  root["augmentation"] = cfg.recorded.augmentation;
  root["n_frames"] = cfg.n_frames;
  root["sampler"] = sampler_name(cfg.sampler);
  root["seed"] = cfg.seed;
  root["eval_every"] = cfg.eval_every;
  root["eval_views"] = cfg.eval_views;
  root["selection_metric"] = selection_metric_name(cfg.selection);
  if (!cfg.checkpoint_dir.empty()) root["checkpoint_dir"] = cfg.checkpoint_dir;
  ordered_json model;
  model["feature_dim"] = cfg.model.feature_dim;
  model["hidden_dim"] = cfg.model.hidden_dim;
  model["depth"] = cfg.model.depth;
  model["pos_scale"] = cfg.model.pos_scale;
  root["model"] = std::move(model);
  return root.dump(2) + "\n";
}

namespace {

ordered_json record_to_json(const EpochRecord& r) {
  ordered_json line;
  line["epoch"] = r.epoch;
  line["train_total"] = r.train_loss.total;
  line["train_oscc"] = r.train_loss.l_oscc;
  line["train_tl"] = r.train_loss.l_tl;
  line["lambda1"] = r.train_loss.lambda1;
  line["lambda2"] = r.train_loss.lambda2;
  if (r.val_oscc_accuracy) {
    line["val_oscc_accuracy"] = *r.val_oscc_accuracy;
  } else {
    line["val_oscc_accuracy"] = nullptr;
  }
  if (r.val_abs_temporal_error_s) {
    line["val_abs_temporal_error_s"] = *r.val_abs_temporal_error_s;
  } else {
    line["val_abs_temporal_error_s"] = nullptr;
  }
  line["val_temporal_counted"] = r.val_temporal_counted;
  line["lr"] = r.lr;
  return line;
}

}  // namespace

std::string history_to_jsonl(const TrainHistory& history) {
  std::string out;
  for (const EpochRecord& r : history.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

double selection_score(const EpochRecord& record, SelectionMetric metric, double duration_s) {
  switch (metric) {
    case SelectionMetric::OsccAccuracy:
      return record.val_oscc_accuracy.value_or(0.0);
    case SelectionMetric::TemporalError:
      return record.val_abs_temporal_error_s ? -*record.val_abs_temporal_error_s
                                             : -std::numeric_limits<double>::infinity();
    case SelectionMetric::Combined: {
      const double acc = record.val_oscc_accuracy.value_or(0.0);
      const double err = record.val_abs_temporal_error_s.value_or(duration_s);
      return acc - err / duration_s;
    }
  }
  return 0.0;
}

int select_best(const std::vector<EpochRecord>& records, SelectionMetric metric,
                double duration_s) {
  if (records.empty()) raise(ErrorKind::InvalidArgument, "select_best: empty history");
  int best = 0;
  double best_score = selection_score(records[0], metric, duration_s);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const double score = selection_score(records[i], metric, duration_s);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(i);
    }
  }
  return best;
}

namespace {

void check_features_cover(const DatasetManifest& manifest, const FeatureStore& store,
                          const char* which) {
  for (const ClipAnnotation& clip : manifest.clips) {
    if (!store.contains(clip.clip_id)) {
      raise(ErrorKind::Contract, std::string(which) + " features missing clip '" +
                                     clip.clip_id + "'");
    }
    if (store.frames() != clip.num_frames) {
      raise(ErrorKind::Contract, std::string(which) + " feature frame count " +
                                     std::to_string(store.frames()) +
                                     " does not match clip '" + clip.clip_id + "'");
    }
  }
}

double mean_duration_s(const DatasetManifest& manifest) {
  if (manifest.clips.empty()) return 8.0;
  double sum = 0.0;
  for (const ClipAnnotation& clip : manifest.clips) sum += clip.duration_s();
  return sum / static_cast<double>(manifest.clips.size());
}

}  // namespace

TrainResult train(const DatasetManifest& manifest_train, const DatasetManifest& manifest_val,
                  const FeatureStore& features_train, const FeatureStore& features_val,
                  const TrainConfig& cfg, const std::string& out_dir) {
  validate_train_config(cfg);
  validate_manifest(manifest_train);
  validate_manifest(manifest_val);
  check_features_cover(manifest_train, features_train, "train");
  check_features_cover(manifest_val, features_val, "val");
  if (features_train.dim() != cfg.model.feature_dim) {
    raise(ErrorKind::Contract, "train feature dim does not match the model config");
  }
  if (manifest_train.clips.empty()) raise(ErrorKind::InvalidArgument, "empty training split");

  ModelParams params = init_params(cfg.model, cfg.seed);
  AdamWState state = init_adamw_state(params, cfg.model);
  ModelParams grads = zeros_like(params);

  const std::int64_t n_train = static_cast<std::int64_t>(manifest_train.clips.size());
  const std::int64_t batch = cfg.optim.batch_size;
  const std::int64_t steps_per_epoch = (n_train + batch - 1) / batch;
  const double duration = mean_duration_s(manifest_val);

  TrainResult result;
  result.model_cfg = cfg.model;
  ModelParams best_params = params;
  double best_score = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  std::vector<std::size_t> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);

  std::int64_t global_step = 0;
  Vec gathered;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::from_stream(cfg.seed, {0x73687566ULL, static_cast<std::uint64_t>(epoch)});
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);

    double loss_oscc = 0.0, loss_tl = 0.0;
    std::int64_t examples_seen = 0;
    double last_lr = 0.0;

    for (std::int64_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b * batch);
      const std::size_t end =
          std::min(static_cast<std::size_t>(n_train), begin + static_cast<std::size_t>(batch));
      std::vector<Example> examples;
      examples.reserve(end - begin);
      for (std::size_t pos = begin; pos < end; ++pos) {
        const std::size_t ci = order[pos];
        const ClipAnnotation& clip = manifest_train.clips[ci];
        Rng clip_rng = Rng::from_stream(
            cfg.seed, {0x73616d70ULL, static_cast<std::uint64_t>(epoch), ci});
        const SampledClip sampled = sample_clip(clip, cfg.n_frames, cfg.sampler, clip_rng);
        const int view = static_cast<int>(clip_rng.uniform_below(
            static_cast<std::uint64_t>(features_train.views())));
        Example ex;
        ex.clip_id = clip.clip_id;
        ex.n_frames = cfg.n_frames;
        ex.feature_dim = features_train.dim();
        gather_frames(features_train.view_data(clip.clip_id, view), sampled.frame_indices,
                      features_train.dim(), ex.features);
        ex.targets = build_targets(sampled, clip);
        examples.push_back(std::move(ex));
      }

      Rng mix_rng = Rng::from_stream(
          cfg.seed, {0x6d6978ULL, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)});
      if (examples.size() >= 2) {
        const bool mix_on = cfg.mix.mixup_alpha > 0.0;
        const bool cut_on = cfg.mix.cutmix_alpha > 0.0;
        if (mix_on && cut_on) {
          examples = mix_rng.bernoulli(0.5) ? mixup(examples, cfg.mix.mixup_alpha, mix_rng)
                                            : cutmix_temporal(examples, cfg.mix.cutmix_alpha, mix_rng);
        } else if (mix_on) {
          examples = mixup(examples, cfg.mix.mixup_alpha, mix_rng);
        } else if (cut_on) {
          examples = cutmix_temporal(examples, cfg.mix.cutmix_alpha, mix_rng);
        }
      }
      if (cfg.mix.smoothing_eps > 0.0) {
        for (Example& ex : examples) smooth_targets(ex.targets, cfg.mix.smoothing_eps);
      }

      Rng drop_rng = Rng::from_stream(
          cfg.seed, {0x64726f70ULL, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)});
      std::vector<DropMask> masks;
      masks.reserve(examples.size());
      for (std::size_t i = 0; i < examples.size(); ++i) {
        masks.push_back(draw_drop_mask(cfg.model, drop_rng));
      }

      LossBreakdown bd;
      try {
        bd = loss_and_grad(cfg.model, params, examples, cfg.lambda1, cfg.lambda2, &masks, grads);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Numeric) {
          raise(ErrorKind::Numeric, "epoch " + std::to_string(epoch) + " step " +
                                        std::to_string(b) + ": " + e.what());
        }
        throw;
      }
      const double lr = lr_at(global_step, steps_per_epoch, cfg.optim);
      adamw_step(params, grads, state, lr, cfg.optim, cfg.model);
      last_lr = lr;
      ++global_step;

      const double weight = static_cast<double>(examples.size());
      loss_oscc += bd.l_oscc * weight;
      loss_tl += bd.l_tl * weight;
      examples_seen += static_cast<std::int64_t>(examples.size());
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss.lambda1 = cfg.lambda1;
    record.train_loss.lambda2 = cfg.lambda2;
    record.train_loss.l_oscc = loss_oscc / static_cast<double>(examples_seen);
    record.train_loss.l_tl = loss_tl / static_cast<double>(examples_seen);
    record.train_loss.total =
        cfg.lambda1 * record.train_loss.l_oscc + cfg.lambda2 * record.train_loss.l_tl;
    record.lr = last_lr;

    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      const MetricsReport val = evaluate_model(cfg.model, params, manifest_val, features_val,
                                               cfg.eval_views);
      record.val_oscc_accuracy = val.oscc_accuracy;
      record.val_abs_temporal_error_s = val.abs_temporal_error_mean_s;
      record.val_temporal_counted = val.n_temporal_counted;
    }

    const double score = selection_score(record, cfg.selection, duration);
    if (score > best_score) {
      best_score = score;
      best_epoch = epoch;
      best_params = params;
    }
    result.history.records.push_back(std::move(record));
  }

  result.history.best_epoch = best_epoch;
  result.best_params = std::move(best_params);

  std::string dir = out_dir.empty() ? cfg.checkpoint_dir : out_dir;
  if (!dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) raise(ErrorKind::Io, "cannot create output directory '" + dir + "'");
    const std::string history_path = (std::filesystem::path(dir) / "history.jsonl").string();
    std::ofstream hist(history_path, std::ios::binary | std::ios::trunc);
    if (!hist) raise(ErrorKind::Io, "cannot open '" + history_path + "'");
    const std::string lines = history_to_jsonl(result.history);
    hist.write(lines.data(), static_cast<std::streamsize>(lines.size()));
    if (!hist) raise(ErrorKind::Io, "short write to '" + history_path + "'");
    save_checkpoint(cfg.model, result.best_params,
                    (std::filesystem::path(dir) / "best.ckpt").string());
  }
  return result;
}

}  // namespace egopnr
