#include "optim.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace egopnr {

void validate_optim_config(const OptimConfig& cfg) {
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    raise(ErrorKind::InvalidArgument, "betas must be in [0, 1)");
  }
  if (cfg.batch_size < 1) raise(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  if (cfg.warmup_epochs < 0 || cfg.total_epochs < 1 || cfg.warmup_epochs > cfg.total_epochs) {
    raise(ErrorKind::InvalidArgument, "warmup_epochs must be in [0, total_epochs]");
  }
  if (!(cfg.layer_decay > 0.0 && cfg.layer_decay <= 1.0)) {
    raise(ErrorKind::InvalidArgument, "layer_decay must be in (0, 1]");
  }
  if (cfg.weight_decay < 0.0) raise(ErrorKind::InvalidArgument, "weight_decay must be >= 0");
  if (!(cfg.eps > 0.0)) raise(ErrorKind::InvalidArgument, "eps must be > 0");
  if (cfg.min_lr < 0.0) raise(ErrorKind::InvalidArgument, "min_lr must be >= 0");
}

double scaled_base_lr(const OptimConfig& cfg) {
  return cfg.base_lr * static_cast<double>(cfg.batch_size) / 256.0;
}

double lr_at(std::int64_t step, std::int64_t steps_per_epoch, const OptimConfig& cfg) {
  if (step < 0 || steps_per_epoch < 1) {
    raise(ErrorKind::InvalidArgument, "lr_at: step >= 0 and steps_per_epoch >= 1 required");
  }
  const double peak = scaled_base_lr(cfg);
  const std::int64_t warmup_steps = static_cast<std::int64_t>(cfg.warmup_epochs) * steps_per_epoch;
  const std::int64_t total_steps = static_cast<std::int64_t>(cfg.total_epochs) * steps_per_epoch;
  if (step < warmup_steps) {
    return cfg.warmup_lr +
           (peak - cfg.warmup_lr) * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  const std::int64_t decay_steps = total_steps - warmup_steps;
  double progress = decay_steps > 0
                        ? static_cast<double>(step - warmup_steps) / static_cast<double>(decay_steps)
                        : 1.0;
  progress = std::clamp(progress, 0.0, 1.0);
  return cfg.min_lr + 0.5 * (peak - cfg.min_lr) * (1.0 + std::cos(M_PI * progress));
}

double layer_lr_scale(int layer_index, int num_layers, double decay) {
  double scale = 1.0;
  for (int i = 0; i < num_layers - layer_index; ++i) scale *= decay;
  return scale;
}

AdamWState init_adamw_state(ModelParams& params, const ModelConfig& cfg) {
  AdamWState state;
  for (const TensorRef& ref : tensor_refs(params, cfg)) {
    state.m.emplace_back(ref.data->size(), 0.0);
    state.v.emplace_back(ref.data->size(), 0.0);
  }
  return state;
}

void adamw_step(ModelParams& params, ModelParams& grads, AdamWState& state, double lr,
                const OptimConfig& cfg, const ModelConfig& model_cfg) {
  auto prefs = tensor_refs(params, model_cfg);
  auto grefs = tensor_refs(grads, model_cfg);
  if (state.m.size() != prefs.size()) {
    raise(ErrorKind::Contract, "optimizer state does not match the parameter set");
  }
  state.t += 1;
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  for (std::size_t ti = 0; ti < prefs.size(); ++ti) {
    Vec& p = *prefs[ti].data;
    const Vec& g = *grefs[ti].data;
    Vec& m = state.m[ti];
    Vec& v = state.v[ti];
    if (g.size() != p.size()) raise(ErrorKind::Contract, "gradient shape mismatch");
    const double group_lr =
        lr * layer_lr_scale(prefs[ti].layer_index, model_cfg.depth, cfg.layer_decay);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi)) {
        raise(ErrorKind::Numeric, "non-finite gradient in tensor " + prefs[ti].name);
      }
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= group_lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p[i]);
    }
  }
}

}  // namespace egopnr
