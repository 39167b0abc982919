#pragma once

#include <cstdint>
#include <vector>

#include "model.hpp"
#include "tensor.hpp"

namespace egopnr {

struct OptimConfig {
  double base_lr = 5e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 32;
  double warmup_lr = 1e-6;
  int warmup_epochs = 5;
  int total_epochs = 100;
  double layer_decay = 0.75;
  double min_lr = 0.0;
};

void validate_optim_config(const OptimConfig& cfg);

// lr = base_lr * batch_size / 256; the warmup lr is not scaled.
double scaled_base_lr(const OptimConfig& cfg);

// Linear warmup from warmup_lr to the scaled peak over the first
// warmup_epochs, then cosine decay to min_lr over the remaining epochs.
// Continuous at the boundary; clamps to min_lr past the schedule end.
double lr_at(std::int64_t step, std::int64_t steps_per_epoch, const OptimConfig& cfg);

// decay^(num_layers - layer_index); heads (index == num_layers) get 1.
double layer_lr_scale(int layer_index, int num_layers, double decay);

struct AdamWState {
  std::vector<Vec> m;
  std::vector<Vec> v;
  std::int64_t t = 0;
};

AdamWState init_adamw_state(ModelParams& params, const ModelConfig& cfg);

// Decoupled AdamW step. `lr` is the schedule value; each tensor's effective
// rate is lr * layer_lr_scale(tensor.layer_index, depth, layer_decay).
void adamw_step(ModelParams& params, ModelParams& grads, AdamWState& state, double lr,
                const OptimConfig& cfg, const ModelConfig& model_cfg);

}  // namespace egopnr
