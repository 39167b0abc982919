#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "labels.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace egopnr {

struct ModelConfig {
  int feature_dim = 16;
  int hidden_dim = 384;
  int depth = 2;
  int n_frames = 16;
  double drop_path_rate = 0.1;
  // Amplitude of the fixed slot-phase encoding added to the input. Mean
  // pooling is order-invariant, so without the encoding the temporal head
  // could never tell the slots apart.
  double pos_scale = 16.0;

  int temporal_classes() const { return n_frames + 1; }
};

void validate_model_config(const ModelConfig& cfg);

struct Block {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;
};

// Trunk: input projection, then `depth` residual MLP blocks
// (linear -> softplus -> linear, residual add), mean pool over frames,
// and two affine heads on the pooled vector.
struct ModelParams {
  Mat stem_w;  // [hidden x feature_dim]
  Vec stem_b;
  std::vector<Block> blocks;
  Mat oscc_w;  // [2 x hidden]
  Vec oscc_b;
  Mat temporal_w;  // [(n_frames + 1) x hidden]
  Vec temporal_b;
};

// Named view over every parameter tensor, in declaration order. layer_index
// drives layer-wise lr decay: input projection and block k share index k
// (the stem joins the earliest group), heads sit at index depth.
struct TensorRef {
  std::string name;
  Vec* data;
  std::vector<int> shape;
  int layer_index;
};

std::vector<TensorRef> tensor_refs(ModelParams& params, const ModelConfig& cfg);

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Fixed sinusoidal encoding, [n_frames x feature_dim], scaled by pos_scale.
Mat positional_encoding(const ModelConfig& cfg);

// Per-clip stochastic depth decisions, one per block.
struct DropMask {
  std::vector<std::uint8_t> keep;
};

DropMask draw_drop_mask(const ModelConfig& cfg, Rng& rng);

struct HeadLogits {
  Vec oscc;
  Vec temporal;
};

// Activations are held transposed ([channels x frames]) so the per-row
// kernels stream contiguous frame vectors. Buffers are reused across calls.
struct ForwardCache {
  Mat input_t;                 // feature_dim x n, positional encoding added
  std::vector<Mat> h_t;        // depth + 1 stages of hidden x n
  std::vector<Mat> act_t;      // activation(u) per block
  std::vector<Mat> gate_t;     // activation derivative per block
  std::vector<double> branch_scale;  // 0 or 1/(1 - rate) per block
  Vec pooled;
};

// mask == nullptr means eval mode: every residual branch is kept at scale 1.
HeadLogits forward(const ModelConfig& cfg, const ModelParams& params,
                   const double* features, const DropMask* mask, ForwardCache& cache);

struct LossBreakdown {
  double total = 0.0;
  double l_oscc = 0.0;
  double l_tl = 0.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
};

// Stable soft-target cross-entropy; writes softmax(logits) - target into
// dlogits when non-null.
double softmax_cross_entropy(const Vec& logits, const Vec& target, Vec* dlogits);

ModelParams zeros_like(const ModelParams& params);

// Mean cross-entropy per head over the batch, combined as
// lambda1 * l_oscc + lambda2 * l_tl, with exact gradients for the given
// drop masks (masks == nullptr: eval-mode forward). Gradients accumulate in
// batch order into `grads`, which is zeroed first.
LossBreakdown loss_and_grad(const ModelConfig& cfg, const ModelParams& params,
                            const std::vector<Example>& batch, double lambda1, double lambda2,
                            const std::vector<DropMask>* masks, ModelParams& grads);

void save_checkpoint(const ModelConfig& cfg, const ModelParams& params, const std::string& path);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path);

// Byte-exact digest of all parameter tensors; used to assert that
// evaluation leaves the model untouched.
std::uint64_t params_digest(const ModelParams& params);

}  // namespace egopnr
