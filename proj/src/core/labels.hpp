#pragma once

#include <vector>

#include "annotations.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "tensor.hpp"

namespace egopnr {

// Soft targets for the two heads. `oscc` has 2 entries {no-change, change};
// `temporal` has n_frames + 1 entries, slot classes first and the trailing
// class meaning "no state change".
struct TargetPair {
  Vec oscc;
  Vec temporal;
};

struct MixConfig {
  double mixup_alpha = 0.8;
  double cutmix_alpha = 1.0;
  double smoothing_eps = 0.1;
};

void validate_mix_config(const MixConfig& cfg);

// One training example: model input [n_frames x feature_dim] plus targets.
struct Example {
  std::string clip_id;
  Vec features;
  int n_frames = 0;
  int feature_dim = 0;
  TargetPair targets;
};

TargetPair build_targets(const SampledClip& sampled, const ClipAnnotation& ann);

// (1-eps) * target + eps/K.
Vec smooth(const Vec& target, double eps);

void smooth_targets(TargetPair& targets, double eps);

// lambda * a + (1-lambda) * b, elementwise, for both heads.
TargetPair mix_targets(const TargetPair& a, const TargetPair& b, double lambda);

// Convex blend of example `a` with partner `b` at a given lambda.
Example mixup_pair(const Example& a, const Example& b, double lambda);

// Temporal cutmix: a contiguous block of frames in `a` is replaced by the
// same positions from `b`; targets are blended with the realized frame
// fraction. block_start indexes frames, block_len in [0, n_frames].
Example cutmix_pair(const Example& a, const Example& b, int block_start, int block_len);

// Batch forms: each element i is mixed with a random partner perm[i], with a
// fresh Beta(alpha, alpha) lambda per pair. alpha == 0 disables mixing.
std::vector<Example> mixup(const std::vector<Example>& batch, double alpha, Rng& rng);
std::vector<Example> cutmix_temporal(const std::vector<Example>& batch, double alpha, Rng& rng);

bool is_probability_vector(const Vec& v, double tol = 1e-9);

}  // namespace egopnr
