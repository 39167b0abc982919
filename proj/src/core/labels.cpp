#include "labels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace egopnr {

void validate_mix_config(const MixConfig& cfg) {
  if (cfg.mixup_alpha < 0.0 || cfg.cutmix_alpha < 0.0) {
    raise(ErrorKind::InvalidArgument, "mixup/cutmix alpha must be >= 0");
  }
  if (!(cfg.smoothing_eps >= 0.0 && cfg.smoothing_eps < 1.0)) {
    raise(ErrorKind::InvalidArgument, "smoothing_eps must be in [0, 1)");
  }
}

bool is_probability_vector(const Vec& v, double tol) {
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= 0.0)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

TargetPair build_targets(const SampledClip& sampled, const ClipAnnotation& ann) {
  const int n = static_cast<int>(sampled.frame_indices.size());
  TargetPair t;
  t.oscc.assign(2, 0.0);
  t.temporal.assign(static_cast<std::size_t>(n) + 1, 0.0);
  if (ann.has_state_change) {
    if (!sampled.pseudo_pnr_slot) {
      raise(ErrorKind::Contract,
            "clip '" + ann.clip_id + "' has a state change but no pseudo-PNR slot");
    }
    t.oscc[1] = 1.0;
    t.temporal[static_cast<std::size_t>(*sampled.pseudo_pnr_slot)] = 1.0;
  } else {
    t.oscc[0] = 1.0;
    t.temporal[static_cast<std::size_t>(n)] = 1.0;
  }
  return t;
}

Vec smooth(const Vec& target, double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) {
    raise(ErrorKind::InvalidArgument, "smoothing eps must be in [0, 1)");
  }
  const double uniform = 1.0 / static_cast<double>(target.size());
  Vec out(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    out[i] = target[i] + eps * (uniform - target[i]);
  }
  return out;
}

void smooth_targets(TargetPair& targets, double eps) {
  targets.oscc = smooth(targets.oscc, eps);
  targets.temporal = smooth(targets.temporal, eps);
}

TargetPair mix_targets(const TargetPair& a, const TargetPair& b, double lambda) {
  if (a.oscc.size() != b.oscc.size() || a.temporal.size() != b.temporal.size()) {
    raise(ErrorKind::Contract, "target shape mismatch in mix");
  }
  TargetPair out;
  out.oscc.resize(a.oscc.size());
  out.temporal.resize(a.temporal.size());
  for (std::size_t i = 0; i < a.oscc.size(); ++i) {
    out.oscc[i] = lambda * a.oscc[i] + (1.0 - lambda) * b.oscc[i];
  }
  for (std::size_t i = 0; i < a.temporal.size(); ++i) {
    out.temporal[i] = lambda * a.temporal[i] + (1.0 - lambda) * b.temporal[i];
  }
  return out;
}

namespace {

void check_same_shape(const Example& a, const Example& b) {
  if (a.features.size() != b.features.size() || a.n_frames != b.n_frames ||
      a.feature_dim != b.feature_dim) {
    raise(ErrorKind::Contract, "feature shape mismatch in batch mix");
  }
}

std::vector<std::size_t> random_partner_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  return perm;
}

}  // namespace

Example mixup_pair(const Example& a, const Example& b, double lambda) {
  check_same_shape(a, b);
  Example out = a;
  for (std::size_t i = 0; i < out.features.size(); ++i) {
    out.features[i] = lambda * a.features[i] + (1.0 - lambda) * b.features[i];
  }
  out.targets = mix_targets(a.targets, b.targets, lambda);
  return out;
}

Example cutmix_pair(const Example& a, const Example& b, int block_start, int block_len) {
  check_same_shape(a, b);
  if (block_len < 0 || block_start < 0 || block_start + block_len > a.n_frames) {
    raise(ErrorKind::InvalidArgument, "cutmix block outside the frame axis");
  }
  Example out = a;
  const std::size_t dim = static_cast<std::size_t>(a.feature_dim);
  std::copy(b.features.begin() + static_cast<std::ptrdiff_t>(block_start * dim),
            b.features.begin() + static_cast<std::ptrdiff_t>((block_start + block_len) * dim),
            out.features.begin() + static_cast<std::ptrdiff_t>(block_start * dim));
  const double lambda_eff = 1.0 - static_cast<double>(block_len) / a.n_frames;
  out.targets = mix_targets(a.targets, b.targets, lambda_eff);
  return out;
}

std::vector<Example> mixup(const std::vector<Example>& batch, double alpha, Rng& rng) {
  if (batch.size() < 2) raise(ErrorKind::InvalidArgument, "mixup needs a batch of >= 2");
  const std::vector<std::size_t> perm = random_partner_permutation(batch.size(), rng);
  std::vector<Example> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double lambda = alpha > 0.0 ? rng.beta(alpha, alpha) : 1.0;
    out.push_back(mixup_pair(batch[i], batch[perm[i]], lambda));
  }
  return out;
}

std::vector<Example> cutmix_temporal(const std::vector<Example>& batch, double alpha, Rng& rng) {
  if (batch.size() < 2) raise(ErrorKind::InvalidArgument, "cutmix needs a batch of >= 2");
  const std::vector<std::size_t> perm = random_partner_permutation(batch.size(), rng);
  std::vector<Example> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int n = batch[i].n_frames;
    const double lambda = alpha > 0.0 ? rng.beta(alpha, alpha) : 1.0;
    const int block_len = static_cast<int>(std::lround((1.0 - lambda) * n));
    const int block_start =
        block_len >= n ? 0 : static_cast<int>(rng.uniform_int(0, n - block_len));
    out.push_back(cutmix_pair(batch[i], batch[perm[i]], block_start, std::min(block_len, n)));
  }
  return out;
}

}  // namespace egopnr
