#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace egopnr {

enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

// One 8 s / 30 fps clip record. pnr_frame is present exactly when the clip
// contains a state change.
struct ClipAnnotation {
  std::string clip_id;
  double fps = 30.0;
  int num_frames = 240;
  bool has_state_change = false;
  std::optional<int> pnr_frame;

  double duration_s() const { return num_frames / fps; }
};

struct DatasetManifest {
  Split split = Split::Train;
  int feature_dim = 16;
  int views_per_clip = 3;
  std::vector<ClipAnnotation> clips;
};

// Throws Error(Validation) naming the offending clip when an invariant fails.
void validate_manifest(const DatasetManifest& manifest);

// JSON text <-> manifest. Unknown keys are rejected. Parse failures carry
// 1-based line information.
DatasetManifest parse_manifest(const std::string& json_text);
std::string manifest_to_json(const DatasetManifest& manifest);

DatasetManifest read_manifest_file(const std::string& path);
void write_manifest_file(const DatasetManifest& manifest, const std::string& path);

// Per-clip feature tensors of shape [views x frames x dim], view-major then
// frame-major, stored as f32. Clip order is preserved so serialization is
// byte-stable.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(int views, int frames, int dim)
      : views_(views), frames_(frames), dim_(dim) {}

  int views() const { return views_; }
  int frames() const { return frames_; }
  int dim() const { return dim_; }
  std::size_t clip_count() const { return order_.size(); }
  std::size_t values_per_clip() const {
    return static_cast<std::size_t>(views_) * frames_ * dim_;
  }

  bool contains(const std::string& clip_id) const {
    return index_.count(clip_id) != 0;
  }
  const std::vector<std::string>& clip_ids() const { return order_; }

  // Takes ownership of `values`; size must equal values_per_clip().
  void insert(const std::string& clip_id, std::vector<float> values);

  const std::vector<float>& values(const std::string& clip_id) const;

  // Pointer to the frame-major block of one view: frames*dim floats.
  const float* view_data(const std::string& clip_id, int view) const;

 private:
  int views_ = 0;
  int frames_ = 0;
  int dim_ = 0;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<float>> index_;
  std::vector<std::vector<float>> data_;
};

FeatureStore read_features_file(const std::string& path);
void write_features_file(const FeatureStore& store, const std::string& path);

enum class PnrPrior { Uniform, BetaPeaked };

struct SynthConfig {
  std::int64_t clip_count = 0;
  double p_pos = 0.5;
  PnrPrior prior = PnrPrior::Uniform;
  // Peak of the beta prior as a fraction of clip duration.
  double prior_fraction = 0.45;
  double prior_concentration = 8.0;
  double snr = 4.0;
  int feature_dim = 16;
  int views_per_clip = 3;
  int num_frames = 240;
  double fps = 30.0;
  // Positive clips get an additive bump on all channels over
  // [pnr - half_width, pnr + half_width], linearly tapered from snr at the
  // center to snr/(half_width+1) at the edges.
  int bump_half_width = 7;
  Split split = Split::Train;
};

void validate_synth_config(const SynthConfig& cfg);

// Labels only; cheap enough for multi-million-clip runs.
DatasetManifest generate_manifest(const SynthConfig& cfg, std::uint64_t seed);

// Features for an existing manifest. Uses a stream derived from the same
// seed, so generate_synthetic(cfg, seed) is a pure function of (cfg, seed).
FeatureStore generate_features(const DatasetManifest& manifest, const SynthConfig& cfg,
                               std::uint64_t seed);

std::pair<DatasetManifest, FeatureStore> generate_synthetic(const SynthConfig& cfg,
                                                            std::uint64_t seed);

}  // namespace egopnr
