#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "annotations.hpp"
#include "rng.hpp"

namespace egopnr {

struct TrimmedRange {
  int start_frame = 0;
  int length_frames = 0;  // S

  int end_frame() const { return start_frame + length_frames; }
};

enum class SamplerKind { EvenlySpaced, StratifiedRandom, UniformRandom };

const char* sampler_name(SamplerKind kind);
SamplerKind sampler_from_name(const std::string& name);

struct SampledClip {
  std::string clip_id;
  std::vector<int> frame_indices;  // strictly increasing, inside `trimmed`
  TrimmedRange trimmed;
  std::optional<int> pseudo_pnr_slot;
};

struct TrimConfig {
  double min_duration_s = 5.0;
  double max_duration_s = 8.0;
};

// Trimmed length range in frames for a given fps.
int trim_min_frames(const TrimConfig& cfg, double fps);
int trim_max_frames(const TrimConfig& cfg, double fps);

// Uniform duration u on [min, max] seconds, S = round(u * fps), uniform
// window start; for state-change clips the window is shifted by the minimal
// amount needed to contain the PNR frame.
TrimmedRange trim_clip(const ClipAnnotation& ann, Rng& rng, const TrimConfig& cfg = {});

// Same placement rule with the duration forced, for deterministic callers.
TrimmedRange trim_clip_with_duration(const ClipAnnotation& ann, double duration_s, Rng& rng,
                                     const TrimConfig& cfg = {});

// The whole clip as one window.
TrimmedRange full_range(const ClipAnnotation& ann);

std::vector<int> sample_frames(const TrimmedRange& trimmed, int n, SamplerKind kind, Rng& rng);

// Slot whose frame is nearest pnr_frame; ties go to the smaller slot.
int assign_pseudo_pnr(const std::vector<int>& frame_indices, int pnr_frame);

SampledClip sample_clip(const ClipAnnotation& ann, int n, SamplerKind kind, Rng& rng,
                        const TrimConfig& cfg = {});

// The half-gap bound E[S] / (n * fps * 2) in seconds, with E[S] taken as the
// midpoint of [s_min, s_max].
double half_gap_expected_shift(int n, double fps, int s_min, int s_max);

struct ShiftStats {
  double mean_s = 0.0;
  double std_s = 0.0;
  double max_s = 0.0;
  std::uint64_t trials = 0;
};

struct MonteCarloConfig {
  SamplerKind kind = SamplerKind::EvenlySpaced;
  int n = 16;
  double fps = 30.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  // When set, every trial uses this trimmed length instead of a fresh draw.
  std::optional<int> fixed_length_frames;
  TrimConfig trim;
  int threads = 0;  // 0 = hardware concurrency
};

// Per trial: trim an 8 s clip, place a PNR uniformly inside the window,
// sample n frames, and measure |nearest sampled frame - PNR| / fps.
// Trial t draws from a stream derived from (seed, t) and partial sums are
// combined over fixed-size chunks in index order, so the result does not
// depend on how trials are scheduled.
ShiftStats monte_carlo_shift(const MonteCarloConfig& cfg);

}  // namespace egopnr
