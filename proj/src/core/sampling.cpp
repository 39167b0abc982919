#include "sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <thread>

namespace egopnr {

const char* sampler_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::EvenlySpaced: return "even";
    case SamplerKind::StratifiedRandom: return "stratified";
    case SamplerKind::UniformRandom: return "random";
  }
  return "even";
}

SamplerKind sampler_from_name(const std::string& name) {
  if (name == "even") return SamplerKind::EvenlySpaced;
  if (name == "stratified") return SamplerKind::StratifiedRandom;
  if (name == "random") return SamplerKind::UniformRandom;
  raise(ErrorKind::InvalidArgument, "unknown sampler '" + name + "'");
}

int trim_min_frames(const TrimConfig& cfg, double fps) {
  return static_cast<int>(std::lround(cfg.min_duration_s * fps));
}

int trim_max_frames(const TrimConfig& cfg, double fps) {
  return static_cast<int>(std::lround(cfg.max_duration_s * fps));
}

namespace {

TrimmedRange place_window(const ClipAnnotation& ann, int length, Rng& rng) {
  TrimmedRange range;
  range.length_frames = length;
  const int max_start = ann.num_frames - length;
  range.start_frame = max_start == 0 ? 0 : static_cast<int>(rng.uniform_int(0, max_start));
  if (ann.has_state_change) {
    const int pnr = *ann.pnr_frame;
    if (pnr < range.start_frame) {
      range.start_frame = pnr;
    } else if (pnr >= range.start_frame + length) {
      range.start_frame = pnr - length + 1;
    }
  }
  return range;
}

}  // namespace

TrimmedRange trim_clip_with_duration(const ClipAnnotation& ann, double duration_s, Rng& rng,
                                     const TrimConfig& cfg) {
  const int s_min = trim_min_frames(cfg, ann.fps);
  if (ann.num_frames < s_min) {
    raise(ErrorKind::InvalidArgument,
          "clip '" + ann.clip_id + "' has " + std::to_string(ann.num_frames) +
              " frames, fewer than the minimum trimmed length " + std::to_string(s_min));
  }
  int length = static_cast<int>(std::lround(duration_s * ann.fps));
  length = std::min(length, ann.num_frames);
  length = std::max(length, 1);
  return place_window(ann, length, rng);
}

TrimmedRange trim_clip(const ClipAnnotation& ann, Rng& rng, const TrimConfig& cfg) {
  const double u = rng.uniform_range(cfg.min_duration_s, cfg.max_duration_s);
  return trim_clip_with_duration(ann, u, rng, cfg);
}

TrimmedRange full_range(const ClipAnnotation& ann) {
  return TrimmedRange{0, ann.num_frames};
}

namespace {

// First integer >= i*s/n, i.e. the integer segment boundaries of the
// continuous partition [i*s/n, (i+1)*s/n).
inline std::int64_t segment_lo(std::int64_t i, std::int64_t s, std::int64_t n) {
  return (i * s + n - 1) / n;
}

}  // namespace

std::vector<int> sample_frames(const TrimmedRange& trimmed, int n, SamplerKind kind, Rng& rng) {
  const int s = trimmed.length_frames;
  if (n <= 0) raise(ErrorKind::InvalidArgument, "sample_frames: n must be > 0");
  if (n > s) {
    raise(ErrorKind::InvalidArgument, "cannot sample " + std::to_string(n) +
                                          " frames from a window of " + std::to_string(s));
  }
  std::vector<int> indices;
  indices.reserve(static_cast<std::size_t>(n));
  switch (kind) {
    case SamplerKind::EvenlySpaced: {
      for (int i = 0; i < n; ++i) {
        const double pos = (i + 0.5) * static_cast<double>(s) / n;
        indices.push_back(trimmed.start_frame + static_cast<int>(std::floor(pos)));
      }
      break;
    }
    case SamplerKind::StratifiedRandom: {
      for (int i = 0; i < n; ++i) {
        const std::int64_t lo = segment_lo(i, s, n);
        const std::int64_t hi = segment_lo(i + 1, s, n) - 1;
        indices.push_back(trimmed.start_frame +
                          static_cast<int>(rng.uniform_int(lo, hi)));
      }
      break;
    }
    case SamplerKind::UniformRandom: {
      // Floyd's algorithm: n distinct values in [0, s).
      std::vector<int> picked;
      picked.reserve(static_cast<std::size_t>(n));
      for (int j = s - n; j < s; ++j) {
        const int t = static_cast<int>(rng.uniform_int(0, j));
        if (std::find(picked.begin(), picked.end(), t) != picked.end()) {
          picked.push_back(j);
        } else {
          picked.push_back(t);
        }
      }
      std::sort(picked.begin(), picked.end());
      for (int v : picked) indices.push_back(trimmed.start_frame + v);
      break;
    }
  }
  return indices;
}

int assign_pseudo_pnr(const std::vector<int>& frame_indices, int pnr_frame) {
  if (frame_indices.empty()) {
    raise(ErrorKind::Contract, "assign_pseudo_pnr: empty frame list");
  }
  int best_slot = 0;
  int best_dist = std::abs(frame_indices[0] - pnr_frame);
  for (std::size_t i = 1; i < frame_indices.size(); ++i) {
    const int dist = std::abs(frame_indices[i] - pnr_frame);
    if (dist < best_dist) {
      best_dist = dist;
      best_slot = static_cast<int>(i);
    }
  }
  return best_slot;
}

SampledClip sample_clip(const ClipAnnotation& ann, int n, SamplerKind kind, Rng& rng,
                        const TrimConfig& cfg) {
  SampledClip out;
  out.clip_id = ann.clip_id;
  out.trimmed = trim_clip(ann, rng, cfg);
  out.frame_indices = sample_frames(out.trimmed, n, kind, rng);
  if (ann.has_state_change) {
    out.pseudo_pnr_slot = assign_pseudo_pnr(out.frame_indices, *ann.pnr_frame);
  }
  return out;
}

double half_gap_expected_shift(int n, double fps, int s_min, int s_max) {
  if (n <= 0 || !(fps > 0.0) || s_min <= 0 || s_max < s_min) {
    raise(ErrorKind::InvalidArgument, "half_gap_expected_shift: invalid arguments");
  }
  const double expected_s = (static_cast<double>(s_min) + s_max) / 2.0;
  return expected_s / (static_cast<double>(n) * fps * 2.0);
}

namespace {

struct ChunkAccum {
  double sum = 0.0;
  double sum_sq = 0.0;
  double max = 0.0;
};

ChunkAccum run_chunk(const MonteCarloConfig& cfg, std::uint64_t begin, std::uint64_t end) {
  ChunkAccum acc;
  ClipAnnotation clip;
  clip.clip_id = "mc";
  clip.fps = cfg.fps;
  clip.num_frames = trim_max_frames(cfg.trim, cfg.fps);
  for (std::uint64_t t = begin; t < end; ++t) {
    Rng rng = Rng::from_stream(cfg.seed, {0x7368696674ULL, t});
    TrimmedRange range = cfg.fixed_length_frames
                             ? place_window(clip, *cfg.fixed_length_frames, rng)
                             : trim_clip(clip, rng, cfg.trim);
    const std::vector<int> frames = sample_frames(range, cfg.n, cfg.kind, rng);
    const int pnr = static_cast<int>(
        rng.uniform_int(range.start_frame, range.start_frame + range.length_frames - 1));
    int best = std::abs(frames[0] - pnr);
    for (std::size_t i = 1; i < frames.size(); ++i) {
      best = std::min(best, std::abs(frames[static_cast<int>(i)] - pnr));
    }
    const double shift_s = best / cfg.fps;
    acc.sum += shift_s;
    acc.sum_sq += shift_s * shift_s;
    acc.max = std::max(acc.max, shift_s);
  }
  return acc;
}

}  // namespace

ShiftStats monte_carlo_shift(const MonteCarloConfig& cfg) {
  if (cfg.trials < 1) raise(ErrorKind::InvalidArgument, "monte_carlo_shift: trials must be >= 1");
  if (cfg.n <= 0 || !(cfg.fps > 0.0)) {
    raise(ErrorKind::InvalidArgument, "monte_carlo_shift: n and fps must be > 0");
  }
  if (cfg.fixed_length_frames && *cfg.fixed_length_frames < cfg.n) {
    raise(ErrorKind::InvalidArgument, "monte_carlo_shift: fixed length shorter than n");
  }

  // Fixed chunk size: the reduction tree is independent of the thread count.
  constexpr std::uint64_t kChunk = 1 << 16;
  const std::uint64_t num_chunks = (cfg.trials + kChunk - 1) / kChunk;
  unsigned threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                     : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, num_chunks));

  std::vector<ChunkAccum> partials(num_chunks);
  if (threads <= 1) {
    for (std::uint64_t c = 0; c < num_chunks; ++c) {
      partials[c] = run_chunk(cfg, c * kChunk, std::min(cfg.trials, (c + 1) * kChunk));
    }
  } else {
    std::vector<std::future<void>> workers;
    std::atomic<std::uint64_t> next{0};
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      workers.push_back(std::async(std::launch::async, [&]() {
        for (;;) {
          const std::uint64_t c = next.fetch_add(1);
          if (c >= num_chunks) return;
          partials[c] = run_chunk(cfg, c * kChunk, std::min(cfg.trials, (c + 1) * kChunk));
        }
      }));
    }
    for (auto& f : workers) f.get();
  }

  ChunkAccum total;
  for (const ChunkAccum& p : partials) {
    total.sum += p.sum;
    total.sum_sq += p.sum_sq;
    total.max = std::max(total.max, p.max);
  }

  ShiftStats stats;
  stats.trials = cfg.trials;
  const double n = static_cast<double>(cfg.trials);
  stats.mean_s = total.sum / n;
  const double var = std::max(0.0, total.sum_sq / n - stats.mean_s * stats.mean_s);
  stats.std_s = std::sqrt(var);
  stats.max_s = total.max;
  return stats;
}

}  // namespace egopnr
