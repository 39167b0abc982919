#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"
#include "sampling.hpp"

using namespace egopnr;

namespace {

ClipAnnotation default_clip(bool state_change = false, int pnr = -1) {
  ClipAnnotation clip;
  clip.clip_id = "t0";
  clip.fps = 30.0;
  clip.num_frames = 240;
  clip.has_state_change = state_change;
  if (state_change) clip.pnr_frame = pnr;
  return clip;
}

// Independent oracle for the Monte-Carlo mean: enumerate every PNR offset in
// a fixed-length window sampled evenly and average the distance to the
// nearest sampled frame.
double brute_force_even_mean_shift(int s, int n, double fps) {
  TrimmedRange range{0, s};
  Rng rng(0);
  const std::vector<int> frames = sample_frames(range, n, SamplerKind::EvenlySpaced, rng);
  double sum = 0.0;
  for (int pnr = 0; pnr < s; ++pnr) {
    int best = std::abs(frames[0] - pnr);
    for (int f : frames) best = std::min(best, std::abs(f - pnr));
    sum += best / fps;
  }
  return sum / static_cast<double>(s);
}

}  // namespace

TEST_CASE("forced durations hit the support endpoints") {
  Rng rng(1);
  const ClipAnnotation clip = default_clip();
  const TrimmedRange lo = trim_clip_with_duration(clip, 5.0, rng);
  CHECK(lo.length_frames == 150);
  const TrimmedRange hi = trim_clip_with_duration(clip, 8.0, rng);
  CHECK(hi.length_frames == 240);
  CHECK(hi.start_frame == 0);
}

TEST_CASE("trim keeps the window inside the clip and contains the PNR") {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const int pnr = static_cast<int>(rng.uniform_int(0, 239));
    const ClipAnnotation clip = default_clip(true, pnr);
    const TrimmedRange range = trim_clip(clip, rng);
    CHECK(range.length_frames >= 150);
    CHECK(range.length_frames <= 240);
    CHECK(range.start_frame >= 0);
    CHECK(range.start_frame + range.length_frames <= clip.num_frames);
    CHECK(pnr >= range.start_frame);
    CHECK(pnr < range.end_frame());
  }
}

TEST_CASE("trim length distribution: support, mean, and per-bin mass") {
  // The rounded continuous duration puts half mass on the two endpoint
  // lengths (150 and 240) and 1/90 on each interior length.
  const int trials = 1000000;
  Rng rng(7);
  const ClipAnnotation clip = default_clip();
  std::vector<std::int64_t> counts(241, 0);
  double sum = 0.0;
  for (int i = 0; i < trials; ++i) {
    const TrimmedRange range = trim_clip(clip, rng);
    REQUIRE(range.length_frames >= 150);
    REQUIRE(range.length_frames <= 240);
    counts[static_cast<std::size_t>(range.length_frames)]++;
    sum += range.length_frames;
  }
  const double mean = sum / trials;
  CHECK(std::abs(mean - 195.0) <= 0.1);
  for (int s = 150; s <= 240; ++s) {
    const double expected = (s == 150 || s == 240) ? trials / 180.0 : trials / 90.0;
    const double observed = static_cast<double>(counts[static_cast<std::size_t>(s)]);
    CHECK(std::abs(observed - expected) / expected <= 0.05);
  }
}

TEST_CASE("untrimmable clip rejected") {
  ClipAnnotation clip = default_clip();
  clip.num_frames = 120;
  Rng rng(3);
  CHECK_THROWS_AS(trim_clip(clip, rng), Error);
}

TEST_CASE("evenly spaced closed form") {
  TrimmedRange range{0, 160};
  Rng rng(0);
  const std::vector<int> frames = sample_frames(range, 16, SamplerKind::EvenlySpaced, rng);
  std::vector<int> expected;
  for (int i = 0; i < 16; ++i) expected.push_back(5 + 10 * i);
  CHECK(frames == expected);
}

TEST_CASE("n equal to window length returns every frame") {
  TrimmedRange range{40, 16};
  for (SamplerKind kind :
       {SamplerKind::EvenlySpaced, SamplerKind::StratifiedRandom, SamplerKind::UniformRandom}) {
    Rng rng(4);
    const std::vector<int> frames = sample_frames(range, 16, kind, rng);
    REQUIRE(frames.size() == 16);
    for (int i = 0; i < 16; ++i) CHECK(frames[static_cast<std::size_t>(i)] == 40 + i);
  }
}

TEST_CASE("stratified sampling puts exactly one index in each segment") {
  for (int seed = 0; seed < 1000; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const int s = 150 + static_cast<int>(rng.uniform_int(0, 90));
    const int n = 16;
    TrimmedRange range{10, s};
    const std::vector<int> frames = sample_frames(range, n, SamplerKind::StratifiedRandom, rng);
    REQUIRE(static_cast<int>(frames.size()) == n);
    for (int i = 0; i < n; ++i) {
      const double lo = 10 + static_cast<double>(i) * s / n;
      const double hi = 10 + static_cast<double>(i + 1) * s / n;
      CHECK(frames[static_cast<std::size_t>(i)] >= lo);
      CHECK(frames[static_cast<std::size_t>(i)] < hi);
    }
  }
}

TEST_CASE("all samplers produce strictly increasing in-window indices") {
  for (int seed = 0; seed < 300; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) + 1000);
    const int s = 16 + static_cast<int>(rng.uniform_int(0, 224));
    TrimmedRange range{static_cast<int>(rng.uniform_int(0, 240 - s)), s};
    for (SamplerKind kind :
         {SamplerKind::EvenlySpaced, SamplerKind::StratifiedRandom, SamplerKind::UniformRandom}) {
      const std::vector<int> frames = sample_frames(range, 16, kind, rng);
      REQUIRE(frames.size() == 16);
      for (std::size_t i = 0; i < frames.size(); ++i) {
        CHECK(frames[i] >= range.start_frame);
        CHECK(frames[i] < range.end_frame());
        if (i > 0) CHECK(frames[i] > frames[i - 1]);
      }
    }
  }
}

TEST_CASE("oversampling rejected") {
  TrimmedRange range{0, 10};
  Rng rng(5);
  CHECK_THROWS_AS(sample_frames(range, 11, SamplerKind::UniformRandom, rng), Error);
}

TEST_CASE("pseudo-PNR slot: nearest, tie to earlier, exact hit") {
  const std::vector<int> idx = {0, 10, 20};
  CHECK(assign_pseudo_pnr(idx, 12) == 1);
  CHECK(assign_pseudo_pnr(idx, 15) == 1);
  CHECK(assign_pseudo_pnr(idx, 20) == 2);
}

TEST_CASE("pseudo-PNR equals exhaustive argmin on random inputs") {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const int s = 32 + static_cast<int>(rng.uniform_int(0, 200));
    TrimmedRange range{0, s};
    const std::vector<int> frames = sample_frames(range, 16, SamplerKind::UniformRandom, rng);
    const int pnr = static_cast<int>(rng.uniform_int(0, s - 1));
    const int got = assign_pseudo_pnr(frames, pnr);
    int expect = 0;
    for (int i = 1; i < 16; ++i) {
      if (std::abs(frames[static_cast<std::size_t>(i)] - pnr) <
          std::abs(frames[static_cast<std::size_t>(expect)] - pnr)) {
        expect = i;
      }
    }
    CHECK(got == expect);
  }
}

TEST_CASE("half-gap formula values") {
  CHECK(half_gap_expected_shift(16, 30.0, 150, 240) == 0.203125);
  // One-frame gap: a window of exactly n frames leaves at most half a frame.
  CHECK(half_gap_expected_shift(16, 30.0, 16, 16) == doctest::Approx(1.0 / 60.0).epsilon(1e-12));
  CHECK(half_gap_expected_shift(16, 30.0, 160, 160) == doctest::Approx(160.0 / 960.0).epsilon(1e-12));
  CHECK_THROWS_AS(half_gap_expected_shift(0, 30.0, 150, 240), Error);
  CHECK_THROWS_AS(half_gap_expected_shift(16, -1.0, 150, 240), Error);
}

TEST_CASE("monte-carlo with fixed window matches the brute-force oracle") {
  const double oracle = brute_force_even_mean_shift(160, 16, 30.0);
  CHECK(oracle == doctest::Approx(2.5 / 30.0).epsilon(1e-12));

  MonteCarloConfig cfg;
  cfg.kind = SamplerKind::EvenlySpaced;
  cfg.n = 16;
  cfg.fps = 30.0;
  cfg.trials = 200000;
  cfg.seed = 17;
  cfg.fixed_length_frames = 160;
  const ShiftStats stats = monte_carlo_shift(cfg);
  CHECK(std::abs(stats.mean_s - oracle) <= 0.001);
}

TEST_CASE("n = S gives zero shift") {
  MonteCarloConfig cfg;
  cfg.kind = SamplerKind::UniformRandom;
  cfg.n = 150;
  cfg.fps = 30.0;
  cfg.trials = 2000;
  cfg.seed = 3;
  cfg.fixed_length_frames = 150;
  const ShiftStats stats = monte_carlo_shift(cfg);
  CHECK(stats.mean_s == 0.0);
  CHECK(stats.max_s == 0.0);
}

TEST_CASE("full trim: evenly spaced mean matches the analytic value and the bound") {
  MonteCarloConfig cfg;
  cfg.kind = SamplerKind::EvenlySpaced;
  cfg.n = 16;
  cfg.fps = 30.0;
  cfg.trials = 1000000;
  cfg.seed = 23;
  const ShiftStats stats = monte_carlo_shift(cfg);
  // Mean distance within one gap is ~gap/4, so E[S]/(4 n fps).
  CHECK(std::abs(stats.mean_s - 195.0 / (4.0 * 16.0 * 30.0)) <= 0.002);
  CHECK(stats.mean_s <= half_gap_expected_shift(16, 30.0, 150, 240));
}

TEST_CASE("monte-carlo mean stays below the half-gap bound for every sampler") {
  const double bound = half_gap_expected_shift(16, 30.0, 150, 240);
  for (SamplerKind kind :
       {SamplerKind::EvenlySpaced, SamplerKind::StratifiedRandom, SamplerKind::UniformRandom}) {
    MonteCarloConfig cfg;
    cfg.kind = kind;
    cfg.n = 16;
    cfg.fps = 30.0;
    cfg.trials = 100000;
    cfg.seed = 29;
    const ShiftStats stats = monte_carlo_shift(cfg);
    CAPTURE(sampler_name(kind));
    CHECK(stats.mean_s <= bound);
  }
}

TEST_CASE("monte-carlo is reproducible and thread-count independent") {
  MonteCarloConfig cfg;
  cfg.kind = SamplerKind::StratifiedRandom;
  cfg.n = 16;
  cfg.fps = 30.0;
  cfg.trials = 300000;
  cfg.seed = 31;
  cfg.threads = 1;
  const ShiftStats a = monte_carlo_shift(cfg);
  cfg.threads = 4;
  const ShiftStats b = monte_carlo_shift(cfg);
  CHECK(a.mean_s == b.mean_s);
  CHECK(a.std_s == b.std_s);
  CHECK(a.max_s == b.max_s);
  CHECK(a.trials == b.trials);
}

TEST_CASE("shift stats invariants") {
  MonteCarloConfig cfg;
  cfg.kind = SamplerKind::UniformRandom;
  cfg.n = 16;
  cfg.fps = 30.0;
  cfg.trials = 50000;
  cfg.seed = 37;
  const ShiftStats stats = monte_carlo_shift(cfg);
  CHECK(stats.mean_s >= 0.0);
  CHECK(stats.mean_s <= stats.max_s);
  CHECK(stats.trials == 50000);
}
