#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "annotations.hpp"
#include "error.hpp"
#include "labels.hpp"
#include "sampling.hpp"

using namespace egopnr;

namespace {

Example make_example(int n, int dim, TargetPair targets, Rng& rng) {
  Example ex;
  ex.n_frames = n;
  ex.feature_dim = dim;
  ex.features.resize(static_cast<std::size_t>(n) * dim);
  for (double& v : ex.features) v = rng.normal();
  ex.targets = std::move(targets);
  return ex;
}

TargetPair one_hot(int oscc_class, int temporal_class, int n) {
  TargetPair t;
  t.oscc.assign(2, 0.0);
  t.oscc[static_cast<std::size_t>(oscc_class)] = 1.0;
  t.temporal.assign(static_cast<std::size_t>(n) + 1, 0.0);
  t.temporal[static_cast<std::size_t>(temporal_class)] = 1.0;
  return t;
}

}  // namespace

TEST_CASE("negative clip targets: no-change hot, temporal class N hot") {
  ClipAnnotation clip;
  clip.clip_id = "c";
  SampledClip sampled;
  sampled.clip_id = "c";
  sampled.frame_indices.resize(16);
  const TargetPair t = build_targets(sampled, clip);
  CHECK(t.oscc[0] == 1.0);
  CHECK(t.oscc[1] == 0.0);
  CHECK(t.temporal[16] == 1.0);
  for (int i = 0; i < 16; ++i) CHECK(t.temporal[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("positive clip targets: change hot, temporal hot at the pseudo slot") {
  ClipAnnotation clip;
  clip.clip_id = "c";
  clip.has_state_change = true;
  clip.pnr_frame = 100;
  SampledClip sampled;
  sampled.frame_indices.resize(16);
  sampled.pseudo_pnr_slot = 3;
  const TargetPair t = build_targets(sampled, clip);
  CHECK(t.oscc[0] == 0.0);
  CHECK(t.oscc[1] == 1.0);
  CHECK(t.temporal[3] == 1.0);
  CHECK(t.temporal[16] == 0.0);
}

TEST_CASE("positive clip without a pseudo slot is a consistency error") {
  ClipAnnotation clip;
  clip.clip_id = "c";
  clip.has_state_change = true;
  clip.pnr_frame = 100;
  SampledClip sampled;
  sampled.frame_indices.resize(16);
  CHECK_THROWS_AS(build_targets(sampled, clip), Error);
}

TEST_CASE("hard-label consistency over a synthetic batch; class-N fraction near 1 - p_pos") {
  SynthConfig cfg;
  cfg.clip_count = 1000;
  cfg.p_pos = 0.477;
  const DatasetManifest manifest = generate_manifest(cfg, 41);
  Rng rng(42);
  std::int64_t class_n = 0;
  for (const ClipAnnotation& clip : manifest.clips) {
    const SampledClip sampled = sample_clip(clip, 16, SamplerKind::StratifiedRandom, rng);
    const TargetPair t = build_targets(sampled, clip);
    CHECK(is_probability_vector(t.oscc));
    CHECK(is_probability_vector(t.temporal));
    // temporal class N hot exactly when oscc "no-change" hot
    CHECK((t.temporal[16] == 1.0) == (t.oscc[0] == 1.0));
    if (t.temporal[16] == 1.0) ++class_n;
  }
  const double frac = static_cast<double>(class_n) / 1000.0;
  CHECK(std::abs(frac - 0.523) <= 0.05);
}

TEST_CASE("smoothing closed forms") {
  const Vec two = smooth({1.0, 0.0}, 0.1);
  CHECK(two[0] == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx(0.05).epsilon(1e-15));

  Vec hot(17, 0.0);
  hot[4] = 1.0;
  const Vec k17 = smooth(hot, 0.1);
  CHECK(std::abs(k17[4] - (0.9 + 0.1 / 17.0)) < 1e-12);
  for (int i = 0; i < 17; ++i) {
    if (i != 4) CHECK(std::abs(k17[static_cast<std::size_t>(i)] - 0.1 / 17.0) < 1e-12);
  }
  CHECK(is_probability_vector(k17));
}

TEST_CASE("smoothing with eps 0 is the identity") {
  const Vec v = {0.25, 0.5, 0.25};
  CHECK(smooth(v, 0.0) == v);
}

TEST_CASE("smoothing eps domain") {
  CHECK_THROWS_AS(smooth({1.0, 0.0}, 1.0), Error);
  CHECK_THROWS_AS(smooth({1.0, 0.0}, -0.1), Error);
}

TEST_CASE("mixup endpoints and convex combination") {
  Rng rng(1);
  Example a = make_example(16, 4, one_hot(1, 2, 16), rng);
  Example b = make_example(16, 4, one_hot(0, 16, 16), rng);

  const Example id = mixup_pair(a, b, 1.0);
  CHECK(id.features == a.features);
  CHECK(id.targets.oscc == a.targets.oscc);
  CHECK(id.targets.temporal == a.targets.temporal);

  Example c = a;
  c.targets.oscc = {1.0, 0.0};
  Example d = b;
  d.targets.oscc = {0.0, 1.0};
  const Example mixed = mixup_pair(c, d, 0.3);
  CHECK(mixed.targets.oscc[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(mixed.targets.oscc[1] == doctest::Approx(0.7).epsilon(1e-15));
  for (std::size_t i = 0; i < mixed.features.size(); ++i) {
    CHECK(mixed.features[i] ==
          doctest::Approx(0.3 * c.features[i] + 0.7 * d.features[i]).epsilon(1e-12));
  }
}

TEST_CASE("beta(0.8, 0.8) draws average to one half") {
  Rng rng(77);
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) sum += rng.beta(0.8, 0.8);
  CHECK(std::abs(sum / draws - 0.5) <= 0.005);
}

TEST_CASE("cutmix endpoints and effective lambda") {
  Rng rng(2);
  Example a = make_example(16, 4, one_hot(1, 5, 16), rng);
  Example b = make_example(16, 4, one_hot(0, 16, 16), rng);

  const Example zero = cutmix_pair(a, b, 0, 0);
  CHECK(zero.features == a.features);
  CHECK(zero.targets.temporal == a.targets.temporal);

  const Example full = cutmix_pair(a, b, 0, 16);
  CHECK(full.features == b.features);
  CHECK(full.targets.oscc == b.targets.oscc);
  CHECK(full.targets.temporal == b.targets.temporal);

  const Example part = cutmix_pair(a, b, 3, 4);
  CHECK(part.targets.oscc[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(part.targets.temporal[5] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(part.targets.temporal[16] == doctest::Approx(0.25).epsilon(1e-15));
  // swapped block carries partner features, the rest stays
  for (int f = 0; f < 16; ++f) {
    const Example& src = (f >= 3 && f < 7) ? b : a;
    for (int d = 0; d < 4; ++d) {
      CHECK(part.features[static_cast<std::size_t>(f * 4 + d)] ==
            src.features[static_cast<std::size_t>(f * 4 + d)]);
    }
  }
}

TEST_CASE("all produced targets stay probability vectors under random composition") {
  Rng rng(11);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 16;
    Example a = make_example(n, 3, one_hot(1, static_cast<int>(rng.uniform_int(0, n)), n), rng);
    Example b = make_example(n, 3, one_hot(0, n, n), rng);
    Example out = a;
    if (rng.bernoulli(0.5)) {
      out = mixup_pair(out, b, rng.beta(0.8, 0.8));
    }
    if (rng.bernoulli(0.5)) {
      const int len = static_cast<int>(rng.uniform_int(0, n));
      const int start = static_cast<int>(rng.uniform_int(0, n - len));
      out = cutmix_pair(out, b, start, len);
    }
    if (rng.bernoulli(0.5)) smooth_targets(out.targets, 0.1);
    CHECK(is_probability_vector(out.targets.oscc));
    CHECK(is_probability_vector(out.targets.temporal));
  }
}

TEST_CASE("batch mixup/cutmix keep shapes and probability mass") {
  Rng rng(13);
  std::vector<Example> batch;
  for (int i = 0; i < 8; ++i) {
    batch.push_back(make_example(16, 5, one_hot(i % 2, i * 2, 16), rng));
  }
  const std::vector<Example> mixed = mixup(batch, 0.8, rng);
  const std::vector<Example> cut = cutmix_temporal(batch, 1.0, rng);
  REQUIRE(mixed.size() == batch.size());
  REQUIRE(cut.size() == batch.size());
  for (const auto& ex : mixed) {
    CHECK(is_probability_vector(ex.targets.oscc));
    CHECK(is_probability_vector(ex.targets.temporal));
  }
  for (const auto& ex : cut) {
    CHECK(is_probability_vector(ex.targets.oscc));
    CHECK(is_probability_vector(ex.targets.temporal));
  }
}

TEST_CASE("alpha 0 disables mixing") {
  Rng rng(17);
  std::vector<Example> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(make_example(8, 2, one_hot(0, 8, 8), rng));
  const std::vector<Example> out = mixup(batch, 0.0, rng);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(out[i].features == batch[i].features);
    CHECK(out[i].targets.oscc == batch[i].targets.oscc);
  }
}

TEST_CASE("shape mismatch rejected") {
  Rng rng(19);
  Example a = make_example(16, 4, one_hot(0, 16, 16), rng);
  Example b = make_example(16, 5, one_hot(0, 16, 16), rng);
  CHECK_THROWS_AS(mixup_pair(a, b, 0.5), Error);
}
