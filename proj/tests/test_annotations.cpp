#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "annotations.hpp"
#include "error.hpp"

using namespace egopnr;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("minimal one-clip manifest parses") {
  const std::string text = R"({
    "split": "train",
    "feature_dim": 16,
    "views_per_clip": 3,
    "clips": [{"clip_id": "c0001", "fps": 30, "num_frames": 240, "has_state_change": false}]
  })";
  const DatasetManifest m = parse_manifest(text);
  CHECK(m.clips.size() == 1);
  CHECK(m.split == Split::Train);
  CHECK(m.feature_dim == 16);
  CHECK_FALSE(m.clips[0].has_state_change);
  CHECK_FALSE(m.clips[0].pnr_frame.has_value());
}

TEST_CASE("mid-clip PNR accepted") {
  const std::string text = R"({
    "split": "val",
    "feature_dim": 8,
    "clips": [{"clip_id": "c1", "fps": 30, "num_frames": 240,
               "has_state_change": true, "pnr_frame": 120}]
  })";
  const DatasetManifest m = parse_manifest(text);
  CHECK(m.clips[0].pnr_frame == 120);
}

TEST_CASE("pnr_frame at num_frames rejected") {
  const std::string text = R"({
    "split": "train",
    "feature_dim": 8,
    "clips": [{"clip_id": "cbad", "fps": 30, "num_frames": 240,
               "has_state_change": true, "pnr_frame": 240}]
  })";
  CHECK_THROWS_WITH_AS(parse_manifest(text), doctest::Contains("cbad"), Error);
  try {
    parse_manifest(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
  }
}

TEST_CASE("pnr without state change rejected, naming the clip") {
  const std::string text = R"({
    "split": "train",
    "feature_dim": 8,
    "clips": [{"clip_id": "c77", "fps": 30, "num_frames": 240,
               "has_state_change": false, "pnr_frame": 10}]
  })";
  CHECK_THROWS_WITH_AS(parse_manifest(text), doctest::Contains("c77"), Error);
}

TEST_CASE("malformed JSON reports a line") {
  const std::string text = "{\n  \"split\": \"train\",\n  broken\n}";
  CHECK_THROWS_WITH_AS(parse_manifest(text), doctest::Contains("line 3"), Error);
}

TEST_CASE("unknown keys rejected") {
  const std::string text = R"({"split": "train", "feature_dim": 8, "clips": [], "extra": 1})";
  CHECK_THROWS_WITH_AS(parse_manifest(text), doctest::Contains("extra"), Error);
}

TEST_CASE("duplicate clip ids rejected") {
  const std::string text = R"({
    "split": "train", "feature_dim": 8,
    "clips": [{"clip_id": "c1", "has_state_change": false},
              {"clip_id": "c1", "has_state_change": false}]
  })";
  CHECK_THROWS_WITH_AS(parse_manifest(text), doctest::Contains("duplicate"), Error);
}

TEST_CASE("manifest file round-trip is the identity") {
  SynthConfig cfg;
  cfg.clip_count = 3;
  cfg.p_pos = 0.5;
  const DatasetManifest m = generate_manifest(cfg, 11);
  const std::string path = temp_path("egopnr_manifest_rt.json");
  write_manifest_file(m, path);
  const DatasetManifest back = read_manifest_file(path);
  REQUIRE(back.clips.size() == m.clips.size());
  CHECK(back.split == m.split);
  CHECK(back.feature_dim == m.feature_dim);
  CHECK(back.views_per_clip == m.views_per_clip);
  for (std::size_t i = 0; i < m.clips.size(); ++i) {
    CHECK(back.clips[i].clip_id == m.clips[i].clip_id);
    CHECK(back.clips[i].fps == m.clips[i].fps);
    CHECK(back.clips[i].num_frames == m.clips[i].num_frames);
    CHECK(back.clips[i].has_state_change == m.clips[i].has_state_change);
    CHECK(back.clips[i].pnr_frame == m.clips[i].pnr_frame);
  }
  std::filesystem::remove(path);
}

TEST_CASE("feature file round-trip is bitwise identical") {
  SynthConfig cfg;
  cfg.clip_count = 1;
  cfg.p_pos = 1.0;
  cfg.feature_dim = 16;
  cfg.views_per_clip = 3;
  auto [manifest, store] = generate_synthetic(cfg, 5);
  REQUIRE(store.clip_count() == 1);
  REQUIRE(store.values_per_clip() == 3u * 240u * 16u);

  const std::string path = temp_path("egopnr_features_rt.bin");
  write_features_file(store, path);
  const FeatureStore back = read_features_file(path);
  CHECK(back.views() == store.views());
  CHECK(back.frames() == store.frames());
  CHECK(back.dim() == store.dim());
  const auto& a = store.values(manifest.clips[0].clip_id);
  const auto& b = back.values(manifest.clips[0].clip_id);
  REQUIRE(a.size() == b.size());
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i], &b[i], sizeof(float)) != 0) identical = false;
  }
  CHECK(identical);
  std::filesystem::remove(path);
}

TEST_CASE("truncated feature payload reports expected vs actual bytes") {
  SynthConfig cfg;
  cfg.clip_count = 1;
  auto [manifest, store] = generate_synthetic(cfg, 5);
  const std::string path = temp_path("egopnr_features_trunc.bin");
  write_features_file(store, path);
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 128);
  CHECK_THROWS_WITH_AS(read_features_file(path), doctest::Contains("expected"), Error);
  try {
    read_features_file(path);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
  }
  std::filesystem::remove(path);
}

TEST_CASE("generate_synthetic is a pure function of (cfg, seed)") {
  SynthConfig cfg;
  cfg.clip_count = 20;
  cfg.p_pos = 0.4;
  auto [m1, s1] = generate_synthetic(cfg, 123);
  auto [m2, s2] = generate_synthetic(cfg, 123);
  REQUIRE(m1.clips.size() == m2.clips.size());
  for (std::size_t i = 0; i < m1.clips.size(); ++i) {
    CHECK(m1.clips[i].has_state_change == m2.clips[i].has_state_change);
    CHECK(m1.clips[i].pnr_frame == m2.clips[i].pnr_frame);
  }
  for (const auto& id : s1.clip_ids()) {
    const auto& a = s1.values(id);
    const auto& b = s2.values(id);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("p_pos = 1 makes every clip positive") {
  SynthConfig cfg;
  cfg.clip_count = 100;
  cfg.p_pos = 1.0;
  const DatasetManifest m = generate_manifest(cfg, 3);
  for (const auto& clip : m.clips) {
    CHECK(clip.has_state_change);
    CHECK(clip.pnr_frame.has_value());
  }
}

TEST_CASE("positive fraction near p_pos") {
  SynthConfig cfg;
  cfg.clip_count = 1000;
  cfg.p_pos = 0.477;
  const DatasetManifest m = generate_manifest(cfg, 7);
  std::int64_t pos = 0;
  for (const auto& clip : m.clips) pos += clip.has_state_change ? 1 : 0;
  const double fraction = static_cast<double>(pos) / 1000.0;
  CHECK(std::abs(fraction - 0.477) <= 0.032);
}

TEST_CASE("uniform prior: mean PNR time near mid-clip") {
  SynthConfig cfg;
  cfg.clip_count = 10000;
  cfg.p_pos = 1.0;
  cfg.prior = PnrPrior::Uniform;
  const DatasetManifest m = generate_manifest(cfg, 21);
  double sum = 0.0;
  for (const auto& clip : m.clips) sum += *clip.pnr_frame / clip.fps;
  const double mean = sum / static_cast<double>(m.clips.size());
  CHECK(std::abs(mean - 4.0) <= 0.05);
}

TEST_CASE("bump center equals pnr_frame at high snr") {
  SynthConfig cfg;
  cfg.clip_count = 30;
  cfg.p_pos = 1.0;
  cfg.snr = 50.0;
  auto [manifest, store] = generate_synthetic(cfg, 9);
  for (const auto& clip : manifest.clips) {
    const float* view = store.view_data(clip.clip_id, 0);
    int argmax = 0;
    double best = -1.0;
    for (int f = 0; f < cfg.num_frames; ++f) {
      double norm = 0.0;
      const float* frame = view + static_cast<std::size_t>(f) * cfg.feature_dim;
      for (int d = 0; d < cfg.feature_dim; ++d) norm += double(frame[d]) * frame[d];
      if (norm > best) {
        best = norm;
        argmax = f;
      }
    }
    CHECK(argmax == *clip.pnr_frame);
  }
}

TEST_CASE("config errors") {
  SynthConfig cfg;
  cfg.p_pos = 1.5;
  CHECK_THROWS_AS(generate_manifest(cfg, 0), Error);
  cfg.p_pos = 0.5;
  cfg.snr = -1.0;
  CHECK_THROWS_AS(generate_manifest(cfg, 0), Error);
  cfg.snr = 1.0;
  cfg.feature_dim = 0;
  CHECK_THROWS_AS(generate_manifest(cfg, 0), Error);
}
