#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "error.hpp"
#include "labels.hpp"
#include "model.hpp"

using namespace egopnr;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.feature_dim = 8;
  cfg.hidden_dim = 8;
  cfg.depth = 2;
  cfg.n_frames = 6;
  cfg.drop_path_rate = 0.5;
  cfg.pos_scale = 1.0;
  return cfg;
}

std::vector<Example> random_batch(const ModelConfig& cfg, int size, Rng& rng) {
  std::vector<Example> batch;
  for (int i = 0; i < size; ++i) {
    Example ex;
    ex.clip_id = "b" + std::to_string(i);
    ex.n_frames = cfg.n_frames;
    ex.feature_dim = cfg.feature_dim;
    ex.features.resize(static_cast<std::size_t>(cfg.n_frames) * cfg.feature_dim);
    for (double& v : ex.features) v = rng.normal();
    ex.targets.oscc.assign(2, 0.0);
    ex.targets.oscc[static_cast<std::size_t>(rng.uniform_int(0, 1))] = 1.0;
    ex.targets.temporal.assign(static_cast<std::size_t>(cfg.temporal_classes()), 0.0);
    ex.targets.temporal[static_cast<std::size_t>(
        rng.uniform_int(0, cfg.temporal_classes() - 1))] = 1.0;
    smooth_targets(ex.targets, 0.1);
    batch.push_back(std::move(ex));
  }
  return batch;
}

std::vector<DropMask> fixed_masks(const ModelConfig& cfg, int size, Rng& rng) {
  std::vector<DropMask> masks;
  for (int i = 0; i < size; ++i) masks.push_back(draw_drop_mask(cfg, rng));
  return masks;
}

double batch_loss(const ModelConfig& cfg, const ModelParams& params,
                  const std::vector<Example>& batch, double l1, double l2,
                  const std::vector<DropMask>* masks) {
  ModelParams grads = zeros_like(params);
  return loss_and_grad(cfg, params, batch, l1, l2, masks, grads).total;
}

// Central finite differences on the total loss; returns the max relative
// error against the analytic gradients, with a small-magnitude guard.
double max_grad_rel_error(const ModelConfig& cfg, ModelParams params,
                          const std::vector<Example>& batch, double l1, double l2,
                          const std::vector<DropMask>& masks) {
  ModelParams analytic = zeros_like(params);
  loss_and_grad(cfg, params, batch, l1, l2, &masks, analytic);
  const double h = 1e-5;
  double worst = 0.0;
  auto prefs = tensor_refs(params, cfg);
  auto grefs = tensor_refs(analytic, cfg);
  for (std::size_t t = 0; t < prefs.size(); ++t) {
    Vec& tensor = *prefs[t].data;
    const Vec& grad = *grefs[t].data;
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + h;
      const double up = batch_loss(cfg, params, batch, l1, l2, &masks);
      tensor[i] = saved - h;
      const double down = batch_loss(cfg, params, batch, l1, l2, &masks);
      tensor[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
      worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("init is deterministic, biases zero, variance near 1/fan_in") {
  ModelConfig cfg;
  cfg.feature_dim = 16;
  cfg.hidden_dim = 128;
  cfg.depth = 2;
  cfg.n_frames = 16;
  const ModelParams a = init_params(cfg, 99);
  const ModelParams b = init_params(cfg, 99);
  CHECK(params_digest(a) == params_digest(b));

  for (double v : a.stem_b) CHECK(v == 0.0);
  for (const Block& blk : a.blocks) {
    for (double v : blk.b1) CHECK(v == 0.0);
    for (double v : blk.b2) CHECK(v == 0.0);
  }
  for (double v : a.oscc_b) CHECK(v == 0.0);
  for (double v : a.temporal_b) CHECK(v == 0.0);

  // 128 x 128 block weight: 16384 entries, fan_in 128.
  const Mat& w = a.blocks[0].w1;
  double sum = 0.0, sum_sq = 0.0;
  for (double v : w.a) {
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(w.size());
  const double var = sum_sq / n - (sum / n) * (sum / n);
  CHECK(std::abs(var - 1.0 / 128.0) <= 0.1 / 128.0);

  const ModelParams c = init_params(cfg, 100);
  CHECK(params_digest(a) != params_digest(c));
}

TEST_CASE("zero drop rate: masked train forward equals eval forward") {
  ModelConfig cfg = small_config();
  cfg.drop_path_rate = 0.0;
  const ModelParams params = init_params(cfg, 5);
  Rng rng(1);
  Vec features(static_cast<std::size_t>(cfg.n_frames) * cfg.feature_dim);
  for (double& v : features) v = rng.normal();
  DropMask mask = draw_drop_mask(cfg, rng);
  for (auto& k : mask.keep) k = 1;
  ForwardCache cache;
  const HeadLogits train_out = forward(cfg, params, features.data(), &mask, cache);
  const HeadLogits eval_out = forward(cfg, params, features.data(), nullptr, cache);
  CHECK(train_out.oscc == eval_out.oscc);
  CHECK(train_out.temporal == eval_out.temporal);
}

TEST_CASE("all-zero parameters give all-zero logits") {
  const ModelConfig cfg = small_config();
  ModelParams params = init_params(cfg, 1);
  params = zeros_like(params);
  Rng rng(2);
  Vec features(static_cast<std::size_t>(cfg.n_frames) * cfg.feature_dim);
  for (double& v : features) v = rng.normal();
  ForwardCache cache;
  const HeadLogits out = forward(cfg, params, features.data(), nullptr, cache);
  for (double v : out.oscc) CHECK(v == 0.0);
  for (double v : out.temporal) CHECK(v == 0.0);
}

TEST_CASE("eval forward is deterministic") {
  const ModelConfig cfg = small_config();
  const ModelParams params = init_params(cfg, 7);
  Rng rng(3);
  Vec features(static_cast<std::size_t>(cfg.n_frames) * cfg.feature_dim);
  for (double& v : features) v = rng.normal();
  ForwardCache cache;
  const HeadLogits first = forward(cfg, params, features.data(), nullptr, cache);
  for (int i = 0; i < 100; ++i) {
    const HeadLogits again = forward(cfg, params, features.data(), nullptr, cache);
    REQUIRE(again.oscc == first.oscc);
    REQUIRE(again.temporal == first.temporal);
  }
}

TEST_CASE("cross-entropy of equal logits against uniform targets is ln K") {
  const Vec logits2 = {0.7, 0.7};
  const Vec uniform2 = {0.5, 0.5};
  CHECK(softmax_cross_entropy(logits2, uniform2, nullptr) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Vec logits17(17, -1.3);
  Vec uniform17(17, 1.0 / 17.0);
  CHECK(softmax_cross_entropy(logits17, uniform17, nullptr) ==
        doctest::Approx(std::log(17.0)).epsilon(1e-12));
}

TEST_CASE("cross-entropy is invariant to uniform logit shifts") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    Vec logits(17), target(17, 0.0);
    for (double& v : logits) v = rng.normal() * 3.0;
    target[static_cast<std::size_t>(rng.uniform_int(0, 16))] = 1.0;
    target = smooth(target, 0.1);
    const double base = softmax_cross_entropy(logits, target, nullptr);
    const double c = rng.uniform_range(-50.0, 50.0);
    Vec shifted = logits;
    for (double& v : shifted) v += c;
    const double moved = softmax_cross_entropy(shifted, target, nullptr);
    CHECK(std::abs(base - moved) <= 1e-9);
  }
}

TEST_CASE("loss breakdown identity holds for random weights") {
  const ModelConfig cfg = small_config();
  const ModelParams params = init_params(cfg, 11);
  Rng rng(5);
  const std::vector<Example> batch = random_batch(cfg, 3, rng);
  ModelParams grads = zeros_like(params);
  for (int trial = 0; trial < 100; ++trial) {
    const double l1 = rng.uniform_range(-2.0, 2.0);
    const double l2 = rng.uniform_range(-2.0, 2.0);
    const LossBreakdown bd = loss_and_grad(cfg, params, batch, l1, l2, nullptr, grads);
    CHECK(std::abs(bd.total - (l1 * bd.l_oscc + l2 * bd.l_tl)) < 1e-12);
    CHECK(bd.l_oscc >= 0.0);
    CHECK(bd.l_tl >= 0.0);
  }
}

TEST_CASE("lambda2 = 0 collapses the total to the OSCC term") {
  const ModelConfig cfg = small_config();
  const ModelParams params = init_params(cfg, 13);
  Rng rng(6);
  const std::vector<Example> batch = random_batch(cfg, 4, rng);
  ModelParams grads = zeros_like(params);
  const LossBreakdown bd = loss_and_grad(cfg, params, batch, 1.0, 0.0, nullptr, grads);
  CHECK(bd.total == bd.l_oscc);
}

TEST_CASE("analytic gradients match central finite differences") {
  const ModelConfig cfg = small_config();
  const ModelParams params = init_params(cfg, 21);
  Rng rng(7);
  const std::vector<Example> batch = random_batch(cfg, 4, rng);
  const std::vector<DropMask> masks = fixed_masks(cfg, 4, rng);

  const double err_both = max_grad_rel_error(cfg, params, batch, 1.0, 1.0, masks);
  CHECK(err_both < 1e-4);
  const double err_oscc = max_grad_rel_error(cfg, params, batch, 1.0, 0.0, masks);
  CHECK(err_oscc < 1e-4);
}

TEST_CASE("dropped branches get exactly zero gradient") {
  const ModelConfig cfg = small_config();
  const ModelParams params = init_params(cfg, 23);
  Rng rng(8);
  const std::vector<Example> batch = random_batch(cfg, 2, rng);
  std::vector<DropMask> masks(2);
  for (auto& m : masks) m.keep = {0, 1};  // block 0 dropped on every clip
  ModelParams grads = zeros_like(params);
  loss_and_grad(cfg, params, batch, 1.0, 1.0, &masks, grads);
  for (double v : grads.blocks[0].w1.a) CHECK(v == 0.0);
  for (double v : grads.blocks[0].b2) CHECK(v == 0.0);
  bool block1_nonzero = false;
  for (double v : grads.blocks[1].w1.a) block1_nonzero |= (v != 0.0);
  CHECK(block1_nonzero);
}

TEST_CASE("shape mismatch rejected, naming the clip") {
  const ModelConfig cfg = small_config();
  const ModelParams params = init_params(cfg, 29);
  std::vector<Example> batch(1);
  batch[0].clip_id = "bad";
  batch[0].n_frames = cfg.n_frames;
  batch[0].feature_dim = cfg.feature_dim + 1;
  batch[0].features.resize(static_cast<std::size_t>(cfg.n_frames) * (cfg.feature_dim + 1));
  batch[0].targets.oscc = {1.0, 0.0};
  batch[0].targets.temporal.assign(static_cast<std::size_t>(cfg.temporal_classes()), 0.0);
  ModelParams grads = zeros_like(params);
  CHECK_THROWS_WITH_AS(loss_and_grad(cfg, params, batch, 1.0, 1.0, nullptr, grads),
                       doctest::Contains("bad"), Error);
}

TEST_CASE("checkpoint round-trip preserves config and every parameter bit") {
  ModelConfig cfg;
  cfg.feature_dim = 12;
  cfg.hidden_dim = 24;
  cfg.depth = 3;
  cfg.n_frames = 16;
  cfg.drop_path_rate = 0.1;
  cfg.pos_scale = 2.5;
  const ModelParams params = init_params(cfg, 31);
  const std::string path =
      (std::filesystem::temp_directory_path() / "egopnr_ckpt_rt.ckpt").string();
  save_checkpoint(cfg, params, path);
  auto [cfg2, params2] = load_checkpoint(path);
  CHECK(cfg2.feature_dim == cfg.feature_dim);
  CHECK(cfg2.hidden_dim == cfg.hidden_dim);
  CHECK(cfg2.depth == cfg.depth);
  CHECK(cfg2.n_frames == cfg.n_frames);
  CHECK(cfg2.drop_path_rate == cfg.drop_path_rate);
  CHECK(cfg2.pos_scale == cfg.pos_scale);
  CHECK(params_digest(params2) == params_digest(params));
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoint rejected") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "egopnr_ckpt_bad.ckpt").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  std::filesystem::remove(path);
}
