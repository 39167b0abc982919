#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "error.hpp"

namespace egopnr {

void validate_model_config(const ModelConfig& cfg) {
  if (cfg.feature_dim < 1 || cfg.hidden_dim < 1 || cfg.depth < 1 || cfg.n_frames < 1) {
    raise(ErrorKind::InvalidArgument, "model dimensions must be >= 1");
  }
  if (!(cfg.drop_path_rate >= 0.0 && cfg.drop_path_rate < 1.0)) {
    raise(ErrorKind::InvalidArgument, "drop_path_rate must be in [0, 1)");
  }
}

std::vector<TensorRef> tensor_refs(ModelParams& params, const ModelConfig& cfg) {
  std::vector<TensorRef> refs;
  refs.push_back({"stem.w", &params.stem_w.a, {cfg.hidden_dim, cfg.feature_dim}, 0});
  refs.push_back({"stem.b", &params.stem_b, {cfg.hidden_dim}, 0});
  for (int k = 0; k < cfg.depth; ++k) {
    const std::string base = "block" + std::to_string(k);
    Block& blk = params.blocks[static_cast<std::size_t>(k)];
    refs.push_back({base + ".w1", &blk.w1.a, {cfg.hidden_dim, cfg.hidden_dim}, k});
    refs.push_back({base + ".b1", &blk.b1, {cfg.hidden_dim}, k});
    refs.push_back({base + ".w2", &blk.w2.a, {cfg.hidden_dim, cfg.hidden_dim}, k});
    refs.push_back({base + ".b2", &blk.b2, {cfg.hidden_dim}, k});
  }
  refs.push_back({"head.oscc.w", &params.oscc_w.a, {2, cfg.hidden_dim}, cfg.depth});
  refs.push_back({"head.oscc.b", &params.oscc_b, {2}, cfg.depth});
  refs.push_back(
      {"head.temporal.w", &params.temporal_w.a, {cfg.temporal_classes(), cfg.hidden_dim}, cfg.depth});
  refs.push_back({"head.temporal.b", &params.temporal_b, {cfg.temporal_classes()}, cfg.depth});
  return refs;
}

namespace {

void init_weight(Mat& w, Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols));
  for (double& v : w.a) v = rng.normal() * scale;
}

// Block nonlinearity. tanh keeps the pooled features centered (odd, so the
// trunk output has no large constant direction) and is smooth everywhere,
// which keeps finite-difference gradient checks clean.
inline double activation(double x) { return std::tanh(x); }

inline double activation_grad_from_value(double a) { return 1.0 - a * a; }

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  validate_model_config(cfg);
  ModelParams p;
  p.stem_w = Mat(cfg.hidden_dim, cfg.feature_dim);
  p.stem_b.assign(static_cast<std::size_t>(cfg.hidden_dim), 0.0);
  p.blocks.resize(static_cast<std::size_t>(cfg.depth));
  for (Block& blk : p.blocks) {
    blk.w1 = Mat(cfg.hidden_dim, cfg.hidden_dim);
    blk.b1.assign(static_cast<std::size_t>(cfg.hidden_dim), 0.0);
    blk.w2 = Mat(cfg.hidden_dim, cfg.hidden_dim);
    blk.b2.assign(static_cast<std::size_t>(cfg.hidden_dim), 0.0);
  }
  p.oscc_w = Mat(2, cfg.hidden_dim);
  p.oscc_b.assign(2, 0.0);
  p.temporal_w = Mat(cfg.temporal_classes(), cfg.hidden_dim);
  p.temporal_b.assign(static_cast<std::size_t>(cfg.temporal_classes()), 0.0);

  Rng rng = Rng::from_stream(seed, {0x696e6974ULL});
  init_weight(p.stem_w, rng);
  for (Block& blk : p.blocks) {
    init_weight(blk.w1, rng);
    init_weight(blk.w2, rng);
  }
  init_weight(p.oscc_w, rng);
  init_weight(p.temporal_w, rng);
  return p;
}

Mat positional_encoding(const ModelConfig& cfg) {
  // Phase code of the slot index: sin/cos of one full cycle across the slot
  // axis. Every linear projection of the code is antiperiodic in the slot
  // (f -> f + n/2 flips its sign), so with an odd block nonlinearity the
  // trunk's expected response carries no constant direction; the pooled
  // features stay centered, which the movement-limited heads rely on.
  Mat pe(cfg.n_frames, cfg.feature_dim);
  for (int f = 0; f < cfg.n_frames; ++f) {
    double* row = pe.row(f);
    const double angle = 2.0 * M_PI * f / static_cast<double>(cfg.n_frames);
    for (int d = 0; d < cfg.feature_dim; ++d) {
      row[d] = cfg.pos_scale * ((d % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

DropMask draw_drop_mask(const ModelConfig& cfg, Rng& rng) {
  DropMask mask;
  mask.keep.resize(static_cast<std::size_t>(cfg.depth));
  for (auto& k : mask.keep) {
    k = rng.bernoulli(cfg.drop_path_rate) ? 0 : 1;
  }
  return mask;
}

namespace {

void ensure_shape(Mat& m, int rows, int cols) {
  if (m.rows != rows || m.cols != cols) m = Mat(rows, cols);
}

// y_t = W x_t + b (broadcast over the frame axis): y[r][:] = b[r] + sum_c W[r][c] x[c][:]
void lin_forward_t(const Mat& w, const Mat& x_t, const Vec& b, Mat& y_t) {
  const int n = x_t.cols;
  for (int r = 0; r < w.rows; ++r) {
    double* y = y_t.row(r);
    const double br = b[static_cast<std::size_t>(r)];
    for (int f = 0; f < n; ++f) y[f] = br;
    const double* wr = w.row(r);
    for (int c = 0; c < w.cols; ++c) {
      const double wv = wr[c];
      if (wv == 0.0) continue;
      const double* x = x_t.row(c);
      for (int f = 0; f < n; ++f) y[f] += wv * x[f];
    }
  }
}

// dx_t += W^T dy_t
void lin_backward_data_t(const Mat& w, const Mat& dy_t, Mat& dx_t) {
  const int n = dy_t.cols;
  for (int r = 0; r < w.rows; ++r) {
    const double* wr = w.row(r);
    const double* dy = dy_t.row(r);
    for (int c = 0; c < w.cols; ++c) {
      const double wv = wr[c];
      if (wv == 0.0) continue;
      double* dx = dx_t.row(c);
      for (int f = 0; f < n; ++f) dx[f] += wv * dy[f];
    }
  }
}

// Wg += dy_t x_t^T, bg += row sums of dy_t
void lin_backward_params_t(const Mat& dy_t, const Mat& x_t, Mat& wg, Vec& bg) {
  const int n = dy_t.cols;
  for (int r = 0; r < wg.rows; ++r) {
    const double* dy = dy_t.row(r);
    double bsum = 0.0;
    for (int f = 0; f < n; ++f) bsum += dy[f];
    bg[static_cast<std::size_t>(r)] += bsum;
    double* wgr = wg.row(r);
    for (int c = 0; c < wg.cols; ++c) {
      const double* x = x_t.row(c);
      double acc = 0.0;
      for (int f = 0; f < n; ++f) acc += dy[f] * x[f];
      wgr[c] += acc;
    }
  }
}

}  // namespace

HeadLogits forward(const ModelConfig& cfg, const ModelParams& params, const double* features,
                   const DropMask* mask, ForwardCache& cache) {
  const int n = cfg.n_frames;
  const int hidden = cfg.hidden_dim;
  if (mask && static_cast<int>(mask->keep.size()) != cfg.depth) {
    raise(ErrorKind::Contract, "drop mask depth mismatch");
  }

  static thread_local Mat pe_cache;
  static thread_local ModelConfig pe_cfg;
  if (pe_cache.rows != n || pe_cache.cols != cfg.feature_dim ||
      pe_cfg.pos_scale != cfg.pos_scale || pe_cfg.feature_dim != cfg.feature_dim ||
      pe_cfg.n_frames != cfg.n_frames) {
    pe_cache = positional_encoding(cfg);
    pe_cfg = cfg;
  }

  ensure_shape(cache.input_t, cfg.feature_dim, n);
  for (int f = 0; f < n; ++f) {
    const double* src = features + static_cast<std::size_t>(f) * cfg.feature_dim;
    const double* pe = pe_cache.row(f);
    for (int d = 0; d < cfg.feature_dim; ++d) cache.input_t.at(d, f) = src[d] + pe[d];
  }

  cache.h_t.resize(static_cast<std::size_t>(cfg.depth) + 1);
  cache.act_t.resize(static_cast<std::size_t>(cfg.depth));
  cache.gate_t.resize(static_cast<std::size_t>(cfg.depth));
  for (Mat& m : cache.h_t) ensure_shape(m, hidden, n);
  for (Mat& m : cache.act_t) ensure_shape(m, hidden, n);
  for (Mat& m : cache.gate_t) ensure_shape(m, hidden, n);
  cache.branch_scale.assign(static_cast<std::size_t>(cfg.depth), 1.0);

  lin_forward_t(params.stem_w, cache.input_t, params.stem_b, cache.h_t[0]);

  static thread_local Mat r_t;
  ensure_shape(r_t, hidden, n);
  for (int k = 0; k < cfg.depth; ++k) {
    const Block& blk = params.blocks[static_cast<std::size_t>(k)];
    double scale = 1.0;
    if (mask) {
      scale = mask->keep[static_cast<std::size_t>(k)]
                  ? 1.0 / (1.0 - cfg.drop_path_rate)
                  : 0.0;
    }
    cache.branch_scale[static_cast<std::size_t>(k)] = scale;
    const Mat& h_in = cache.h_t[static_cast<std::size_t>(k)];
    Mat& h_out = cache.h_t[static_cast<std::size_t>(k) + 1];
    Mat& act = cache.act_t[static_cast<std::size_t>(k)];
    Mat& gate = cache.gate_t[static_cast<std::size_t>(k)];

    lin_forward_t(blk.w1, h_in, blk.b1, act);  // act holds u until transformed
    double* av = act.a.data();
    double* gv = gate.a.data();
    const std::size_t total = act.size();
    for (std::size_t i = 0; i < total; ++i) {
      av[i] = activation(av[i]);
      gv[i] = activation_grad_from_value(av[i]);
    }
    lin_forward_t(blk.w2, act, blk.b2, r_t);
    const double* hi = h_in.a.data();
    const double* rv = r_t.a.data();
    double* ho = h_out.a.data();
    for (std::size_t i = 0; i < total; ++i) ho[i] = hi[i] + scale * rv[i];
  }

  cache.pooled.assign(static_cast<std::size_t>(hidden), 0.0);
  const Mat& h_last = cache.h_t[static_cast<std::size_t>(cfg.depth)];
  for (int i = 0; i < hidden; ++i) {
    const double* hr = h_last.row(i);
    double acc = 0.0;
    for (int f = 0; f < n; ++f) acc += hr[f];
    cache.pooled[static_cast<std::size_t>(i)] = acc / n;
  }

  HeadLogits out;
  out.oscc.assign(2, 0.0);
  out.temporal.assign(static_cast<std::size_t>(cfg.temporal_classes()), 0.0);
  affine(params.oscc_w, cache.pooled.data(), params.oscc_b, out.oscc.data());
  affine(params.temporal_w, cache.pooled.data(), params.temporal_b, out.temporal.data());
  return out;
}

double softmax_cross_entropy(const Vec& logits, const Vec& target, Vec* dlogits) {
  if (logits.size() != target.size() || logits.empty()) {
    raise(ErrorKind::Contract, "cross-entropy shape mismatch");
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - max_logit);
  const double log_z = std::log(z) + max_logit;
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (target[i] != 0.0) loss += target[i] * (log_z - logits[i]);
  }
  if (dlogits) {
    dlogits->resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      (*dlogits)[i] = std::exp(logits[i] - log_z) - target[i];
    }
  }
  return loss;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z = params;
  z.stem_w.fill(0.0);
  z.stem_b.assign(z.stem_b.size(), 0.0);
  for (Block& blk : z.blocks) {
    blk.w1.fill(0.0);
    blk.b1.assign(blk.b1.size(), 0.0);
    blk.w2.fill(0.0);
    blk.b2.assign(blk.b2.size(), 0.0);
  }
  z.oscc_w.fill(0.0);
  z.oscc_b.assign(z.oscc_b.size(), 0.0);
  z.temporal_w.fill(0.0);
  z.temporal_b.assign(z.temporal_b.size(), 0.0);
  return z;
}

namespace {

// Pulls the per-clip gradient back through the cached forward pass.
void backward_clip(const ModelConfig& cfg, const ModelParams& params, const ForwardCache& cache,
                   const Vec& d_oscc, const Vec& d_temporal, ModelParams& grads) {
  const int n = cfg.n_frames;
  const int hidden = cfg.hidden_dim;

  Vec d_pooled(static_cast<std::size_t>(hidden), 0.0);
  add_outer(grads.oscc_w, grads.oscc_b, d_oscc.data(), cache.pooled.data());
  add_matvec_transposed(params.oscc_w, d_oscc.data(), d_pooled.data());
  add_outer(grads.temporal_w, grads.temporal_b, d_temporal.data(), cache.pooled.data());
  add_matvec_transposed(params.temporal_w, d_temporal.data(), d_pooled.data());

  static thread_local Mat dh_t, dr_t, du_t;
  ensure_shape(dh_t, hidden, n);
  ensure_shape(dr_t, hidden, n);
  ensure_shape(du_t, hidden, n);
  for (int i = 0; i < hidden; ++i) {
    const double g = d_pooled[static_cast<std::size_t>(i)] / n;
    double* row = dh_t.row(i);
    for (int f = 0; f < n; ++f) row[f] = g;
  }

  for (int k = cfg.depth - 1; k >= 0; --k) {
    const Block& blk = params.blocks[static_cast<std::size_t>(k)];
    Block& gblk = grads.blocks[static_cast<std::size_t>(k)];
    const double scale = cache.branch_scale[static_cast<std::size_t>(k)];
    // When the branch is dropped dh passes through unchanged.
    if (scale == 0.0) continue;
    const Mat& h_in = cache.h_t[static_cast<std::size_t>(k)];
    const Mat& act = cache.act_t[static_cast<std::size_t>(k)];
    const Mat& gate = cache.gate_t[static_cast<std::size_t>(k)];

    const double* dhv = dh_t.a.data();
    double* drv = dr_t.a.data();
    for (std::size_t i = 0; i < dr_t.size(); ++i) drv[i] = scale * dhv[i];
    lin_backward_params_t(dr_t, act, gblk.w2, gblk.b2);
    du_t.fill(0.0);
    lin_backward_data_t(blk.w2, dr_t, du_t);  // du holds da until gated
    const double* gv = gate.a.data();
    double* duv = du_t.a.data();
    for (std::size_t i = 0; i < du_t.size(); ++i) duv[i] *= gv[i];
    lin_backward_params_t(du_t, h_in, gblk.w1, gblk.b1);
    // dh_in = dh_out + W1^T du (residual path plus branch path).
    lin_backward_data_t(blk.w1, du_t, dh_t);
  }

  lin_backward_params_t(dh_t, cache.input_t, grads.stem_w, grads.stem_b);
}

}  // namespace

LossBreakdown loss_and_grad(const ModelConfig& cfg, const ModelParams& params,
                            const std::vector<Example>& batch, double lambda1, double lambda2,
                            const std::vector<DropMask>* masks, ModelParams& grads) {
  if (batch.empty()) raise(ErrorKind::InvalidArgument, "loss_and_grad: empty batch");
  if (masks && masks->size() != batch.size()) {
    raise(ErrorKind::Contract, "one drop mask per batch element required");
  }
  grads = zeros_like(params);

  LossBreakdown bd;
  bd.lambda1 = lambda1;
  bd.lambda2 = lambda2;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  ForwardCache cache;
  Vec d_oscc, d_temporal;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = batch[i];
    if (ex.n_frames != cfg.n_frames || ex.feature_dim != cfg.feature_dim ||
        ex.features.size() != static_cast<std::size_t>(cfg.n_frames) * cfg.feature_dim) {
      raise(ErrorKind::Contract, "feature shape mismatch for clip '" + ex.clip_id + "'");
    }
    const DropMask* mask = masks ? &(*masks)[i] : nullptr;
    const HeadLogits logits = forward(cfg, params, ex.features.data(), mask, cache);
    const double lo = softmax_cross_entropy(logits.oscc, ex.targets.oscc, &d_oscc);
    const double lt = softmax_cross_entropy(logits.temporal, ex.targets.temporal, &d_temporal);
    if (!std::isfinite(lo) || !std::isfinite(lt)) {
      raise(ErrorKind::Numeric, "non-finite loss for clip '" + ex.clip_id + "'");
    }
    bd.l_oscc += lo * inv_b;
    bd.l_tl += lt * inv_b;
    for (double& v : d_oscc) v *= lambda1 * inv_b;
    for (double& v : d_temporal) v *= lambda2 * inv_b;
    backward_clip(cfg, params, cache, d_oscc, d_temporal, grads);
  }
  bd.total = lambda1 * bd.l_oscc + lambda2 * bd.l_tl;
  return bd;
}

namespace {

constexpr char kCkptMagic[4] = {'E', 'G', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    raise(ErrorKind::Format, "checkpoint truncated");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    raise(ErrorKind::Format, "checkpoint truncated");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const ModelConfig& cfg, const ModelParams& params,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(kCkptMagic, 4);
  put_u32(out, kCkptVersion);
  put_u32(out, static_cast<std::uint32_t>(cfg.feature_dim));
  put_u32(out, static_cast<std::uint32_t>(cfg.hidden_dim));
  put_u32(out, static_cast<std::uint32_t>(cfg.depth));
  put_u32(out, static_cast<std::uint32_t>(cfg.n_frames));
  put_f64(out, cfg.drop_path_rate);
  put_f64(out, cfg.pos_scale);

  auto refs = tensor_refs(const_cast<ModelParams&>(params), cfg);
  put_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const TensorRef& ref : refs) {
    put_u32(out, static_cast<std::uint32_t>(ref.shape.size()));
    for (int d : ref.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : *ref.data) put_f64(out, v);
  }
  if (!out) raise(ErrorKind::Io, "short write to '" + path + "'");
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCkptMagic, 4) != 0) {
    raise(ErrorKind::Format, "'" + path + "' is not an EGCK checkpoint");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCkptVersion) {
    raise(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.feature_dim = static_cast<int>(get_u32(in));
  cfg.hidden_dim = static_cast<int>(get_u32(in));
  cfg.depth = static_cast<int>(get_u32(in));
  cfg.n_frames = static_cast<int>(get_u32(in));
  cfg.drop_path_rate = get_f64(in);
  cfg.pos_scale = get_f64(in);
  validate_model_config(cfg);

  ModelParams params = init_params(cfg, 0);
  auto refs = tensor_refs(params, cfg);
  const std::uint32_t count = get_u32(in);
  if (count != refs.size()) {
    raise(ErrorKind::Format, "checkpoint tensor count mismatch: expected " +
                                 std::to_string(refs.size()) + ", got " + std::to_string(count));
  }
  for (TensorRef& ref : refs) {
    const std::uint32_t ndim = get_u32(in);
    if (ndim != ref.shape.size()) {
      raise(ErrorKind::Format, "checkpoint shape rank mismatch for " + ref.name);
    }
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const std::uint32_t dim = get_u32(in);
      if (dim != static_cast<std::uint32_t>(ref.shape[d])) {
        raise(ErrorKind::Format, "checkpoint shape mismatch for " + ref.name);
      }
      total *= dim;
    }
    if (total != ref.data->size()) {
      raise(ErrorKind::Format, "checkpoint tensor size mismatch for " + ref.name);
    }
    for (double& v : *ref.data) {
      v = get_f64(in);
      if (!std::isfinite(v)) {
        raise(ErrorKind::Format, "non-finite parameter in checkpoint tensor " + ref.name);
      }
    }
  }
  return {cfg, std::move(params)};
}

std::uint64_t params_digest(const ModelParams& params) {
  // FNV-1a over the raw parameter bytes, in tensor declaration order.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const Vec& v) {
    for (double d : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, 8);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  };
  mix(params.stem_w.a);
  mix(params.stem_b);
  for (const Block& blk : params.blocks) {
    mix(blk.w1.a);
    mix(blk.b1);
    mix(blk.w2.a);
    mix(blk.b2);
  }
  mix(params.oscc_w.a);
  mix(params.oscc_b);
  mix(params.temporal_w.a);
  mix(params.temporal_b);
  return h;
}

}  // namespace egopnr
