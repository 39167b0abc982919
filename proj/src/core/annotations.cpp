#include "annotations.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace egopnr {

using nlohmann::ordered_json;

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  raise(ErrorKind::Validation, "unknown split '" + name + "'");
}

namespace {

void check_clip(const ClipAnnotation& clip) {
  const std::string who = "clip '" + clip.clip_id + "'";
  if (clip.clip_id.empty()) raise(ErrorKind::Validation, "clip with empty clip_id");
  if (!(clip.fps > 0.0)) raise(ErrorKind::Validation, who + ": fps must be > 0");
  if (clip.num_frames <= 0) raise(ErrorKind::Validation, who + ": num_frames must be > 0");
  if (clip.has_state_change != clip.pnr_frame.has_value()) {
    raise(ErrorKind::Validation,
          who + ": pnr_frame must be present iff has_state_change is true");
  }
  if (clip.pnr_frame && (*clip.pnr_frame < 0 || *clip.pnr_frame >= clip.num_frames)) {
    raise(ErrorKind::Validation,
          who + ": pnr_frame " + std::to_string(*clip.pnr_frame) +
              " outside [0, " + std::to_string(clip.num_frames) + ")");
  }
}

// Byte offset -> 1-based line for parse diagnostics.
std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  const std::size_t end = std::min(offset, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

void reject_unknown_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                         const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      raise(ErrorKind::Validation, context + ": unknown key '" + it.key() + "'");
    }
  }
}

}  // namespace

void validate_manifest(const DatasetManifest& manifest) {
  if (manifest.feature_dim <= 0) raise(ErrorKind::Validation, "feature_dim must be > 0");
  if (manifest.views_per_clip < 1) raise(ErrorKind::Validation, "views_per_clip must be >= 1");
  std::set<std::string> seen;
  for (const ClipAnnotation& clip : manifest.clips) {
    check_clip(clip);
    if (!seen.insert(clip.clip_id).second) {
      raise(ErrorKind::Validation, "duplicate clip_id '" + clip.clip_id + "'");
    }
  }
}

DatasetManifest parse_manifest(const std::string& json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    raise(ErrorKind::Parse, "manifest JSON parse error at line " +
                                std::to_string(line_of_offset(json_text, e.byte)) + ": " +
                                e.what());
  }
  if (!root.is_object()) raise(ErrorKind::Parse, "manifest root must be a JSON object");
  reject_unknown_keys(root, {"split", "feature_dim", "views_per_clip", "clips"}, "manifest");

  DatasetManifest manifest;
  try {
    manifest.split = split_from_name(root.at("split").get<std::string>());
    manifest.feature_dim = root.at("feature_dim").get<int>();
    manifest.views_per_clip = root.value("views_per_clip", 3);
    const ordered_json& clips = root.at("clips");
    if (!clips.is_array()) raise(ErrorKind::Validation, "'clips' must be an array");
    manifest.clips.reserve(clips.size());
    for (const ordered_json& entry : clips) {
      if (!entry.is_object()) raise(ErrorKind::Validation, "clip entry must be an object");
      reject_unknown_keys(
          entry, {"clip_id", "fps", "num_frames", "has_state_change", "pnr_frame"},
          "clip '" + entry.value("clip_id", std::string("?")) + "'");
      ClipAnnotation clip;
      clip.clip_id = entry.at("clip_id").get<std::string>();
      clip.fps = entry.value("fps", 30.0);
      clip.num_frames = entry.value("num_frames", 240);
      clip.has_state_change = entry.at("has_state_change").get<bool>();
      if (entry.contains("pnr_frame")) clip.pnr_frame = entry.at("pnr_frame").get<int>();
      manifest.clips.push_back(std::move(clip));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::Validation, std::string("manifest field error: ") + e.what());
  }
  validate_manifest(manifest);
  return manifest;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  ordered_json root;
  root["split"] = split_name(manifest.split);
  root["feature_dim"] = manifest.feature_dim;
  root["views_per_clip"] = manifest.views_per_clip;
  ordered_json clips = ordered_json::array();
  for (const ClipAnnotation& clip : manifest.clips) {
    ordered_json entry;
    entry["clip_id"] = clip.clip_id;
    entry["fps"] = clip.fps;
    entry["num_frames"] = clip.num_frames;
    entry["has_state_change"] = clip.has_state_change;
    if (clip.pnr_frame) entry["pnr_frame"] = *clip.pnr_frame;
    clips.push_back(std::move(entry));
  }
  root["clips"] = std::move(clips);
  return root.dump(2) + "\n";
}

DatasetManifest read_manifest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open manifest '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

void write_manifest_file(const DatasetManifest& manifest, const std::string& path) {
  validate_manifest(manifest);
  const std::string text = manifest_to_json(manifest);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) raise(ErrorKind::Io, "short write to '" + path + "'");
}

void FeatureStore::insert(const std::string& clip_id, std::vector<float> values) {
  if (values.size() != values_per_clip()) {
    raise(ErrorKind::Contract, "feature tensor for '" + clip_id + "' has " +
                                   std::to_string(values.size()) + " values, expected " +
                                   std::to_string(values_per_clip()));
  }
  if (index_.count(clip_id)) {
    raise(ErrorKind::Contract, "duplicate feature entry '" + clip_id + "'");
  }
  order_.push_back(clip_id);
  index_.emplace(clip_id, std::move(values));
}

const std::vector<float>& FeatureStore::values(const std::string& clip_id) const {
  auto it = index_.find(clip_id);
  if (it == index_.end()) {
    raise(ErrorKind::Contract, "no features for clip '" + clip_id + "'");
  }
  return it->second;
}

const float* FeatureStore::view_data(const std::string& clip_id, int view) const {
  if (view < 0 || view >= views_) {
    raise(ErrorKind::Contract, "view " + std::to_string(view) + " out of range");
  }
  return values(clip_id).data() + static_cast<std::size_t>(view) * frames_ * dim_;
}

namespace {

constexpr char kFeatureMagic[4] = {'E', 'G', 'F', '1'};
constexpr std::uint32_t kFeatureVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

std::uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    raise(ErrorKind::Format, "feature file truncated while reading " + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in, const std::string& what) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) {
    raise(ErrorKind::Format, "feature file truncated while reading " + what);
  }
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

// f32 payloads are written little-endian; on the (non-existent here) odd
// chance of a big-endian host the bytes would need swapping.
static_assert(sizeof(float) == 4, "float must be 32-bit");

}  // namespace

void write_features_file(const FeatureStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(kFeatureMagic, 4);
  write_u32(out, kFeatureVersion);
  write_u32(out, static_cast<std::uint32_t>(store.clip_count()));
  write_u32(out, static_cast<std::uint32_t>(store.views()));
  write_u32(out, static_cast<std::uint32_t>(store.frames()));
  write_u32(out, static_cast<std::uint32_t>(store.dim()));
  for (const std::string& id : store.clip_ids()) {
    if (id.size() > 0xffff) raise(ErrorKind::Format, "clip_id too long: '" + id + "'");
    write_u16(out, static_cast<std::uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    const std::vector<float>& v = store.values(id);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  }
  if (!out) raise(ErrorKind::Io, "short write to '" + path + "'");
}

FeatureStore read_features_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open feature file '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    raise(ErrorKind::Format, "'" + path + "' is not an EGF1 feature file");
  }
  const std::uint32_t version = read_u32(in, "version");
  if (version != kFeatureVersion) {
    raise(ErrorKind::Format, "unsupported feature file version " + std::to_string(version));
  }
  const std::uint32_t clip_count = read_u32(in, "clip_count");
  const std::uint32_t views = read_u32(in, "views");
  const std::uint32_t frames = read_u32(in, "frames");
  const std::uint32_t dim = read_u32(in, "dim");
  if (views == 0 || frames == 0 || dim == 0) {
    raise(ErrorKind::Format, "feature file declares an empty tensor shape");
  }

  FeatureStore store(static_cast<int>(views), static_cast<int>(frames),
                     static_cast<int>(dim));
  const std::size_t per_clip = store.values_per_clip();
  for (std::uint32_t i = 0; i < clip_count; ++i) {
    const std::uint16_t id_len = read_u16(in, "clip id length");
    std::string id(id_len, '\0');
    if (id_len > 0 && !in.read(id.data(), id_len)) {
      raise(ErrorKind::Format, "feature file truncated while reading clip id");
    }
    std::vector<float> values(per_clip);
    const std::streamsize want = static_cast<std::streamsize>(per_clip * sizeof(float));
    in.read(reinterpret_cast<char*>(values.data()), want);
    if (in.gcount() != want) {
      raise(ErrorKind::Format,
            "feature payload for '" + id + "' truncated: expected " + std::to_string(want) +
                " bytes, got " + std::to_string(in.gcount()));
    }
    for (float v : values) {
      if (!std::isfinite(v)) {
        raise(ErrorKind::Format, "non-finite feature value in clip '" + id + "'");
      }
    }
    store.insert(id, std::move(values));
  }
  return store;
}

void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.clip_count < 0) raise(ErrorKind::InvalidArgument, "clip_count must be >= 0");
  if (!(cfg.p_pos >= 0.0 && cfg.p_pos <= 1.0)) {
    raise(ErrorKind::InvalidArgument, "p_pos must be in [0, 1]");
  }
  if (cfg.snr < 0.0) raise(ErrorKind::InvalidArgument, "snr must be >= 0");
  if (cfg.feature_dim <= 0) raise(ErrorKind::InvalidArgument, "feature_dim must be > 0");
  if (cfg.views_per_clip < 1) raise(ErrorKind::InvalidArgument, "views_per_clip must be >= 1");
  if (cfg.num_frames <= 0) raise(ErrorKind::InvalidArgument, "num_frames must be > 0");
  if (!(cfg.fps > 0.0)) raise(ErrorKind::InvalidArgument, "fps must be > 0");
  if (!(cfg.prior_fraction >= 0.0 && cfg.prior_fraction <= 1.0)) {
    raise(ErrorKind::InvalidArgument, "prior_fraction must be in [0, 1]");
  }
  if (cfg.bump_half_width < 0) raise(ErrorKind::InvalidArgument, "bump_half_width must be >= 0");
}

namespace {

std::string make_clip_id(Split split, std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%06lld", split_name(split)[0],
                static_cast<long long>(index));
  return buf;
}

// PNR time in seconds under the configured prior.
double draw_pnr_time(const SynthConfig& cfg, Rng& rng) {
  const double dur = cfg.num_frames / cfg.fps;
  if (cfg.prior == PnrPrior::Uniform) return rng.uniform_range(0.0, dur);
  // Beta with mode at prior_fraction; concentration controls the spread.
  const double a = 1.0 + cfg.prior_fraction * cfg.prior_concentration;
  const double b = 1.0 + (1.0 - cfg.prior_fraction) * cfg.prior_concentration;
  return dur * rng.beta(a, b);
}

}  // namespace

DatasetManifest generate_manifest(const SynthConfig& cfg, std::uint64_t seed) {
  validate_synth_config(cfg);
  DatasetManifest manifest;
  manifest.split = cfg.split;
  manifest.feature_dim = cfg.feature_dim;
  manifest.views_per_clip = cfg.views_per_clip;
  manifest.clips.reserve(static_cast<std::size_t>(cfg.clip_count));
  Rng rng = Rng::from_stream(seed, {0x6c6162656cULL});  // label stream
  for (std::int64_t i = 0; i < cfg.clip_count; ++i) {
    ClipAnnotation clip;
    clip.clip_id = make_clip_id(cfg.split, i);
    clip.fps = cfg.fps;
    clip.num_frames = cfg.num_frames;
    clip.has_state_change = rng.bernoulli(cfg.p_pos);
    if (clip.has_state_change) {
      const double t = draw_pnr_time(cfg, rng);
      int frame = static_cast<int>(t * cfg.fps);
      frame = std::clamp(frame, 0, cfg.num_frames - 1);
      clip.pnr_frame = frame;
    }
    manifest.clips.push_back(std::move(clip));
  }
  return manifest;
}

FeatureStore generate_features(const DatasetManifest& manifest, const SynthConfig& cfg,
                               std::uint64_t seed) {
  validate_synth_config(cfg);
  FeatureStore store(cfg.views_per_clip, cfg.num_frames, cfg.feature_dim);
  const std::size_t per_view = static_cast<std::size_t>(cfg.num_frames) * cfg.feature_dim;
  for (std::size_t ci = 0; ci < manifest.clips.size(); ++ci) {
    const ClipAnnotation& clip = manifest.clips[ci];
    Rng rng = Rng::from_stream(seed, {0x66656174ULL, ci});  // per-clip feature stream
    std::vector<float> values(store.values_per_clip());
    for (int v = 0; v < cfg.views_per_clip; ++v) {
      float* view = values.data() + static_cast<std::size_t>(v) * per_view;
      for (std::size_t k = 0; k < per_view; ++k) {
        view[k] = static_cast<float>(rng.normal());
      }
      if (clip.has_state_change) {
        const int pnr = *clip.pnr_frame;
        for (int off = -cfg.bump_half_width; off <= cfg.bump_half_width; ++off) {
          const int f = pnr + off;
          if (f < 0 || f >= cfg.num_frames) continue;
          const double r = static_cast<double>(off) / (cfg.bump_half_width + 1.0);
          const float add = static_cast<float>(cfg.snr * (1.0 - r * r));
          float* frame = view + static_cast<std::size_t>(f) * cfg.feature_dim;
          for (int d = 0; d < cfg.feature_dim; ++d) frame[d] += add;
        }
      }
    }
    store.insert(clip.clip_id, std::move(values));
  }
  return store;
}

std::pair<DatasetManifest, FeatureStore> generate_synthetic(const SynthConfig& cfg,
                                                            std::uint64_t seed) {
  DatasetManifest manifest = generate_manifest(cfg, seed);
  FeatureStore store = generate_features(manifest, cfg, seed);
  return {std::move(manifest), std::move(store)};
}

}  // namespace egopnr
