// Command-line front end. Everything goes through the public C API in
// include/egopnr.h; the core library is not linked directly.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "egopnr.h"

namespace {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("EGO_LOG");
  if (!env) return LogLevel::Info;
  if (std::strcmp(env, "error") == 0) return LogLevel::Error;
  if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
  return LogLevel::Info;
}

void log_info(const std::string& message) {
  if (log_level() >= LogLevel::Info) std::fprintf(stderr, "[egopnr] %s\n", message.c_str());
}

void log_debug(const std::string& message) {
  if (log_level() >= LogLevel::Debug) std::fprintf(stderr, "[egopnr] %s\n", message.c_str());
}

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(egopnr_status status, const std::string& what) {
  if (status != EGOPNR_OK) {
    throw CliError(what + ": " + egopnr_status_name(status) + ": " + egopnr_last_error());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw CliError("short write to '" + path + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

using ManifestPtr = std::unique_ptr<egopnr_manifest, decltype(&egopnr_manifest_free)>;
using FeaturesPtr = std::unique_ptr<egopnr_features, decltype(&egopnr_features_free)>;
using ModelPtr = std::unique_ptr<egopnr_model, decltype(&egopnr_model_free)>;

ManifestPtr load_manifest(const std::string& path) {
  egopnr_manifest* m = nullptr;
  check(egopnr_manifest_load(path.c_str(), &m), "loading manifest '" + path + "'");
  return ManifestPtr(m, &egopnr_manifest_free);
}

FeaturesPtr load_features(const std::string& path) {
  egopnr_features* f = nullptr;
  check(egopnr_features_load(path.c_str(), &f), "loading features '" + path + "'");
  return FeaturesPtr(f, &egopnr_features_free);
}

std::string split_manifest_path(const std::string& dir, const std::string& split) {
  return (std::filesystem::path(dir) / (split + ".manifest.json")).string();
}

std::string split_features_path(const std::string& dir, const std::string& split) {
  return (std::filesystem::path(dir) / (split + ".features.bin")).string();
}

struct GenArgs {
  std::int64_t clips = 100;
  double p_pos = 0.5;
  std::string prior = "uniform";
  double snr = 4.0;
  int dim = 16;
  int views = 3;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen(const GenArgs& args) {
  egopnr_synth_config cfg;
  egopnr_synth_config_init(&cfg);
  cfg.p_pos = args.p_pos;
  cfg.snr = args.snr;
  cfg.feature_dim = args.dim;
  cfg.views_per_clip = args.views;
  if (args.prior == "uniform") {
    cfg.prior = EGOPNR_PRIOR_UNIFORM;
  } else if (args.prior.rfind("beta@", 0) == 0) {
    cfg.prior = EGOPNR_PRIOR_BETA;
    try {
      cfg.prior_fraction = std::stod(args.prior.substr(5));
    } catch (const std::exception&) {
      throw CliError("cannot parse prior fraction in '" + args.prior + "'");
    }
  } else {
    throw CliError("prior must be 'uniform' or 'beta@F', got '" + args.prior + "'");
  }

  std::error_code ec;
  std::filesystem::create_directories(args.out, ec);
  if (ec) throw CliError("cannot create output directory '" + args.out + "'");

  // --clips sets the training split; val and test each get 20% of it.
  const struct {
    const char* name;
    int split;
    std::int64_t count;
  } splits[] = {
      {"train", EGOPNR_SPLIT_TRAIN, args.clips},
      {"val", EGOPNR_SPLIT_VAL, std::max<std::int64_t>(1, args.clips / 5)},
      {"test", EGOPNR_SPLIT_TEST, std::max<std::int64_t>(1, args.clips / 5)},
  };
  for (std::size_t i = 0; i < 3; ++i) {
    cfg.split = splits[i].split;
    cfg.clip_count = splits[i].count;
    egopnr_manifest* manifest = nullptr;
    egopnr_features* features = nullptr;
    check(egopnr_generate_synthetic(&cfg, args.seed + i, &manifest, &features),
          std::string("generating ") + splits[i].name + " split");
    ManifestPtr m(manifest, &egopnr_manifest_free);
    FeaturesPtr f(features, &egopnr_features_free);
    const std::string mpath = split_manifest_path(args.out, splits[i].name);
    const std::string fpath = split_features_path(args.out, splits[i].name);
    check(egopnr_manifest_save(m.get(), mpath.c_str()), "writing '" + mpath + "'");
    check(egopnr_features_save(f.get(), fpath.c_str()), "writing '" + fpath + "'");
    log_info("wrote " + std::to_string(splits[i].count) + " " + splits[i].name + " clips to " +
             mpath);
  }
  return 0;
}

struct AnalyzeArgs {
  std::string sampler = "even";
  int n = 16;
  double fps = 30.0;
  std::uint64_t trials = 1000000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_analyze(const AnalyzeArgs& args) {
  int sampler = EGOPNR_SAMPLER_EVEN;
  if (args.sampler == "even") {
    sampler = EGOPNR_SAMPLER_EVEN;
  } else if (args.sampler == "stratified") {
    sampler = EGOPNR_SAMPLER_STRATIFIED;
  } else if (args.sampler == "random") {
    sampler = EGOPNR_SAMPLER_RANDOM;
  } else {
    throw CliError("sampler must be one of even|stratified|random");
  }

  egopnr_shift_stats stats;
  check(egopnr_monte_carlo_shift(sampler, args.n, args.fps, args.trials, args.seed, 0, &stats),
        "monte carlo shift analysis");
  const auto s_min = static_cast<int32_t>(std::lround(5.0 * args.fps));
  const auto s_max = static_cast<int32_t>(std::lround(8.0 * args.fps));
  double bound = 0.0;
  check(egopnr_half_gap_expected_shift(args.n, args.fps, s_min, s_max, &bound),
        "analytic shift bound");

  std::ostringstream json;
  json << "{\n"
       << "  \"sampler\": \"" << args.sampler << "\",\n"
       << "  \"n\": " << args.n << ",\n"
       << "  \"fps\": " << fmt_double(args.fps) << ",\n"
       << "  \"trials\": " << args.trials << ",\n"
       << "  \"seed\": " << args.seed << ",\n"
       << "  \"mean_shift_s\": " << fmt_double(stats.mean_s) << ",\n"
       << "  \"std_shift_s\": " << fmt_double(stats.std_s) << ",\n"
       << "  \"max_shift_s\": " << fmt_double(stats.max_s) << ",\n"
       << "  \"analytic_bound_s\": " << fmt_double(bound) << "\n"
       << "}\n";
  if (args.out.empty()) {
    std::fputs(json.str().c_str(), stdout);
  } else {
    write_file(args.out, json.str());
    log_info("wrote shift report to " + args.out);
  }
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
};

int run_train(const TrainArgs& args) {
  const std::string config_json = read_file(args.config);
  ManifestPtr train_m = load_manifest(split_manifest_path(args.data, "train"));
  ManifestPtr val_m = load_manifest(split_manifest_path(args.data, "val"));
  FeaturesPtr train_f = load_features(split_features_path(args.data, "train"));
  FeaturesPtr val_f = load_features(split_features_path(args.data, "val"));
  log_debug("training on " + std::to_string(egopnr_manifest_clip_count(train_m.get())) +
            " clips, validating on " + std::to_string(egopnr_manifest_clip_count(val_m.get())));

  egopnr_model* best = nullptr;
  check(egopnr_train_run(config_json.c_str(), train_m.get(), val_m.get(), train_f.get(),
                         val_f.get(), args.out.c_str(), &best),
        "training");
  ModelPtr model(best, &egopnr_model_free);
  log_info("training done; best checkpoint and history written to " + args.out);
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  int views = 3;
  std::string out;
  std::string csv;
  std::string split = "val";
};

int run_eval(const EvalArgs& args) {
  egopnr_model* raw_model = nullptr;
  check(egopnr_model_load(args.checkpoint.c_str(), &raw_model),
        "loading checkpoint '" + args.checkpoint + "'");
  ModelPtr model(raw_model, &egopnr_model_free);
  ManifestPtr manifest = load_manifest(split_manifest_path(args.data, args.split));
  FeaturesPtr features = load_features(split_features_path(args.data, args.split));

  char* report = nullptr;
  char* csv = nullptr;
  check(egopnr_evaluate(model.get(), manifest.get(), features.get(), args.views, &report,
                        args.csv.empty() ? nullptr : &csv),
        "evaluation");
  std::unique_ptr<char, decltype(&egopnr_string_free)> report_guard(report, &egopnr_string_free);
  std::unique_ptr<char, decltype(&egopnr_string_free)> csv_guard(csv, &egopnr_string_free);
  write_file(args.out, report);
  if (!args.csv.empty()) write_file(args.csv, csv);
  log_info("wrote metrics report to " + args.out);
  return 0;
}

struct BaselineArgs {
  std::string mode = "positive";
  double fraction = 0.45;
  std::string data;
  std::string out;
  std::string split = "val";
};

int run_baseline(const BaselineArgs& args) {
  int mode = EGOPNR_BASELINE_POSITIVE;
  if (args.mode == "positive") {
    mode = EGOPNR_BASELINE_POSITIVE;
  } else if (args.mode == "center") {
    mode = EGOPNR_BASELINE_CENTER;
  } else if (args.mode == "fixed") {
    mode = EGOPNR_BASELINE_FIXED;
  } else {
    throw CliError("mode must be one of positive|center|fixed");
  }
  ManifestPtr manifest = load_manifest(split_manifest_path(args.data, args.split));
  char* report = nullptr;
  check(egopnr_baseline(manifest.get(), mode, args.fraction, &report), "baseline");
  std::unique_ptr<char, decltype(&egopnr_string_free)> guard(report, &egopnr_string_free);
  write_file(args.out, report);
  log_info("wrote baseline report to " + args.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic state-change / PNR-localization harness"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--clips", gen.clips, "training clip count (val/test get 20% each)")
      ->capture_default_str();
  gen_cmd->add_option("--p-pos", gen.p_pos, "state-change fraction")->capture_default_str();
  gen_cmd->add_option("--prior", gen.prior, "PNR time prior: uniform or beta@F")
      ->capture_default_str();
  gen_cmd->add_option("--snr", gen.snr, "bump amplitude over unit noise")->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "feature dimension")->capture_default_str();
  gen_cmd->add_option("--views", gen.views, "views per clip")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  AnalyzeArgs analyze;
  CLI::App* analyze_cmd =
      app.add_subcommand("analyze-sampling", "sampling-induced temporal shift analysis");
  analyze_cmd->add_option("--sampler", analyze.sampler, "even|stratified|random")
      ->capture_default_str();
  analyze_cmd->add_option("--n", analyze.n, "frames per clip")->capture_default_str();
  analyze_cmd->add_option("--fps", analyze.fps, "frames per second")->capture_default_str();
  analyze_cmd->add_option("--trials", analyze.trials, "Monte-Carlo trials")
      ->capture_default_str();
  analyze_cmd->add_option("--seed", analyze.seed, "random seed")->capture_default_str();
  analyze_cmd->add_option("--out", analyze.out, "report path (stdout when omitted)");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "fine-tune the two-head classifier");
  train_cmd->add_option("--config", train.config, "training config JSON")->required();
  train_cmd->add_option("--data", train.data, "dataset directory from 'gen'")->required();
  train_cmd->add_option("--out", train.out, "output directory for history and checkpoint")
      ->required();

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "EGCK checkpoint path")->required();
  eval_cmd->add_option("--data", eval.data, "dataset directory")->required();
  eval_cmd->add_option("--views", eval.views, "views to aggregate (0 = all)")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "metrics report path")->required();
  eval_cmd->add_option("--csv", eval.csv, "optional per-clip error CSV path");
  eval_cmd->add_option("--split", eval.split, "dataset split to evaluate")
      ->capture_default_str();

  BaselineArgs baseline;
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "constant-predictor baselines");
  baseline_cmd->add_option("--mode", baseline.mode, "positive|center|fixed")
      ->capture_default_str();
  baseline_cmd->add_option("--fraction", baseline.fraction, "duration fraction for --mode fixed")
      ->capture_default_str();
  baseline_cmd->add_option("--data", baseline.data, "dataset directory")->required();
  baseline_cmd->add_option("--out", baseline.out, "report path")->required();
  baseline_cmd->add_option("--split", baseline.split, "dataset split")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen);
    if (analyze_cmd->parsed()) return run_analyze(analyze);
    if (train_cmd->parsed()) return run_train(train);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (baseline_cmd->parsed()) return run_baseline(baseline);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
