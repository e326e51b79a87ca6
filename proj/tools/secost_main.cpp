// Copyright 2026 The SeCoST Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: feature extraction, base training, co-supervision
// sequences, evaluation, synthetic data generation and self-verification.
//
// Exit codes: 0 success, 1 operational failure, 2 config/validation failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "secost/secost.hpp"

namespace {

namespace fs = std::filesystem;
using namespace secost;

constexpr int kExitOk = 0;
constexpr int kExitOperational = 1;
constexpr int kExitConfig = 2;

void apply_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("SECOST_THREADS")) threads = std::atoi(env);
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kConfigError:
    case ErrorKind::kInvalidConfig:
    case ErrorKind::kAlphaOutOfRange:
      return kExitConfig;
    default:
      return kExitOperational;
  }
}

ProgressFn stdout_progress() {
  return [](const EpochStats& s) {
    std::printf("stage %d epoch %3d  loss %.5f  val_map %.4f  val_mauc %.4f%s\n", s.stage,
                s.epoch, s.train_loss, s.val_map, s.val_mauc, s.improved ? "  *" : "");
    std::fflush(stdout);
  };
}

SecostPaths paths_from_config(const RunConfig& cfg) {
  SecostPaths paths;
  paths.train_manifest = cfg.train_manifest;
  paths.val_manifest = cfg.val_manifest;
  paths.feature_dir = cfg.feature_dir;
  paths.checkpoint_dir = cfg.checkpoint_dir;
  if (!cfg.report_dir.empty()) paths.report_path = fs::path(cfg.report_dir) / "stages.jsonl";
  return paths;
}

int cmd_synth_data(const RunConfig& cfg, const std::string& out_dir) {
  auto result = synth_corpus(cfg.synth, out_dir);
  std::printf("wrote %zu train / %zu val / %zu eval clips under %s\n", result.plan.train.size(),
              result.plan.val.size(), result.plan.eval.size(), out_dir.c_str());
  std::printf("manifests: %s %s %s\n", result.train_manifest.c_str(),
              result.val_manifest.c_str(), result.eval_manifest.c_str());
  return kExitOk;
}

int cmd_featurize(const RunConfig& cfg, const std::string& manifest,
                  const std::string& features_dir, std::string out_manifest) {
  auto entries = load_manifest(manifest);
  const fs::path audio_root = fs::path(manifest).parent_path();
  auto result = featurize_manifest(entries, audio_root, features_dir, cfg.features);
  if (out_manifest.empty()) {
    out_manifest = (fs::path(features_dir) / fs::path(manifest).filename()).string();
  }
  write_manifest(out_manifest, result.entries);
  std::printf("featurized %d, cached %d, failed %zu -> %s\n", result.n_computed, result.n_cached,
              result.failures.size(), out_manifest.c_str());
  if (!result.failures.empty()) {
    std::fprintf(stderr, "failures:\n");
    for (const auto& [id, msg] : result.failures) {
      std::fprintf(stderr, "  %s: %s\n", id.c_str(), msg.c_str());
    }
    return kExitOperational;
  }
  return kExitOk;
}

int run_stages(const RunConfig& cfg, bool base_only) {
  SecostRunConfig run_cfg;
  run_cfg.model = cfg.model;
  run_cfg.train = cfg.train;
  if (!base_only) run_cfg.schedule = cfg.schedule;
  auto result = run_secost(paths_from_config(cfg), run_cfg, stdout_progress());
  for (const auto& row : result.rows) std::printf("%s\n", stage_row_json(row).c_str());
  std::printf("final checkpoint: %s\n", result.final_checkpoint.c_str());
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint, const std::string& manifest,
                 const std::string& out_path, const std::string& features_flag) {
  auto loaded = load_checkpoint(checkpoint);
  auto entries = load_manifest(manifest, loaded.model->config().n_classes);
  const fs::path feature_dir =
      features_flag.empty() ? fs::path(cfg.feature_dir) : fs::path(features_flag);
  std::vector<std::string> names;
  const fs::path classes_file = fs::path(manifest).parent_path() / "classes.txt";
  if (fs::exists(classes_file)) names = read_class_names(classes_file);
  EvalReport report =
      evaluate_model(*loaded.model, entries, feature_dir, names, cfg.train.batch_size);
  write_report(out_path, report);
  std::printf("n_eval %d  mAP %.4f  mAUC %.4f -> %s\n", report.n_eval, report.map, report.mauc,
              out_path.c_str());
  return kExitOk;
}

int cmd_compare(const std::string& base_path, const std::string& new_path,
                const std::string& out_path, bool histogram) {
  EvalReport base = read_report(base_path);
  EvalReport next = read_report(new_path);
  ImprovementBins bins = improvement_analysis(base, next);
  if (!out_path.empty()) write_text_atomic(out_path, improvement_to_json(bins).dump(2) + "\n");
  std::printf("mAP %.4f -> %.4f (%+.2f%%)\n", base.map, next.map,
              base.map > 0 ? 100.0 * (next.map - base.map) / base.map : 0.0);
  if (histogram) std::printf("%s", improvement_histogram(bins).c_str());
  else
    std::printf("classes improved >20%%: %d, degraded >10%%: %d (of %d)\n", bins.n_improved_gt20,
                bins.n_degraded_gt10, bins.n_classes);
  return kExitOk;
}

int cmd_verify(bool mutate_sign, int seeds) {
  VerifyOptions options;
  options.mutate_decomposed_sign = mutate_sign;
  options.gradcheck_seeds = seeds;
  bool all_pass = true;
  for (const auto& r : run_verify(options)) {
    std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? kExitOk : kExitOperational;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"secost: sequential co-supervision training for weakly labeled audio tagging"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int64_t seed = -1;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file (defaults apply otherwise)");
  app.add_option("--set", overrides, "override a config key, e.g. --set train.lr=0.003")
      ->take_all();
  app.add_option("--seed", seed, "shortcut for --set train.seed=N");
  app.add_option("--threads", threads, "worker threads (default: env SECOST_THREADS, else all)");

  auto* synth_cmd = app.add_subcommand("synth-data", "generate a synthetic weakly-labeled corpus");
  std::string synth_out;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();

  auto* feat_cmd = app.add_subcommand("featurize", "extract logmel features for a manifest");
  std::string feat_manifest, feat_dir, feat_out_manifest;
  feat_cmd->add_option("--manifest", feat_manifest, "input manifest (JSON lines)")->required();
  feat_cmd->add_option("--features", feat_dir, "output feature directory")->required();
  feat_cmd->add_option("--out-manifest", feat_out_manifest,
                       "updated manifest path (default: features dir)");

  auto* base_cmd = app.add_subcommand("train-base", "train the stage-0 model on ground truth");
  auto* run_cmd = app.add_subcommand("secost-run", "run the staged co-supervision sequence");

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a manifest");
  std::string eval_ckpt, eval_manifest, eval_out, eval_features;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "manifest with features + labels")->required();
  eval_cmd->add_option("--out", eval_out, "report path (JSON lines)")->required();
  eval_cmd->add_option("--features", eval_features, "feature dir (default: config paths)");

  auto* cmp_cmd = app.add_subcommand("compare", "per-class improvement analysis of two reports");
  std::string cmp_base, cmp_new, cmp_out;
  bool cmp_hist = false;
  cmp_cmd->add_option("--base", cmp_base, "baseline report")->required();
  cmp_cmd->add_option("--new", cmp_new, "comparison report")->required();
  cmp_cmd->add_option("--out", cmp_out, "write bins as JSON here");
  cmp_cmd->add_flag("--histogram", cmp_hist, "print a text histogram");

  auto* verify_cmd = app.add_subcommand("verify", "run the self-verification suite");
  bool verify_mutate = false;
  int verify_seeds = 20;
  verify_cmd->add_flag("--mutate-decomposed-sign", verify_mutate,
                       "test fixture: inject a sign flip into the decomposed loss; "
                       "verify must then fail the mixing identity");
  verify_cmd->add_option("--seeds", verify_seeds, "gradient-check seeds (default 20)");

  auto* print_cmd = app.add_subcommand("print-config", "print the resolved config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  apply_threads(threads);

  try {
    nlohmann::json cfg_json = load_config_json(config_path);
    for (const auto& kv : overrides) apply_set_override(cfg_json, kv);
    if (seed >= 0) cfg_json["train"]["seed"] = static_cast<uint64_t>(seed);
    RunConfig cfg = parse_run_config(cfg_json);

    if (*synth_cmd) return cmd_synth_data(cfg, synth_out);
    if (*feat_cmd) return cmd_featurize(cfg, feat_manifest, feat_dir, feat_out_manifest);
    if (*base_cmd) return run_stages(cfg, /*base_only=*/true);
    if (*run_cmd) return run_stages(cfg, /*base_only=*/false);
    if (*eval_cmd) return cmd_evaluate(cfg, eval_ckpt, eval_manifest, eval_out, eval_features);
    if (*cmp_cmd) return cmd_compare(cmp_base, cmp_new, cmp_out, cmp_hist);
    if (*verify_cmd) return cmd_verify(verify_mutate, verify_seeds);
    if (*print_cmd) {
      std::printf("%s\n", cfg_json.dump(2).c_str());
      return kExitOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOperational;
  }
  return kExitOk;
}
