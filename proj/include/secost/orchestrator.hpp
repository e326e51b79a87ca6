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

#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "secost/dataset.hpp"
#include "secost/error.hpp"
#include "secost/io.hpp"
#include "secost/mixing.hpp"
#include "secost/soft_targets.hpp"
#include "secost/trainer.hpp"
#include "secost/wels.hpp"

namespace secost {

/// Per-stage ground-truth mixing weights. alphas[s] drives stage s+1 (stage 0
/// is the base model trained on ground truth alone).
struct StageSchedule {
  std::vector<double> alphas;

  int stages() const { return static_cast<int>(alphas.size()); }
  void validate() const {
    for (double a : alphas) {
      check(a >= 0.0 && a <= 1.0, ErrorKind::kAlphaOutOfRange,
            "stage alpha " + std::to_string(a) + " outside [0,1]");
    }
  }
};

struct StageRow {
  int stage = 0;
  double alpha = 1.0;
  double val_map = 0.0;
  double val_mauc = 0.0;
  std::string checkpoint_path;
};

inline std::string stage_row_json(const StageRow& row) {
  nlohmann::json j = {{"stage", row.stage},
                      {"alpha", row.alpha},
                      {"val_map", row.val_map},
                      {"val_mauc", row.val_mauc},
                      {"checkpoint_path", row.checkpoint_path}};
  return j.dump();
}

inline std::vector<StageRow> read_stage_report(const std::filesystem::path& path) {
  std::vector<StageRow> rows;
  if (!std::filesystem::exists(path)) return rows;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw_error(ErrorKind::kParseError, "bad stage report line: " + std::string(e.what()));
    }
    StageRow row;
    row.stage = j.at("stage").get<int>();
    row.alpha = j.at("alpha").get<double>();
    row.val_map = j.at("val_map").get<double>();
    row.val_mauc = j.at("val_mauc").get<double>();
    row.checkpoint_path = j.at("checkpoint_path").get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

struct SecostPaths {
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path feature_dir;
  std::filesystem::path checkpoint_dir;
  std::filesystem::path report_path;  // defaults to checkpoint_dir/stages.jsonl
};

struct SecostRunConfig {
  WelsConfig model;
  TrainConfig train;
  StageSchedule schedule;
};

struct SecostRunResult {
  std::vector<StageRow> rows;
  std::string final_checkpoint;
  int stages_trained = 0;  // stages actually trained this invocation
};

namespace orchestrator_detail {

inline std::filesystem::path stage_checkpoint_path(const std::filesystem::path& dir, int stage) {
  return dir / ("stage" + std::to_string(stage) + ".wels");
}

inline uint64_t stage_seed(uint64_t base_seed, int stage) {
  return mix_seed(base_seed, 0x53544147ull + static_cast<uint64_t>(stage));
}

}  // namespace orchestrator_detail

/// Sequential co-supervision: stage 0 trains the base model on ground truth;
/// each later stage s builds a fresh student of identical architecture,
/// trains it against alpha_s * y + (1 - alpha_s) * teacher(x) with the
/// previous stage's model as the frozen teacher, then promotes the student.
///
/// Every stage persists its best-validation checkpoint before the next stage
/// starts, and completed stages are skipped on rerun, so an interrupted run
/// resumes at the first unfinished stage. With a fixed seed the resumed run
/// produces files identical to an uninterrupted one.
inline SecostRunResult run_secost(const SecostPaths& paths, const SecostRunConfig& config,
                                  const ProgressFn& progress = {}) {
  namespace fs = std::filesystem;
  config.model.validate();
  config.schedule.validate();

  auto train_entries = load_manifest(paths.train_manifest, config.model.n_classes);
  auto val_entries = load_manifest(paths.val_manifest, config.model.n_classes);
  check(!train_entries.empty(), ErrorKind::kEmptyDataset, "empty training manifest");

  fs::create_directories(paths.checkpoint_dir);
  const fs::path report_path =
      paths.report_path.empty() ? paths.checkpoint_dir / "stages.jsonl" : paths.report_path;

  const int n_stages = config.schedule.stages();
  SecostRunResult result;

  // Resume: keep the longest prefix of report rows whose checkpoints load.
  std::vector<StageRow> prior = read_stage_report(report_path);
  int resume_from = 0;
  for (const auto& row : prior) {
    if (row.stage != resume_from) break;
    const fs::path ckpt = orchestrator_detail::stage_checkpoint_path(paths.checkpoint_dir,
                                                                     row.stage);
    bool ok = false;
    try {
      load_checkpoint(ckpt);
      ok = true;
    } catch (const Error&) {
      ok = false;
    }
    if (!ok) break;
    result.rows.push_back(row);
    ++resume_from;
  }
  {
    std::ostringstream os;
    for (const auto& row : result.rows) os << stage_row_json(row) << "\n";
    write_text_atomic(report_path, os.str());
  }

  TargetMap ground_truth;
  for (const auto& e : train_entries) {
    ground_truth.emplace(e.id, multi_hot(e, config.model.n_classes));
  }

  for (int stage = resume_from; stage <= n_stages; ++stage) {
    const double alpha = stage == 0 ? 1.0 : config.schedule.alphas[static_cast<size_t>(stage - 1)];
    const uint64_t seed = orchestrator_detail::stage_seed(config.train.seed, stage);
    const fs::path ckpt_path =
        orchestrator_detail::stage_checkpoint_path(paths.checkpoint_dir, stage);

    TargetMap targets;
    if (stage == 0) {
      targets = ground_truth;
    } else {
      // Frozen teacher = previous stage's checkpoint.
      const fs::path teacher_path =
          orchestrator_detail::stage_checkpoint_path(paths.checkpoint_dir, stage - 1);
      const uint64_t teacher_hash = hash_file(teacher_path);
      auto teacher = load_checkpoint(teacher_path);
      auto soft = infer_soft_targets(*teacher.model, train_entries, paths.feature_dir,
                                     paths.checkpoint_dir / "softtargets", stage, teacher_hash,
                                     config.train.batch_size);
      for (const auto& e : train_entries) {
        const auto& y = ground_truth.at(e.id);
        const auto& yhat = soft.targets.at(e.id);
        targets.emplace(e.id, mix_targets(std::span<const float>(y),
                                          std::span<const float>(yhat),
                                          static_cast<float>(alpha)));
      }
    }

    // Fresh student every stage.
    TrainConfig stage_cfg = config.train;
    stage_cfg.seed = seed;
    auto student = build_wels(config.model, seed);
    TrainResult trained = train_wels(*student, train_entries, targets, val_entries,
                                     paths.feature_dir, stage_cfg, progress, stage);
    ++result.stages_trained;

    CheckpointMeta meta;
    meta.stage = stage;
    meta.alpha = alpha;
    meta.seed = seed;
    meta.best_epoch = trained.best_epoch;
    meta.val_map = trained.best_val_map;
    meta.val_mauc = trained.best_val_mauc;
    save_checkpoint(*student, ckpt_path, meta);

    StageRow row;
    row.stage = stage;
    row.alpha = alpha;
    row.val_map = trained.best_val_map;
    row.val_mauc = trained.best_val_mauc;
    row.checkpoint_path = ckpt_path.string();
    result.rows.push_back(row);
    {
      std::ostringstream os;
      for (const auto& r : result.rows) os << stage_row_json(r) << "\n";
      write_text_atomic(report_path, os.str());
    }
  }

  result.final_checkpoint =
      orchestrator_detail::stage_checkpoint_path(paths.checkpoint_dir, n_stages).string();
  return result;
}

}  // namespace secost
