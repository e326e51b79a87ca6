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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "secost/adam.hpp"
#include "secost/dataset.hpp"
#include "secost/error.hpp"
#include "secost/metrics.hpp"
#include "secost/mixing.hpp"
#include "secost/wels.hpp"

namespace secost {

using TargetMap = std::unordered_map<std::string, std::vector<float>>;

/// Batch-mean BCE between recording probabilities [B, C] and targets [B, C].
/// Returns the loss (accumulated in double) and fills `grad` with d(loss)/dp.
inline double bce_batch_loss(const Tensor& probs, const Tensor& targets, Tensor& grad) {
  check_same_shape(probs, targets, "bce_batch_loss");
  check(probs.rank() == 2, ErrorKind::kShapeMismatch, "bce_batch_loss expects [B, C]");
  const int b = probs.dim(0), c = probs.dim(1);
  grad = Tensor(probs.shape);
  const double inv = 1.0 / (static_cast<double>(b) * c);
  double loss = 0.0;
  for (int64_t i = 0; i < probs.numel(); ++i) {
    const double p = clamp_prob(static_cast<double>(probs.data[static_cast<size_t>(i)]));
    const double t = targets.data[static_cast<size_t>(i)];
    loss += -t * std::log(p) - (1.0 - t) * std::log(1.0 - p);
    grad.data[static_cast<size_t>(i)] = static_cast<float>((p - t) / (p * (1.0 - p)) * inv);
  }
  return loss * inv;
}

/// Deterministic eval-mode recording probabilities for a list of entries.
/// Returns an n x C row-major matrix in manifest order.
inline std::vector<float> predict_recordings(WelsNet& model,
                                             const std::vector<RecordingEntry>& entries,
                                             const std::filesystem::path& feature_dir,
                                             int batch_size = 16) {
  tune_allocator();
  const int n_classes = model.config().n_classes;
  std::vector<float> out(entries.size() * static_cast<size_t>(n_classes));
  BatchStream stream(entries, feature_dir, nullptr, n_classes, batch_size, BatchMode::kEval,
                     /*seed=*/0, /*epoch=*/0);
  Batch batch;
  size_t row = 0;
  while (stream.next(batch)) {
    auto in = std::make_shared<Tensor>(std::move(batch.input));
    auto result = model.forward_batch(in, Mode::kEval, /*record=*/false);
    const Tensor& rec = *result.recording;
    std::copy(rec.data.begin(), rec.data.end(),
              out.begin() + static_cast<int64_t>(row) * n_classes);
    row += batch.ids.size();
  }
  return out;
}

/// Evaluates a model over a manifest with ground-truth labels.
inline EvalReport evaluate_model(WelsNet& model, const std::vector<RecordingEntry>& entries,
                                 const std::filesystem::path& feature_dir,
                                 const std::vector<std::string>& class_names = {},
                                 int batch_size = 16) {
  check(!entries.empty(), ErrorKind::kEmptyDataset, "evaluate on empty manifest");
  const int n_classes = model.config().n_classes;
  auto scores = predict_recordings(model, entries, feature_dir, batch_size);
  std::vector<uint8_t> labels(entries.size() * static_cast<size_t>(n_classes), 0);
  for (size_t i = 0; i < entries.size(); ++i) {
    for (int l : entries[i].labels) {
      check(l >= 0 && l < n_classes, ErrorKind::kLabelOutOfRange,
            "label out of range in entry '" + entries[i].id + "'");
      labels[i * static_cast<size_t>(n_classes) + static_cast<size_t>(l)] = 1;
    }
  }
  return evaluate_scores(scores, labels, static_cast<int>(entries.size()), n_classes,
                         class_names);
}

struct TrainConfig {
  int epochs = 12;
  int patience = 5;  // early stop after this many epochs without val mAP gain
  int batch_size = 16;
  uint64_t seed = 1;
  AdamConfig adam;
};

struct EpochStats {
  int stage = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double val_map = 0.0;
  double val_mauc = 0.0;
  bool improved = false;
};

/// Progress hook; called once per epoch. Exceptions thrown from the hook
/// abort training (used by resume tests and Ctrl-C handling).
using ProgressFn = std::function<void(const EpochStats&)>;

struct TrainResult {
  double best_val_map = 0.0;
  double best_val_mauc = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
};

/// Trains a model with Adam on fixed-length crops, selecting the best epoch
/// by validation mAP (computed against the validation entries' own labels,
/// which stay clean ground truth). The model is left holding the best-epoch
/// parameters.
inline TrainResult train_wels(WelsNet& model, const std::vector<RecordingEntry>& train_entries,
                              const TargetMap& targets,
                              const std::vector<RecordingEntry>& val_entries,
                              const std::filesystem::path& feature_dir, const TrainConfig& cfg,
                              const ProgressFn& progress = {}, int stage = 0) {
  check(!train_entries.empty(), ErrorKind::kEmptyDataset, "no training entries");
  check(cfg.epochs >= 1, ErrorKind::kInvalidConfig, "epochs must be >= 1");
  tune_allocator();
  const int n_classes = model.config().n_classes;

  Adam optimizer(cfg.adam);
  TrainResult result;

  // Best-epoch snapshot kept in memory.
  std::vector<Tensor> best_params, best_buffers;
  auto snapshot = [&]() {
    best_params.clear();
    best_buffers.clear();
    for (const auto& p : model.params()) best_params.push_back(*p.value);
    for (const auto& b : model.buffers()) best_buffers.push_back(*b.value);
  };
  auto restore = [&]() {
    auto params = model.params();
    auto buffers = model.buffers();
    for (size_t i = 0; i < params.size(); ++i) *params[i].value = best_params[i];
    for (size_t i = 0; i < buffers.size(); ++i) *buffers[i].value = best_buffers[i];
  };

  int epochs_since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    BatchStream stream(train_entries, feature_dir, &targets, n_classes, cfg.batch_size,
                       BatchMode::kTrain, cfg.seed, static_cast<uint64_t>(epoch));
    Batch batch;
    double loss_sum = 0.0;
    int64_t batch_count = 0;
    while (stream.next(batch)) {
      auto in = std::make_shared<Tensor>(std::move(batch.input));
      model.zero_grad();
      auto out = model.forward_batch(in, Mode::kTrain, /*record=*/true);
      Tensor grad;
      loss_sum += bce_batch_loss(*out.recording, batch.targets, grad);
      ++batch_count;
      model.backward_from_recording(grad);
      optimizer.step(model.params());
    }
    model.clear_recorded();

    EpochStats stats;
    stats.stage = stage;
    stats.epoch = epoch;
    stats.train_loss = batch_count ? loss_sum / static_cast<double>(batch_count) : 0.0;
    if (!val_entries.empty()) {
      EvalReport val = evaluate_model(model, val_entries, feature_dir, {}, cfg.batch_size);
      stats.val_map = val.map;
      stats.val_mauc = val.mauc;
    }
    result.epochs_run = epoch + 1;

    if (result.best_epoch < 0 || stats.val_map > result.best_val_map) {
      result.best_val_map = stats.val_map;
      result.best_val_mauc = stats.val_mauc;
      result.best_epoch = epoch;
      stats.improved = true;
      epochs_since_best = 0;
      snapshot();
    } else {
      ++epochs_since_best;
    }
    if (progress) progress(stats);
    if (cfg.patience > 0 && epochs_since_best >= cfg.patience) break;
  }

  restore();
  model.clear_recorded();
  return result;
}

}  // namespace secost
