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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "secost/error.hpp"
#include "secost/io.hpp"
#include "secost/logmel.hpp"
#include "secost/rng.hpp"
#include "secost/tensor.hpp"

namespace secost {

struct RecordingEntry {
  std::string id;
  std::string wav;   // relative audio path, may be empty
  std::string feat;  // relative feature path, may be empty
  std::vector<int> labels;
};

// ---------------------------------------------------------------------------
// Manifests are JSON lines: {"id": "...", "wav"|"feat": "relative/path",
// "labels": [ints]}. Ids must be unique; label indices must fit n_classes
// when it is given.
// ---------------------------------------------------------------------------

inline std::vector<RecordingEntry> load_manifest(const std::filesystem::path& path,
                                                 int n_classes = 0) {
  std::istringstream in(read_text(path));
  std::vector<RecordingEntry> entries;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw_error(ErrorKind::kParseError,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    RecordingEntry entry;
    try {
      entry.id = j.at("id").get<std::string>();
      entry.wav = j.value("wav", "");
      entry.feat = j.value("feat", "");
      entry.labels = j.value("labels", std::vector<int>{});
    } catch (const nlohmann::json::exception& e) {
      throw_error(ErrorKind::kParseError,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(entry.id).second) {
      throw_error(ErrorKind::kDuplicateId,
                  path.string() + ":" + std::to_string(line_no) + ": duplicate id '" +
                      entry.id + "'");
    }
    for (int label : entry.labels) {
      if (label < 0 || (n_classes > 0 && label >= n_classes)) {
        throw_error(ErrorKind::kLabelOutOfRange,
                    path.string() + ":" + std::to_string(line_no) + ": label " +
                        std::to_string(label) + " out of range");
      }
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<RecordingEntry>& entries) {
  std::ostringstream os;
  for (const auto& e : entries) {
    nlohmann::json j;
    j["id"] = e.id;
    if (!e.wav.empty()) j["wav"] = e.wav;
    if (!e.feat.empty()) j["feat"] = e.feat;
    j["labels"] = e.labels;
    os << j.dump() << "\n";
  }
  write_text_atomic(path, os.str());
}

inline std::vector<float> multi_hot(const RecordingEntry& entry, int n_classes) {
  std::vector<float> y(static_cast<size_t>(n_classes), 0.0f);
  for (int label : entry.labels) {
    check(label >= 0 && label < n_classes, ErrorKind::kLabelOutOfRange,
          "label " + std::to_string(label) + " out of range for entry '" + entry.id + "'");
    y[static_cast<size_t>(label)] = 1.0f;
  }
  return y;
}

inline std::vector<std::string> read_class_names(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

inline void write_class_names(const std::filesystem::path& path,
                              const std::vector<std::string>& names) {
  std::ostringstream os;
  for (const auto& n : names) os << n << "\n";
  write_text_atomic(path, os.str());
}

// ---------------------------------------------------------------------------
// Fixed-length batching. Training takes a random crop of `frames` rows
// (shorter clips are edge-replication padded up to `frames` first); eval
// center-pads/crops deterministically. Padding replicates edge frames so no
// value leaves the range of the source features.
// ---------------------------------------------------------------------------

inline constexpr int kBatchFrames = 1024;

enum class BatchMode { kTrain, kEval };

/// Copies `frames` rows of `spec` starting at `offset` into `dst` (row-major
/// frames x n_mels), replicating the first/last row for out-of-range rows.
/// `offset` may be negative (leading pad).
inline void copy_frames_padded(const LogMelSpec& spec, int offset, int frames, float* dst) {
  for (int t = 0; t < frames; ++t) {
    int src = offset + t;
    src = std::clamp(src, 0, spec.frames - 1);
    const float* row = spec.row(src);
    std::copy(row, row + spec.n_mels, dst + static_cast<size_t>(t) * spec.n_mels);
  }
}

/// Crop/pad offset for one entry. Training offsets are drawn from the
/// (seed, epoch, id) stream so they are reproducible regardless of batch
/// order; eval offsets center the clip.
inline int frame_offset(const LogMelSpec& spec, int frames, BatchMode mode, uint64_t seed,
                        uint64_t epoch, const std::string& id) {
  if (spec.frames <= frames) {
    // Pad evenly in eval mode, all trailing pad in train mode (the crop of
    // the replicate-padded clip starting at 0).
    return mode == BatchMode::kEval ? -(frames - spec.frames) / 2 : 0;
  }
  if (mode == BatchMode::kEval) return (spec.frames - frames) / 2;
  Rng rng = entry_rng(seed, epoch, id);
  return rng.below_int(spec.frames - frames + 1);
}

struct Batch {
  Tensor input;    // [B, 1, frames, n_mels]
  Tensor targets;  // [B, n_classes]
  std::vector<std::string> ids;
};

/// Streams fixed-shape batches over a list of entries. Targets are looked up
/// per id (ground-truth multi-hot or mixed soft targets). Train mode shuffles
/// per epoch from (seed, epoch); eval mode preserves manifest order.
class BatchStream {
 public:
  BatchStream(std::vector<RecordingEntry> entries, const std::filesystem::path& feature_dir,
              const std::unordered_map<std::string, std::vector<float>>* targets, int n_classes,
              int batch_size, BatchMode mode, uint64_t seed, uint64_t epoch,
              int frames = kBatchFrames, int n_mels = 64)
      : entries_(std::move(entries)), feature_dir_(feature_dir), targets_(targets),
        n_classes_(n_classes), batch_size_(batch_size), mode_(mode), seed_(seed), epoch_(epoch),
        frames_(frames), n_mels_(n_mels) {
    check(batch_size_ >= 1, ErrorKind::kInvalidConfig, "batch size must be >= 1");
    if (mode_ == BatchMode::kTrain) {
      Rng rng(mix_seed(seed_, epoch_ ^ 0x9e3779b9ull));
      for (size_t i = entries_.size(); i > 1; --i) {
        const size_t j = rng.below(i);
        std::swap(entries_[i - 1], entries_[j]);
      }
    }
  }

  /// Returns false when the epoch is exhausted.
  bool next(Batch& batch) {
    if (pos_ >= entries_.size()) return false;
    const size_t take = std::min(static_cast<size_t>(batch_size_), entries_.size() - pos_);
    batch.input = Tensor({static_cast<int>(take), 1, frames_, n_mels_});
    batch.targets = Tensor({static_cast<int>(take), n_classes_});
    batch.ids.clear();
    for (size_t b = 0; b < take; ++b) {
      const RecordingEntry& e = entries_[pos_ + b];
      check(!e.feat.empty(), ErrorKind::kMissingFeature,
            "entry '" + e.id + "' has no feature path");
      const auto path = feature_dir_ / e.feat;
      LogMelSpec spec;
      try {
        spec = read_lmel(path);
      } catch (const Error&) {
        throw_error(ErrorKind::kMissingFeature, "cannot read features for '" + e.id + "' at " +
                                                    path.string());
      }
      check(spec.n_mels == n_mels_, ErrorKind::kShapeMismatch,
            "feature file for '" + e.id + "' has " + std::to_string(spec.n_mels) + " mels");
      const int offset = frame_offset(spec, frames_, mode_, seed_, epoch_, e.id);
      copy_frames_padded(spec, offset, frames_,
                         batch.input.ptr() + static_cast<size_t>(b) * frames_ * n_mels_);

      const std::vector<float>* t = nullptr;
      if (targets_) {
        auto it = targets_->find(e.id);
        check(it != targets_->end(), ErrorKind::kMissingFeature,
              "no target for entry '" + e.id + "'");
        t = &it->second;
      }
      if (t) {
        check(static_cast<int>(t->size()) == n_classes_, ErrorKind::kLengthMismatch,
              "target length mismatch for '" + e.id + "'");
        std::copy(t->begin(), t->end(),
                  batch.targets.ptr() + static_cast<size_t>(b) * n_classes_);
      }
      batch.ids.push_back(e.id);
    }
    pos_ += take;
    return true;
  }

  const std::vector<RecordingEntry>& order() const { return entries_; }

 private:
  std::vector<RecordingEntry> entries_;
  std::filesystem::path feature_dir_;
  const std::unordered_map<std::string, std::vector<float>>* targets_;
  int n_classes_;
  int batch_size_;
  BatchMode mode_;
  uint64_t seed_, epoch_;
  int frames_;
  int n_mels_;
  size_t pos_ = 0;
};

}  // namespace secost
