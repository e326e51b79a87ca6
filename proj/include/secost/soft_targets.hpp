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
#include <string>
#include <unordered_map>
#include <vector>

#include "secost/dataset.hpp"
#include "secost/error.hpp"
#include "secost/io.hpp"
#include "secost/trainer.hpp"
#include "secost/wels.hpp"

namespace secost {

// ---------------------------------------------------------------------------
// Soft-target cache file: magic "SECO", u32 version=1, u32 n_records,
// u32 n_classes, then records of (length-prefixed recording id, n_classes
// little-endian f32).
// ---------------------------------------------------------------------------

inline constexpr uint32_t kSecoMagic = 0x4f434553u;  // "SECO"
inline constexpr uint32_t kSecoVersion = 1;

inline void write_soft_targets(const std::filesystem::path& path, const TargetMap& targets,
                               int n_classes,
                               const std::vector<std::string>& order) {
  ByteWriter w;
  w.u32(kSecoMagic);
  w.u32(kSecoVersion);
  w.u32(static_cast<uint32_t>(order.size()));
  w.u32(static_cast<uint32_t>(n_classes));
  for (const auto& id : order) {
    auto it = targets.find(id);
    check(it != targets.end(), ErrorKind::kMissingFeature, "no soft target for '" + id + "'");
    check(static_cast<int>(it->second.size()) == n_classes, ErrorKind::kLengthMismatch,
          "soft target length mismatch for '" + id + "'");
    w.str(id);
    w.f32_array(it->second.data(), it->second.size());
  }
  write_file_atomic(path, w.bytes());
}

inline TargetMap read_soft_targets(const std::filesystem::path& path, int expect_classes = 0) {
  auto bytes = read_file(path);
  ByteReader r(bytes);
  if (r.remaining() < 16 || r.u32() != kSecoMagic)
    throw_error(ErrorKind::kVersionMismatch, "not a soft-target cache: " + path.string());
  if (r.u32() != kSecoVersion)
    throw_error(ErrorKind::kVersionMismatch, "unsupported soft-target cache version");
  const uint32_t n_records = r.u32();
  const uint32_t n_classes = r.u32();
  check(expect_classes == 0 || static_cast<uint32_t>(expect_classes) == n_classes,
        ErrorKind::kShapeMismatch, "soft-target cache has wrong class count");
  TargetMap out;
  out.reserve(n_records);
  for (uint32_t i = 0; i < n_records; ++i) {
    std::string id = r.str();
    std::vector<float> t(n_classes);
    r.f32_array(t.data(), t.size());
    out.emplace(std::move(id), std::move(t));
  }
  return out;
}

/// Cache path for a (stage, teacher checkpoint hash) pair. A new teacher
/// hash yields a new file, so stale caches can never be picked up.
inline std::filesystem::path soft_target_cache_path(const std::filesystem::path& cache_dir,
                                                    int stage, uint64_t teacher_hash) {
  return cache_dir / ("stage" + std::to_string(stage) + "_" + hex64(teacher_hash) + ".seco");
}

struct SoftTargetResult {
  TargetMap targets;
  bool cache_hit = false;
  std::filesystem::path cache_file;
};

/// Teacher predictions for every entry, persisted keyed by recording id.
/// Reruns with the same teacher hash load the cache and skip inference.
inline SoftTargetResult infer_soft_targets(WelsNet& teacher,
                                           const std::vector<RecordingEntry>& entries,
                                           const std::filesystem::path& feature_dir,
                                           const std::filesystem::path& cache_dir, int stage,
                                           uint64_t teacher_hash, int batch_size = 16) {
  SoftTargetResult result;
  result.cache_file = soft_target_cache_path(cache_dir, stage, teacher_hash);
  if (std::filesystem::exists(result.cache_file)) {
    TargetMap cached = read_soft_targets(result.cache_file, teacher.config().n_classes);
    bool complete = true;
    for (const auto& e : entries) {
      if (!cached.count(e.id)) {
        complete = false;
        break;
      }
    }
    if (complete) {
      result.targets = std::move(cached);
      result.cache_hit = true;
      return result;
    }
  }

  const int n_classes = teacher.config().n_classes;
  auto scores = predict_recordings(teacher, entries, feature_dir, batch_size);
  std::vector<std::string> order;
  order.reserve(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    std::vector<float> t(scores.begin() + static_cast<int64_t>(i) * n_classes,
                         scores.begin() + static_cast<int64_t>(i + 1) * n_classes);
    result.targets.emplace(entries[i].id, std::move(t));
    order.push_back(entries[i].id);
  }
  std::filesystem::create_directories(cache_dir);
  write_soft_targets(result.cache_file, result.targets, n_classes, order);
  return result;
}

}  // namespace secost
