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

#include <filesystem>
#include <string>
#include <vector>

#include "secost/dataset.hpp"
#include "secost/error.hpp"
#include "secost/logmel.hpp"
#include "secost/wav.hpp"

namespace secost {

struct FeaturizeResult {
  std::vector<RecordingEntry> entries;  // with feat paths filled in
  int n_computed = 0;
  int n_cached = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (id, message)
};

/// Computes logmel features for every manifest entry into feature_dir as
/// <id>.lmel, resampling to the extractor rate when needed. Existing feature
/// files are kept (skip-if-exists); per-file failures are collected rather
/// than aborting the batch.
inline FeaturizeResult featurize_manifest(const std::vector<RecordingEntry>& entries,
                                          const std::filesystem::path& audio_root,
                                          const std::filesystem::path& feature_dir,
                                          const LogMelConfig& cfg = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(feature_dir);
  LogMelExtractor extractor(cfg);

  FeaturizeResult result;
  result.entries = entries;
  const int n = static_cast<int>(entries.size());

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    RecordingEntry& e = result.entries[static_cast<size_t>(i)];
    const std::string feat_name = e.id + ".lmel";
    const fs::path feat_path = feature_dir / feat_name;
    try {
      if (!fs::exists(feat_path)) {
        check(!e.wav.empty(), ErrorKind::kMissingFeature,
              "entry has neither wav nor existing features");
        SampleBuffer audio = decode_wav_file(audio_root / e.wav);
        if (audio.sample_rate != cfg.sample_rate) audio = resample(audio, cfg.sample_rate);
        write_lmel(feat_path, extractor.apply(audio));
#pragma omp critical(featurize_counts)
        ++result.n_computed;
      } else {
#pragma omp critical(featurize_counts)
        ++result.n_cached;
      }
      e.feat = feat_name;
    } catch (const std::exception& ex) {
#pragma omp critical(featurize_counts)
      result.failures.emplace_back(e.id, ex.what());
    }
  }
  return result;
}

}  // namespace secost
