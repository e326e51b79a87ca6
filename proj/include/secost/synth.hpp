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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "secost/dataset.hpp"
#include "secost/error.hpp"
#include "secost/rng.hpp"
#include "secost/wav.hpp"

namespace secost {

/// Synthetic weakly-labeled corpus: each class is a distinct timbre (harmonic
/// stack with class-specific fundamental and amplitude-modulation pattern),
/// each clip a pink-noise bed plus events at random onsets. Weak labels list
/// the classes present; training labels can be corrupted with flip rate rho
/// while validation/eval labels stay clean.
struct SynthConfig {
  int n_classes = 8;
  int n_train = 2000;
  int n_val = 200;
  int n_eval = 400;
  double clip_seconds = 10.0;
  double events_per_clip_mean = 2.7;
  double label_flip_rate = 0.0;  // rho, train labels only
  uint64_t seed = 1;
  int sample_rate = 16000;
  double noise_level = 0.04;  // pink-noise bed amplitude
  double event_gain = 1.0;    // scales event amplitudes

  void validate() const {
    check(n_classes >= 2, ErrorKind::kInvalidConfig, "need at least 2 classes");
    check(n_train >= 0 && n_val >= 0 && n_eval >= 0, ErrorKind::kInvalidConfig,
          "negative split size");
    check(clip_seconds > 0.6, ErrorKind::kInvalidConfig, "clips too short for events");
    check(label_flip_rate >= 0.0 && label_flip_rate < 1.0, ErrorKind::kInvalidConfig,
          "label flip rate must be in [0,1)");
    check(events_per_clip_mean > 0.0, ErrorKind::kInvalidConfig,
          "events per clip mean must be positive");
  }
};

struct SynthEvent {
  int class_index = 0;
  double onset_s = 0.0;
  double duration_s = 1.0;
  double amplitude = 0.2;
};

struct ClipPlan {
  std::string id;
  std::vector<SynthEvent> events;
  std::vector<int> true_labels;   // classes present in the audio
  std::vector<int> given_labels;  // labels written to the manifest
};

struct CorpusPlan {
  std::vector<ClipPlan> train;
  std::vector<ClipPlan> val;
  std::vector<ClipPlan> eval;
};

namespace synth_detail {

struct ClassTimbre {
  double f0;
  int n_harmonics;
  double rolloff;
  double am_rate;
  double am_depth;
};

inline ClassTimbre class_timbre(int class_index) {
  ClassTimbre t;
  t.f0 = 165.0 * std::pow(2.0, 0.32 * class_index);
  t.n_harmonics = 4 + (class_index % 3);
  t.rolloff = 0.7 + 0.12 * (class_index % 4);
  t.am_rate = 1.0 + 0.8 * ((class_index * 3) % 8);
  t.am_depth = 0.45 + 0.05 * (class_index % 2);
  return t;
}

// Voss-McCartney pink noise: one of 8 octave rows refreshes per sample.
class PinkNoise {
 public:
  explicit PinkNoise(Rng& rng) : rng_(&rng) {
    for (auto& r : rows_) r = static_cast<float>(rng_->uniform(-1.0, 1.0));
  }
  float next() {
    const uint32_t c = ++counter_;
    int row = 0;
    while (row < 7 && ((c >> row) & 1u) == 0u) ++row;
    rows_[static_cast<size_t>(row)] = static_cast<float>(rng_->uniform(-1.0, 1.0));
    float s = 0.0f;
    for (float r : rows_) s += r;
    return s * 0.125f;
  }

 private:
  Rng* rng_;
  float rows_[8];
  uint32_t counter_ = 0;
};

inline void add_event(std::vector<float>& samples, int sample_rate, const SynthEvent& ev) {
  const ClassTimbre t = class_timbre(ev.class_index);
  const int start = static_cast<int>(ev.onset_s * sample_rate);
  const int len = std::min(static_cast<int>(ev.duration_s * sample_rate),
                           static_cast<int>(samples.size()) - start);
  if (len <= 0) return;
  const int ramp = std::min(len / 4, sample_rate / 50);  // 20 ms attack/release
  const double two_pi = 6.283185307179586;
  for (int i = 0; i < len; ++i) {
    const double time = static_cast<double>(i) / sample_rate;
    double v = 0.0;
    for (int h = 1; h <= t.n_harmonics; ++h) {
      const double freq = t.f0 * h;
      if (freq >= sample_rate / 2.0) break;
      v += std::sin(two_pi * freq * time) / std::pow(static_cast<double>(h), t.rolloff);
    }
    const double am = 1.0 - t.am_depth * 0.5 * (1.0 - std::cos(two_pi * t.am_rate * time));
    double env = 1.0;
    if (ramp > 0) {
      if (i < ramp) env = static_cast<double>(i) / ramp;
      if (len - 1 - i < ramp) env = std::min(env, static_cast<double>(len - 1 - i) / ramp);
    }
    samples[static_cast<size_t>(start + i)] += static_cast<float>(ev.amplitude * am * env * v);
  }
}

inline ClipPlan plan_clip(const SynthConfig& cfg, const std::string& id, Rng& rng) {
  ClipPlan plan;
  plan.id = id;

  int n_label = rng.poisson(cfg.events_per_clip_mean);
  n_label = std::clamp(n_label, 1, cfg.n_classes);
  std::vector<int> pool(static_cast<size_t>(cfg.n_classes));
  for (int c = 0; c < cfg.n_classes; ++c) pool[static_cast<size_t>(c)] = c;
  for (int pick = 0; pick < n_label; ++pick) {
    const int j = pick + rng.below_int(cfg.n_classes - pick);
    std::swap(pool[static_cast<size_t>(pick)], pool[static_cast<size_t>(j)]);
  }
  plan.true_labels.assign(pool.begin(), pool.begin() + n_label);
  std::sort(plan.true_labels.begin(), plan.true_labels.end());

  for (int label : plan.true_labels) {
    const int n_events = 1 + (rng.bernoulli(0.3) ? 1 : 0);
    for (int e = 0; e < n_events; ++e) {
      SynthEvent ev;
      ev.class_index = label;
      ev.duration_s = rng.uniform(0.5, 3.0);
      ev.onset_s = rng.uniform(0.0, std::max(0.1, cfg.clip_seconds - 0.2));
      ev.amplitude = rng.uniform(0.08, 0.25) * cfg.event_gain;
      plan.events.push_back(ev);
    }
  }
  plan.given_labels = plan.true_labels;
  return plan;
}

// Train-label corruption: each positive dropped with probability rho and
// spurious positives added at the matched expected rate, so the marginal
// positive count is preserved.
inline void corrupt_labels(const SynthConfig& cfg, ClipPlan& plan, Rng& rng) {
  const double rho = cfg.label_flip_rate;
  if (rho <= 0.0) return;
  std::vector<int> kept;
  for (int label : plan.true_labels) {
    if (!rng.bernoulli(rho)) kept.push_back(label);
  }
  const double add_rate = rho * static_cast<double>(plan.true_labels.size());
  int n_add = static_cast<int>(add_rate);
  if (rng.bernoulli(add_rate - n_add)) ++n_add;
  std::vector<int> absent;
  for (int c = 0; c < cfg.n_classes; ++c) {
    if (std::find(plan.true_labels.begin(), plan.true_labels.end(), c) ==
        plan.true_labels.end()) {
      absent.push_back(c);
    }
  }
  for (int a = 0; a < n_add && !absent.empty(); ++a) {
    const int j = rng.below_int(static_cast<int>(absent.size()));
    kept.push_back(absent[static_cast<size_t>(j)]);
    absent.erase(absent.begin() + j);
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  plan.given_labels = std::move(kept);
}

}  // namespace synth_detail

/// Deterministic corpus plan (labels, events, noise decisions) without audio.
inline CorpusPlan plan_corpus(const SynthConfig& cfg) {
  cfg.validate();
  CorpusPlan plan;
  auto make_split = [&cfg](std::vector<ClipPlan>& out, const char* name, int count,
                           uint64_t stream, bool corrupt) {
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%05d", name, i);
      Rng rng(mix_seed(cfg.seed, mix_seed(stream, static_cast<uint64_t>(i))));
      ClipPlan clip = synth_detail::plan_clip(cfg, id, rng);
      if (corrupt) synth_detail::corrupt_labels(cfg, clip, rng);
      out.push_back(std::move(clip));
    }
  };
  make_split(plan.train, "train", cfg.n_train, 0x7472u, cfg.label_flip_rate > 0.0);
  make_split(plan.val, "val", cfg.n_val, 0x7661u, false);
  make_split(plan.eval, "eval", cfg.n_eval, 0x6576u, false);
  return plan;
}

/// Renders one clip's audio. Keyed by clip id, so rendering is independent of
/// generation order.
inline SampleBuffer render_clip(const SynthConfig& cfg, const ClipPlan& plan) {
  SampleBuffer buf;
  buf.sample_rate = cfg.sample_rate;
  buf.samples.assign(static_cast<size_t>(cfg.clip_seconds * cfg.sample_rate), 0.0f);
  Rng rng(mix_seed(cfg.seed, fnv1a64(plan.id)));
  synth_detail::PinkNoise noise(rng);
  const float bed = static_cast<float>(cfg.noise_level);
  for (auto& s : buf.samples) s = bed * noise.next();
  for (const auto& ev : plan.events) synth_detail::add_event(buf.samples, cfg.sample_rate, ev);
  for (auto& s : buf.samples) s = std::clamp(s, -1.0f, 1.0f);
  return buf;
}

struct SynthResult {
  CorpusPlan plan;
  std::filesystem::path train_manifest, val_manifest, eval_manifest;
  std::filesystem::path classes_file, events_file;
};

/// Generates audio, manifests (train/val/eval), classes.txt and an event log
/// under out_dir. Fully seeded: the same config regenerates byte-identical
/// files.
inline SynthResult synth_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "wavs");

  SynthResult result;
  result.plan = plan_corpus(cfg);
  result.train_manifest = out_dir / "train.jsonl";
  result.val_manifest = out_dir / "val.jsonl";
  result.eval_manifest = out_dir / "eval.jsonl";
  result.classes_file = out_dir / "classes.txt";
  result.events_file = out_dir / "events.jsonl";

  std::vector<std::string> names;
  for (int c = 0; c < cfg.n_classes; ++c) {
    const auto t = synth_detail::class_timbre(c);
    char name[64];
    std::snprintf(name, sizeof(name), "tone_%04dhz_am%.1f", static_cast<int>(t.f0), t.am_rate);
    names.emplace_back(name);
  }
  write_class_names(result.classes_file, names);

  std::ostringstream events;
  auto emit_split = [&](const std::vector<ClipPlan>& clips, const fs::path& manifest) {
    std::vector<RecordingEntry> entries;
    entries.reserve(clips.size());
    for (const auto& clip : clips) {
      SampleBuffer audio = render_clip(cfg, clip);
      write_wav_pcm16(out_dir / "wavs" / (clip.id + ".wav"), audio);
      RecordingEntry e;
      e.id = clip.id;
      e.wav = "wavs/" + clip.id + ".wav";
      e.labels = clip.given_labels;
      entries.push_back(std::move(e));

      nlohmann::json ev_list = nlohmann::json::array();
      for (const auto& ev : clip.events) {
        ev_list.push_back({{"class", ev.class_index},
                           {"onset_s", ev.onset_s},
                           {"duration_s", ev.duration_s},
                           {"amplitude", ev.amplitude}});
      }
      nlohmann::json j = {{"id", clip.id},
                          {"true_labels", clip.true_labels},
                          {"given_labels", clip.given_labels},
                          {"events", ev_list}};
      events << j.dump() << "\n";
    }
    write_manifest(manifest, entries);
  };
  emit_split(result.plan.train, result.train_manifest);
  emit_split(result.plan.val, result.val_manifest);
  emit_split(result.plan.eval, result.eval_manifest);
  write_text_atomic(result.events_file, events.str());
  return result;
}

}  // namespace secost
