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

#include <string>
#include <vector>

#include <json.hpp>

#include "secost/error.hpp"
#include "secost/io.hpp"
#include "secost/logmel.hpp"
#include "secost/orchestrator.hpp"
#include "secost/synth.hpp"
#include "secost/trainer.hpp"
#include "secost/wels.hpp"

namespace secost {

/// Every tunable of a run lives in one declarative JSON document; unknown
/// keys are rejected so typos cannot silently fall back to defaults.
inline nlohmann::json default_config() {
  return nlohmann::json{
      {"paths",
       {{"train_manifest", ""},
        {"val_manifest", ""},
        {"eval_manifest", ""},
        {"feature_dir", ""},
        {"checkpoint_dir", ""},
        {"report_dir", ""}}},
      {"model",
       {{"n_classes", 8},
        {"width_multiplier", 0.125},
        {"recording_pool", "mean"},
        {"block_pool", "max"}}},
      {"train",
       {{"epochs", 12},
        {"patience", 5},
        {"batch_size", 16},
        {"seed", 1},
        {"lr", 1e-3},
        {"beta1", 0.9},
        {"beta2", 0.999},
        {"eps", 1e-8}}},
      {"schedule", {{"alphas", {0.3}}}},
      {"features", {{"n_mels", 64}, {"win_ms", 16.0}, {"hop_ms", 10.0}}},
      {"synth",
       {{"n_classes", 8},
        {"n_train", 2000},
        {"n_val", 200},
        {"n_eval", 400},
        {"clip_seconds", 10.0},
        {"events_per_clip_mean", 2.7},
        {"label_flip_rate", 0.2},
        {"seed", 7},
        {"noise_level", 0.04},
        {"event_gain", 1.0}}}};
}

namespace config_detail {

inline void merge_checked(nlohmann::json& base, const nlohmann::json& user,
                          const std::string& prefix) {
  check(user.is_object(), ErrorKind::kConfigError,
        "config section '" + (prefix.empty() ? std::string("<root>") : prefix) +
            "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) {
      throw_error(ErrorKind::kConfigError, "unknown config key '" + path + "'");
    }
    if (base[it.key()].is_object() && !it.value().is_object()) {
      throw_error(ErrorKind::kConfigError, "config key '" + path + "' must be an object");
    }
    if (base[it.key()].is_object()) {
      merge_checked(base[it.key()], it.value(), path);
    } else {
      base[it.key()] = it.value();
    }
  }
}

}  // namespace config_detail

/// default_config() overridden by the (optional) user file.
inline nlohmann::json load_config_json(const std::string& path) {
  nlohmann::json cfg = default_config();
  if (!path.empty()) {
    nlohmann::json user;
    try {
      user = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
      throw_error(ErrorKind::kConfigError, "cannot parse config " + path + ": " + e.what());
    }
    config_detail::merge_checked(cfg, user, "");
  }
  return cfg;
}

/// Applies one `--set dotted.key=value` override. The key must exist; the
/// value is parsed as JSON when possible, else taken as a string.
inline void apply_set_override(nlohmann::json& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  check(eq != std::string::npos && eq > 0, ErrorKind::kConfigError,
        "--set expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;  // bare strings are fine
  }

  nlohmann::json* node = &cfg;
  size_t start = 0;
  while (true) {
    const size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    check(node->contains(part), ErrorKind::kConfigError, "unknown config key '" + key + "'");
    if (dot == std::string::npos) {
      check(!(*node)[part].is_object(), ErrorKind::kConfigError,
            "config key '" + key + "' is a section, not a value");
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    check(node->is_object(), ErrorKind::kConfigError, "config key '" + key + "' is not a section");
    start = dot + 1;
  }
}

struct RunConfig {
  // paths
  std::string train_manifest, val_manifest, eval_manifest;
  std::string feature_dir, checkpoint_dir, report_dir;

  WelsConfig model;
  TrainConfig train;
  StageSchedule schedule;
  SynthConfig synth;
  LogMelConfig features;

  nlohmann::json raw;
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.raw = j;
  try {
    const auto& paths = j.at("paths");
    cfg.train_manifest = paths.at("train_manifest").get<std::string>();
    cfg.val_manifest = paths.at("val_manifest").get<std::string>();
    cfg.eval_manifest = paths.at("eval_manifest").get<std::string>();
    cfg.feature_dir = paths.at("feature_dir").get<std::string>();
    cfg.checkpoint_dir = paths.at("checkpoint_dir").get<std::string>();
    cfg.report_dir = paths.at("report_dir").get<std::string>();

    const auto& model = j.at("model");
    cfg.model.n_classes = model.at("n_classes").get<int>();
    cfg.model.width_multiplier = model.at("width_multiplier").get<double>();
    cfg.model.recording_pool = pool_kind_from_name(model.at("recording_pool").get<std::string>());
    cfg.model.block_pool = pool_kind_from_name(model.at("block_pool").get<std::string>());

    const auto& train = j.at("train");
    cfg.train.epochs = train.at("epochs").get<int>();
    cfg.train.patience = train.at("patience").get<int>();
    cfg.train.batch_size = train.at("batch_size").get<int>();
    cfg.train.seed = train.at("seed").get<uint64_t>();
    cfg.train.adam.lr = train.at("lr").get<double>();
    cfg.train.adam.beta1 = train.at("beta1").get<double>();
    cfg.train.adam.beta2 = train.at("beta2").get<double>();
    cfg.train.adam.eps = train.at("eps").get<double>();

    cfg.schedule.alphas = j.at("schedule").at("alphas").get<std::vector<double>>();

    const auto& feats = j.at("features");
    cfg.features.n_mels = feats.at("n_mels").get<int>();
    cfg.features.win_ms = feats.at("win_ms").get<double>();
    cfg.features.hop_ms = feats.at("hop_ms").get<double>();

    const auto& synth = j.at("synth");
    cfg.synth.n_classes = synth.at("n_classes").get<int>();
    cfg.synth.n_train = synth.at("n_train").get<int>();
    cfg.synth.n_val = synth.at("n_val").get<int>();
    cfg.synth.n_eval = synth.at("n_eval").get<int>();
    cfg.synth.clip_seconds = synth.at("clip_seconds").get<double>();
    cfg.synth.events_per_clip_mean = synth.at("events_per_clip_mean").get<double>();
    cfg.synth.label_flip_rate = synth.at("label_flip_rate").get<double>();
    cfg.synth.seed = synth.at("seed").get<uint64_t>();
    cfg.synth.noise_level = synth.at("noise_level").get<double>();
    cfg.synth.event_gain = synth.at("event_gain").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorKind::kConfigError, std::string("bad config value: ") + e.what());
  }

  try {
    cfg.schedule.validate();
    check(cfg.train.epochs >= 1, ErrorKind::kConfigError, "train.epochs must be >= 1");
    check(cfg.train.batch_size >= 1, ErrorKind::kConfigError, "train.batch_size must be >= 1");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfigError) throw;
    throw_error(ErrorKind::kConfigError, e.what());
  }
  return cfg;
}

}  // namespace secost
