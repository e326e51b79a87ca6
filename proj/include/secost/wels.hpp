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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "secost/error.hpp"
#include "secost/io.hpp"
#include "secost/logmel.hpp"
#include "secost/nn.hpp"
#include "secost/rng.hpp"
#include "secost/tensor.hpp"

namespace secost {

// ---------------------------------------------------------------------------
// Configuration. Base filter counts follow the reference stack
// (64/128/256/512 in the conv blocks, 2048 and 1024 in the head); the width
// multiplier scales all of them while spatial geometry stays fixed.
// ---------------------------------------------------------------------------

struct WelsConfig {
  int n_classes = 0;
  double width_multiplier = 1.0;
  PoolKind recording_pool = PoolKind::kAvg;  // segment -> recording mapping
  PoolKind block_pool = PoolKind::kMax;      // pooling inside B1..B4

  int scaled(int base_width) const {
    return static_cast<int>(std::llround(base_width * width_multiplier));
  }

  void validate() const {
    check(n_classes >= 1, ErrorKind::kInvalidConfig, "n_classes must be >= 1");
    check(width_multiplier > 0.0, ErrorKind::kInvalidConfig, "width_multiplier must be > 0");
    for (int base : {64, 128, 256, 512, 2048, 1024}) {
      check(scaled(base) >= 1, ErrorKind::kInvalidConfig,
            "width_multiplier " + std::to_string(width_multiplier) +
                " scales width " + std::to_string(base) + " below 1");
    }
  }
};

inline const char* pool_kind_name(PoolKind k) { return k == PoolKind::kAvg ? "mean" : "max"; }

inline PoolKind pool_kind_from_name(const std::string& s) {
  if (s == "mean" || s == "avg") return PoolKind::kAvg;
  if (s == "max") return PoolKind::kMax;
  throw_error(ErrorKind::kConfigError, "unknown pool kind '" + s + "'");
}

/// Segment-level probabilities for one recording plus the geometry needed to
/// place each segment on the time axis.
struct SegmentOutput {
  std::vector<float> probs;  // row-major, K x n_classes
  int k = 0;
  int n_classes = 0;
  double segment_duration_s = 0.96;
  double segment_stride_s = 0.32;

  float at(int segment, int cls) const {
    return probs[static_cast<size_t>(segment) * n_classes + cls];
  }
};

/// Default geometry: the four pool stages reduce time by 32x and the 3-tall
/// head kernel spans 3 pooled steps, so segment i covers
/// [0.32 * i, 0.32 * i + 0.96] seconds at 100 input frames per second.
inline std::vector<std::pair<double, double>> segment_intervals(int k, double stride_s = 0.32,
                                                                double window_s = 0.96) {
  check(k >= 1, ErrorKind::kInvalidConfig, "segment count must be >= 1");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    out.emplace_back(stride_s * i, stride_s * i + window_s);
  }
  return out;
}

inline constexpr int kWelsMinFrames = 96;
inline constexpr int kWelsMels = 64;

// ---------------------------------------------------------------------------
// The network: B1..B4 (two 3x3 convs + pool each), L1 (3x2 conv), L2/L3 (1x1
// convs), L4 (1x1 conv to n_classes with sigmoid output, no batch norm so the
// outputs live strictly in (0,1)), then segment pooling to recording level.
// ---------------------------------------------------------------------------

class WelsNet {
 public:
  WelsNet(const WelsConfig& cfg, uint64_t seed) : cfg_(cfg), seed_(seed) {
    cfg_.validate();
    Rng rng(mix_seed(seed, 0x57454c53ull));  // "WELS"

    auto block = [&](const std::string& name, int in_ch, int out_ch, int pool_size) {
      add_conv_bn_relu(name + ".conv1", in_ch, out_ch, 3, 3, 1, rng);
      add_conv_bn_relu(name + ".conv2", out_ch, out_ch, 3, 3, 1, rng);
      net_.add(name + ".pool", std::make_unique<Pool2d>(cfg_.block_pool, pool_size, pool_size));
    };

    const int w1 = cfg_.scaled(64), w2 = cfg_.scaled(128), w3 = cfg_.scaled(256),
              w4 = cfg_.scaled(512), wl1 = cfg_.scaled(2048), wl23 = cfg_.scaled(1024);

    block("b1", 1, w1, 4);
    block("b2", w1, w2, 2);
    block("b3", w2, w3, 2);
    block("b4", w3, w4, 2);

    add_conv_bn_relu("l1", w4, wl1, 3, 2, 0, rng);
    add_conv_bn_relu("l2", wl1, wl23, 1, 1, 0, rng);
    add_conv_bn_relu("l3", wl23, wl23, 1, 1, 0, rng);

    auto* l4 = new Conv2d(wl23, cfg_.n_classes, 1, 1, 1, 0);
    l4->init_kaiming_uniform(rng);
    net_.add("l4.conv", LayerPtr(l4));
    net_.add("l4.sigmoid", std::make_unique<Sigmoid>());

    pool_ = static_cast<GlobalPool*>(
        pool_net_.add("p.pool", std::make_unique<GlobalPool>(cfg_.recording_pool)));
  }

  const WelsConfig& config() const { return cfg_; }
  uint64_t seed() const { return seed_; }

  /// Segment count for a given frame count, following the stack geometry:
  /// four time poolings (/4, /2, /2, /2 with truncation) then a 3-tall valid
  /// convolution.
  static int segment_count(int frames) {
    int t = frames / 4;
    t = t / 2;
    t = t / 2;
    t = t / 2;
    return t - 3 + 1;
  }

  struct BatchOutput {
    TensorPtr segment_probs;  // [N, C, K, 1]
    TensorPtr recording;      // [N, C]
  };

  /// Batched forward over [N, 1, frames, 64]. Frames must be >= 96 so at
  /// least one segment survives the pooling chain.
  BatchOutput forward_batch(const TensorPtr& x, Mode mode, bool record) {
    check(x->rank() == 4 && x->dim(1) == 1, ErrorKind::kShapeMismatch,
          "expected [N,1,frames,64] input, got " + x->shape_str());
    check(x->dim(3) == kWelsMels, ErrorKind::kShapeMismatch,
          "expected 64 mel bins, got " + std::to_string(x->dim(3)));
    check(x->dim(2) >= kWelsMinFrames, ErrorKind::kInputTooShort,
          "need at least " + std::to_string(kWelsMinFrames) + " frames, got " +
              std::to_string(x->dim(2)));
    BatchOutput out;
    out.segment_probs = net_.forward(x, mode, record);
    out.recording = pool_net_.forward(out.segment_probs, mode, record);
    return out;
  }

  /// Gradient entry point paired with forward_batch(record=true): takes the
  /// loss gradient w.r.t. recording probabilities and returns the gradient
  /// w.r.t. the input.
  Tensor backward_from_recording(const Tensor& d_recording) {
    Tensor d_seg = pool_net_.backward(d_recording);
    return net_.backward(std::move(d_seg));
  }

  /// Single-recording inference. Returns segment-level probabilities and the
  /// pooled recording-level probabilities.
  std::pair<SegmentOutput, std::vector<float>> forward(const LogMelSpec& spec,
                                                       Mode mode = Mode::kEval) {
    check(spec.n_mels == kWelsMels, ErrorKind::kShapeMismatch,
          "expected 64 mel bins, got " + std::to_string(spec.n_mels));
    auto x = make_tensor({1, 1, spec.frames, spec.n_mels});
    std::copy(spec.values.begin(), spec.values.end(), x->data.begin());
    auto out = forward_batch(x, mode, /*record=*/false);

    const Tensor& seg = *out.segment_probs;  // [1, C, K, 1]
    SegmentOutput so;
    so.k = seg.dim(2);
    so.n_classes = seg.dim(1);
    so.probs.resize(static_cast<size_t>(so.k) * so.n_classes);
    for (int c = 0; c < so.n_classes; ++c) {
      for (int k = 0; k < so.k; ++k) {
        so.probs[static_cast<size_t>(k) * so.n_classes + c] = seg.at4(0, c, k, 0);
      }
    }
    std::vector<float> rec(out.recording->data.begin(), out.recording->data.end());
    return {std::move(so), std::move(rec)};
  }

  std::vector<ParamRef> params() { return net_.params(); }
  std::vector<BufferRef> buffers() { return net_.buffers(); }
  void zero_grad() { net_.zero_grad(); }
  void clear_recorded() {
    net_.clear_recorded();
    pool_net_.clear_recorded();
  }

  int64_t param_count() {
    int64_t n = 0;
    for (const auto& p : params()) n += p.value->numel();
    return n;
  }

  Net& net() { return net_; }

 private:
  void add_conv_bn_relu(const std::string& name, int in_ch, int out_ch, int kh, int kw, int pad,
                        Rng& rng) {
    auto* conv = new Conv2d(in_ch, out_ch, kh, kw, 1, pad);
    conv->init_kaiming_uniform(rng);
    net_.add(name, LayerPtr(conv));
    net_.add(name + ".bn", std::make_unique<BatchNorm2d>(out_ch));
    net_.add(name + ".relu", std::make_unique<ReLU>());
  }

  WelsConfig cfg_;
  uint64_t seed_;
  Net net_;
  Net pool_net_;
  GlobalPool* pool_ = nullptr;
};

using WelsNetPtr = std::unique_ptr<WelsNet>;

inline WelsNetPtr build_wels(const WelsConfig& cfg, uint64_t seed) {
  return std::make_unique<WelsNet>(cfg, seed);
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "WELS", u32 version, length-prefixed UTF-8 JSON
// block (config + training metadata), u32 record count, then per tensor:
// length-prefixed name, u32 dtype (0 = f32), u32 rank, u32 dims[rank],
// payload little-endian f32.
// ---------------------------------------------------------------------------

inline constexpr uint32_t kWelsMagic = 0x534c4557u;  // "WELS"
inline constexpr uint32_t kWelsVersion = 1;

struct CheckpointMeta {
  int stage = 0;
  double alpha = 1.0;
  uint64_t seed = 0;
  int best_epoch = -1;
  double val_map = -1.0;
  double val_mauc = -1.0;
};

namespace wels_detail {

inline nlohmann::json config_to_json(const WelsConfig& cfg) {
  return {{"n_classes", cfg.n_classes},
          {"width_multiplier", cfg.width_multiplier},
          {"recording_pool", pool_kind_name(cfg.recording_pool)},
          {"block_pool", pool_kind_name(cfg.block_pool)}};
}

inline WelsConfig config_from_json(const nlohmann::json& j) {
  WelsConfig cfg;
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.width_multiplier = j.at("width_multiplier").get<double>();
  cfg.recording_pool = pool_kind_from_name(j.at("recording_pool").get<std::string>());
  cfg.block_pool = pool_kind_from_name(j.at("block_pool").get<std::string>());
  return cfg;
}

}  // namespace wels_detail

inline void save_checkpoint(WelsNet& model, const std::filesystem::path& path,
                            const CheckpointMeta& meta = {}) {
  nlohmann::json j;
  j["config"] = wels_detail::config_to_json(model.config());
  j["meta"] = {{"stage", meta.stage},   {"alpha", meta.alpha},
               {"seed", meta.seed},     {"best_epoch", meta.best_epoch},
               {"val_map", meta.val_map}, {"val_mauc", meta.val_mauc}};

  ByteWriter w;
  w.u32(kWelsMagic);
  w.u32(kWelsVersion);
  w.str(j.dump());

  auto params = model.params();
  auto buffers = model.buffers();
  w.u32(static_cast<uint32_t>(params.size() + buffers.size()));
  auto write_record = [&w](const std::string& name, const Tensor& t) {
    w.str(name);
    w.u32(0);  // dtype f32
    w.u32(static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<uint32_t>(d));
    w.f32_array(t.data.data(), t.data.size());
  };
  for (const auto& p : params) write_record(p.name, *p.value);
  for (const auto& b : buffers) write_record(b.name, *b.value);
  write_file_atomic(path, w.bytes());
}

struct LoadedCheckpoint {
  WelsNetPtr model;
  CheckpointMeta meta;
};

/// Loads and fully validates a checkpoint: every parameter and buffer of the
/// architecture described by the embedded config must be present exactly once
/// with the right shape. A truncated or mismatched file throws and never
/// yields a partial model.
inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  ByteReader r(bytes);
  if (r.remaining() < 8 || r.u32() != kWelsMagic)
    throw_error(ErrorKind::kVersionMismatch, "not a WELS checkpoint: " + path.string());
  const uint32_t version = r.u32();
  if (version != kWelsVersion)
    throw_error(ErrorKind::kVersionMismatch,
                "checkpoint version " + std::to_string(version) + " unsupported");

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorKind::kVersionMismatch, std::string("bad checkpoint metadata: ") + e.what());
  }

  LoadedCheckpoint out;
  WelsConfig cfg = wels_detail::config_from_json(j.at("config"));
  const auto& m = j.at("meta");
  out.meta.stage = m.at("stage").get<int>();
  out.meta.alpha = m.at("alpha").get<double>();
  out.meta.seed = m.at("seed").get<uint64_t>();
  out.meta.best_epoch = m.value("best_epoch", -1);
  out.meta.val_map = m.value("val_map", -1.0);
  out.meta.val_mauc = m.value("val_mauc", -1.0);

  out.model = build_wels(cfg, out.meta.seed);

  // Index the architecture's tensors by name.
  std::vector<std::pair<std::string, Tensor*>> slots;
  for (const auto& p : out.model->params()) slots.emplace_back(p.name, p.value);
  for (const auto& b : out.model->buffers()) slots.emplace_back(b.name, b.value);

  const uint32_t n_records = r.u32();
  check(n_records == slots.size(), ErrorKind::kShapeMismatch,
        "checkpoint has " + std::to_string(n_records) + " tensors, architecture needs " +
            std::to_string(slots.size()));
  std::vector<bool> filled(slots.size(), false);
  for (uint32_t i = 0; i < n_records; ++i) {
    const std::string name = r.str();
    const uint32_t dtype = r.u32();
    check(dtype == 0, ErrorKind::kVersionMismatch, "unsupported dtype in checkpoint");
    const uint32_t rank = r.u32();
    std::vector<int> dims(rank);
    for (uint32_t d = 0; d < rank; ++d) dims[d] = static_cast<int>(r.u32());

    size_t slot = slots.size();
    for (size_t s = 0; s < slots.size(); ++s) {
      if (slots[s].first == name) {
        slot = s;
        break;
      }
    }
    check(slot < slots.size(), ErrorKind::kShapeMismatch,
          "unknown tensor '" + name + "' in checkpoint");
    check(!filled[slot], ErrorKind::kShapeMismatch, "duplicate tensor '" + name + "'");
    Tensor* t = slots[slot].second;
    check(t->shape == dims, ErrorKind::kShapeMismatch,
          "shape mismatch for '" + name + "'");
    r.f32_array(t->ptr(), t->data.size());
    filled[slot] = true;
  }
  for (size_t s = 0; s < slots.size(); ++s) {
    check(filled[s], ErrorKind::kShapeMismatch, "missing tensor '" + slots[s].first + "'");
  }
  return out;
}

}  // namespace secost
