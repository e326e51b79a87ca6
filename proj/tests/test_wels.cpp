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

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "secost/rng.hpp"
#include "secost/wels.hpp"

using namespace secost;

namespace {

LogMelSpec random_spec(int frames, Rng& rng) {
  LogMelSpec spec;
  spec.frames = frames;
  spec.n_mels = kWelsMels;
  spec.frame_rate = 100.0;
  spec.values.resize(static_cast<size_t>(frames) * kWelsMels);
  for (auto& v : spec.values) v = rng.uniform_f(-20.0f, 3.0f);
  return spec;
}

WelsConfig small_config(int n_classes = 5, double wm = 1.0 / 16.0) {
  WelsConfig cfg;
  cfg.n_classes = n_classes;
  cfg.width_multiplier = wm;
  return cfg;
}

}  // namespace

TEST_CASE("wels: segment count follows the pooling chain") {
  REQUIRE(WelsNet::segment_count(1024) == 30);
  REQUIRE(WelsNet::segment_count(2048) == 62);
  REQUIRE(WelsNet::segment_count(96) == 1);
  REQUIRE(WelsNet::segment_count(999) == 29);
}

TEST_CASE("wels: forward produces K segments and probabilities in (0,1)") {
  WelsNet model(small_config(), 42);
  Rng rng(1);
  auto [segments, recording] = model.forward(random_spec(1024, rng));
  REQUIRE(segments.k == 30);
  REQUIRE(segments.n_classes == 5);
  REQUIRE(recording.size() == 5);
  for (float p : segments.probs) {
    REQUIRE(p > 0.0f);
    REQUIRE(p < 1.0f);
  }
  for (float p : recording) {
    REQUIRE(p > 0.0f);
    REQUIRE(p < 1.0f);
  }
}

TEST_CASE("wels: recording output is the segment mean under mean pooling") {
  WelsNet model(small_config(), 7);
  Rng rng(2);
  auto [segments, recording] = model.forward(random_spec(320, rng));
  for (int c = 0; c < segments.n_classes; ++c) {
    double mean = 0.0;
    for (int k = 0; k < segments.k; ++k) mean += segments.at(k, c);
    mean /= segments.k;
    REQUIRE(recording[static_cast<size_t>(c)] == Catch::Approx(mean).margin(1e-5));
  }
}

TEST_CASE("wels: max recording pooling takes the segment maximum") {
  WelsConfig cfg = small_config();
  cfg.recording_pool = PoolKind::kMax;
  WelsNet model(cfg, 7);
  Rng rng(3);
  auto [segments, recording] = model.forward(random_spec(320, rng));
  for (int c = 0; c < segments.n_classes; ++c) {
    float best = segments.at(0, c);
    for (int k = 1; k < segments.k; ++k) best = std::max(best, segments.at(k, c));
    REQUIRE(recording[static_cast<size_t>(c)] == Catch::Approx(best).margin(1e-6));
  }
}

TEST_CASE("wels: variable-length contract down to 96 frames") {
  WelsNet model(small_config(3, 1.0 / 32.0), 11);
  Rng rng(4);
  for (int frames : {96, 100, 127, 160, 321}) {
    auto [segments, recording] = model.forward(random_spec(frames, rng));
    REQUIRE(segments.k >= 1);
    REQUIRE(segments.k == WelsNet::segment_count(frames));
  }
  REQUIRE_THROWS_MATCHES(model.forward(random_spec(95, rng)), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::kInputTooShort;
                         }));
}

TEST_CASE("wels: widths scale with the multiplier while geometry is fixed") {
  WelsNet narrow(small_config(5, 1.0 / 8.0), 1);
  WelsNet wide(small_config(5, 1.0 / 4.0), 1);
  auto np = narrow.params();
  auto wp = wide.params();
  REQUIRE(np.size() == wp.size());
  // First block conv: filter count doubles, kernel geometry unchanged.
  REQUIRE(np[0].name == "b1.conv1.weight");
  REQUIRE(np[0].value->shape[0] * 2 == wp[0].value->shape[0]);
  REQUIRE(np[0].value->shape[2] == wp[0].value->shape[2]);
  REQUIRE(np[0].value->shape[3] == wp[0].value->shape[3]);

  Rng rng(5);
  auto spec = random_spec(256, rng);
  auto [seg_n, rec_n] = narrow.forward(spec);
  auto [seg_w, rec_w] = wide.forward(spec);
  REQUIRE(seg_n.k == seg_w.k);
}

TEST_CASE("wels: builds are deterministic in the seed") {
  WelsNet a(small_config(), 123);
  WelsNet b(small_config(), 123);
  WelsNet c(small_config(), 124);
  auto pa = a.params();
  auto pb = b.params();
  auto pc = c.params();
  bool all_equal = true, any_diff = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].value->data != pb[i].value->data) all_equal = false;
    if (pa[i].value->data != pc[i].value->data) any_diff = true;
  }
  REQUIRE(all_equal);
  REQUIRE(any_diff);
}

TEST_CASE("wels: invalid configurations are rejected") {
  WelsConfig no_classes;
  no_classes.n_classes = 0;
  REQUIRE_THROWS_MATCHES(WelsNet(no_classes, 1), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::kInvalidConfig;
                         }));

  WelsConfig too_narrow;
  too_narrow.n_classes = 4;
  too_narrow.width_multiplier = 1.0 / 200.0;  // scales 64 below 1
  REQUIRE_THROWS_AS(WelsNet(too_narrow, 1), Error);
}

TEST_CASE("segment intervals follow the 0.32 s stride / 0.96 s window geometry") {
  auto intervals = segment_intervals(30);
  REQUIRE(intervals.size() == 30);
  REQUIRE(intervals[0].first == Catch::Approx(0.0));
  REQUIRE(intervals[0].second == Catch::Approx(0.96));
  REQUIRE(intervals[1].first == Catch::Approx(0.32));
  REQUIRE(intervals[1].second == Catch::Approx(1.28));
  // 30 segments from 1024 frames span just over ten seconds.
  REQUIRE(intervals.back().second == Catch::Approx(0.32 * 29 + 0.96));
  REQUIRE_THROWS_AS(segment_intervals(0), Error);
}

TEST_CASE("checkpoint: save/load round trip reproduces forward outputs") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "secost_test_ckpt";
  fs::create_directories(dir);
  const fs::path path = dir / "model.wels";

  WelsNet model(small_config(4, 1.0 / 16.0), 99);
  Rng rng(6);
  auto spec = random_spec(256, rng);
  auto [seg_a, rec_a] = model.forward(spec);

  CheckpointMeta meta;
  meta.stage = 2;
  meta.alpha = 0.3;
  meta.seed = 99;
  meta.val_map = 0.5;
  save_checkpoint(model, path, meta);

  auto loaded = load_checkpoint(path);
  REQUIRE(loaded.meta.stage == 2);
  REQUIRE(loaded.meta.alpha == Catch::Approx(0.3));
  REQUIRE(loaded.meta.seed == 99);
  auto [seg_b, rec_b] = loaded.model->forward(spec);
  REQUIRE(rec_a == rec_b);
  REQUIRE(seg_a.probs == seg_b.probs);

  SECTION("truncated checkpoints never load partially") {
    auto bytes = read_file(path);
    bytes.resize(bytes.size() - 257);
    write_file_atomic(path, bytes);
    REQUIRE_THROWS_AS(load_checkpoint(path), Error);
  }
  SECTION("bad magic is a version mismatch") {
    auto bytes = read_file(path);
    bytes[1] = 0x7f;
    write_file_atomic(path, bytes);
    REQUIRE_THROWS_MATCHES(load_checkpoint(path), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::kVersionMismatch;
                           }));
  }
  fs::remove_all(dir);
}
