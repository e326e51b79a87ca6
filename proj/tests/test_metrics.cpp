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

#include <cmath>
#include <filesystem>

#include "secost/metrics.hpp"
#include "secost/rng.hpp"
#include "secost/verify.hpp"

using namespace secost;

TEST_CASE("average_precision: worked example") {
  const std::vector<float> scores = {0.9f, 0.8f, 0.7f, 0.6f};
  const std::vector<uint8_t> labels = {1, 0, 1, 0};
  REQUIRE(average_precision(scores, labels) ==
          Catch::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("average_precision: perfect ranking scores 1") {
  const std::vector<float> scores = {0.9f, 0.8f, 0.3f, 0.2f};
  const std::vector<uint8_t> labels = {1, 1, 0, 0};
  REQUIRE(average_precision(scores, labels) == 1.0);
}

TEST_CASE("average_precision: stable order resolves full ties") {
  // All scores equal: the positive keeps its original position.
  for (size_t pos = 0; pos < 5; ++pos) {
    std::vector<float> scores(5, 0.5f);
    std::vector<uint8_t> labels(5, 0);
    labels[pos] = 1;
    REQUIRE(average_precision(scores, labels) ==
            Catch::Approx(1.0 / static_cast<double>(pos + 1)).epsilon(1e-12));
    REQUIRE(average_precision(scores, labels) ==
            Catch::Approx(oracle_average_precision(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("average_precision needs a positive") {
  const std::vector<float> scores = {0.5f, 0.4f};
  const std::vector<uint8_t> labels = {0, 0};
  REQUIRE_THROWS_MATCHES(average_precision(scores, labels), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::kNoPositives;
                         }));
}

TEST_CASE("roc_auc: worked examples") {
  const std::vector<float> scores = {0.9f, 0.8f, 0.7f, 0.6f};
  const std::vector<uint8_t> labels = {1, 0, 1, 0};
  REQUIRE(roc_auc(scores, labels) == Catch::Approx(0.75).margin(1e-12));

  const std::vector<float> tied(6, 0.4f);
  const std::vector<uint8_t> mixed = {1, 0, 1, 0, 0, 1};
  REQUIRE(roc_auc(tied, mixed) == Catch::Approx(0.5).margin(1e-12));

  const std::vector<float> separated = {0.9f, 0.8f, 0.2f, 0.1f};
  const std::vector<uint8_t> perfect = {1, 1, 0, 0};
  REQUIRE(roc_auc(separated, perfect) == 1.0);
}

TEST_CASE("roc_auc: needs both label values") {
  const std::vector<float> scores = {0.5f, 0.4f};
  const std::vector<uint8_t> labels = {1, 1};
  REQUIRE_THROWS_MATCHES(roc_auc(scores, labels), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::kDegenerateLabels;
                         }));
}

TEST_CASE("metrics match brute-force oracles on short tied inputs") {
  // The full exhaustive sweep to length 8 runs in the acceptance suite; this
  // covers lengths <= 5 for fast feedback.
  const float alphabet[4] = {0.1f, 0.2f, 0.3f, 0.4f};
  for (int n = 1; n <= 5; ++n) {
    std::vector<float> scores(static_cast<size_t>(n));
    std::vector<uint8_t> labels(static_cast<size_t>(n));
    int64_t n_assign = 1;
    for (int i = 0; i < n; ++i) n_assign *= 4;
    for (int64_t sa = 0; sa < n_assign; ++sa) {
      int64_t code = sa;
      for (int i = 0; i < n; ++i) {
        scores[static_cast<size_t>(i)] = alphabet[code & 3];
        code >>= 2;
      }
      for (uint32_t mask = 0; mask < (1u << n); ++mask) {
        int n_pos = 0;
        for (int i = 0; i < n; ++i) {
          labels[static_cast<size_t>(i)] = (mask >> i) & 1u;
          n_pos += labels[static_cast<size_t>(i)];
        }
        if (n_pos >= 1) {
          REQUIRE(average_precision(scores, labels) == oracle_average_precision(scores, labels));
        }
        if (n_pos >= 1 && n_pos < n) {
          REQUIRE(roc_auc(scores, labels) == oracle_roc_auc(scores, labels));
        }
      }
    }
  }
}

TEST_CASE("metrics are invariant under strictly monotone score transforms") {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    const size_t n = 3 + rng.below(12);
    std::vector<float> scores(n);
    std::vector<uint8_t> labels(n);
    int n_pos = 0;
    for (size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform_f(0.0f, 1.0f);
      labels[i] = rng.bernoulli(0.4) ? 1 : 0;
      n_pos += labels[i];
    }
    if (n_pos == 0 || n_pos == static_cast<int>(n)) continue;
    std::vector<float> warped(n);
    for (size_t i = 0; i < n; ++i) warped[i] = std::exp(3.0f * scores[i]) - 0.5f;
    REQUIRE(average_precision(scores, labels) ==
            Catch::Approx(average_precision(warped, labels)).epsilon(1e-12));
    REQUIRE(roc_auc(scores, labels) == Catch::Approx(roc_auc(warped, labels)).epsilon(1e-12));
  }
}

TEST_CASE("auc of negated scores complements to one without ties") {
  Rng rng(32);
  for (int t = 0; t < 50; ++t) {
    const size_t n = 4 + rng.below(10);
    std::vector<float> scores(n);
    std::vector<uint8_t> labels(n);
    int n_pos = 0;
    for (size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<float>(i) * 0.125f + rng.uniform_f(0.0f, 0.1f);  // distinct
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
      n_pos += labels[i];
    }
    if (n_pos == 0 || n_pos == static_cast<int>(n)) continue;
    std::vector<float> negated(n);
    for (size_t i = 0; i < n; ++i) negated[i] = -scores[i];
    REQUIRE(roc_auc(scores, labels) + roc_auc(negated, labels) ==
            Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("evaluate_scores: per-class report over a small dataset") {
  // 4 recordings x 3 classes; class 2 has no positives.
  const std::vector<float> scores = {
      0.9f, 0.1f, 0.5f,
      0.8f, 0.7f, 0.5f,
      0.2f, 0.6f, 0.5f,
      0.1f, 0.2f, 0.5f,
  };
  const std::vector<uint8_t> labels = {
      1, 0, 0,
      1, 1, 0,
      0, 1, 0,
      0, 0, 0,
  };
  EvalReport report = evaluate_scores(scores, labels, 4, 3, {"a", "b", "c"});
  REQUIRE(report.classes.size() == 3);
  REQUIRE(report.n_classes_in_map == 2);
  REQUIRE_FALSE(report.classes[2].in_map);
  REQUIRE(report.classes[2].n_pos == 0);
  // mAP equals the mean of the included per-class APs.
  const double expect = (report.classes[0].ap + report.classes[1].ap) / 2.0;
  REQUIRE(report.map == Catch::Approx(expect).epsilon(1e-12));
  REQUIRE(report.classes[0].name == "a");

  SECTION("ground-truth scores give mAP 1") {
    std::vector<float> truth(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) truth[i] = labels[i] ? 1.0f : 0.0f;
    EvalReport perfect = evaluate_scores(truth, labels, 4, 3);
    REQUIRE(perfect.map == 1.0);
  }
  SECTION("constant scores match the tie oracle") {
    std::vector<float> constant(labels.size(), 0.5f);
    EvalReport flat = evaluate_scores(constant, labels, 4, 3);
    for (int c = 0; c < 2; ++c) {
      std::vector<float> col(4, 0.5f);
      std::vector<uint8_t> lab(4);
      for (int i = 0; i < 4; ++i) lab[static_cast<size_t>(i)] = labels[static_cast<size_t>(i) * 3 + static_cast<size_t>(c)];
      REQUIRE(flat.classes[static_cast<size_t>(c)].ap ==
              Catch::Approx(oracle_average_precision(col, lab)).epsilon(1e-12));
    }
  }
  SECTION("empty dataset is rejected") {
    REQUIRE_THROWS_MATCHES(evaluate_scores({}, {}, 0, 3), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::kEmptyDataset;
                           }));
  }
}

TEST_CASE("report files round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "secost_test_report";
  fs::create_directories(dir);

  const std::vector<float> scores = {0.9f, 0.1f, 0.8f, 0.7f, 0.2f, 0.6f};
  const std::vector<uint8_t> labels = {1, 0, 1, 1, 0, 0};
  EvalReport report = evaluate_scores(scores, labels, 3, 2);
  const fs::path path = dir / "report.jsonl";
  write_report(path, report);
  EvalReport back = read_report(path);
  REQUIRE(back.classes.size() == report.classes.size());
  REQUIRE(back.map == Catch::Approx(report.map).epsilon(1e-12));
  REQUIRE(back.mauc == Catch::Approx(report.mauc).epsilon(1e-12));
  REQUIRE(back.n_eval == report.n_eval);
  for (size_t i = 0; i < report.classes.size(); ++i) {
    REQUIRE(back.classes[i].ap == Catch::Approx(report.classes[i].ap).epsilon(1e-12));
    REQUIRE(back.classes[i].in_map == report.classes[i].in_map);
  }
  fs::remove_all(dir);
}

namespace {

EvalReport report_with_aps(const std::vector<double>& aps) {
  EvalReport report;
  report.n_eval = 100;
  for (size_t i = 0; i < aps.size(); ++i) {
    ClassMetrics m;
    m.class_index = static_cast<int>(i);
    m.name = "class_" + std::to_string(i);
    m.ap = aps[i];
    m.auc = 0.9;
    m.n_pos = 10;
    m.n_neg = 90;
    m.in_map = true;
    m.in_mauc = true;
    report.classes.push_back(m);
  }
  report.n_classes_in_map = static_cast<int>(aps.size());
  return report;
}

}  // namespace

TEST_CASE("improvement_analysis: identical reports change nothing") {
  EvalReport base = report_with_aps({0.05, 0.15, 0.55, 0.95});
  ImprovementBins bins = improvement_analysis(base, base);
  REQUIRE(bins.n_classes == 4);
  REQUIRE(bins.n_improved_gt20 == 0);
  REQUIRE(bins.n_degraded_gt10 == 0);
  for (const auto& b : bins.bins) REQUIRE(b.relative_improvement == 0.0);
  int total = 0;
  for (const auto& b : bins.bins) total += b.count;
  REQUIRE(total == 4);
}

TEST_CASE("improvement_analysis: singleton bin going 0.10 -> 0.128 reads +28%") {
  EvalReport base = report_with_aps({0.10});
  EvalReport next = report_with_aps({0.128});
  ImprovementBins bins = improvement_analysis(base, next);
  REQUIRE(bins.bins[1].count == 1);  // 0.10 falls in [0.1, 0.2)
  REQUIRE(bins.bins[1].relative_improvement == Catch::Approx(0.28).epsilon(1e-9));
  REQUIRE(bins.n_improved_gt20 == 1);
}

TEST_CASE("improvement_analysis: classes are binned by their base AP") {
  EvalReport base = report_with_aps({0.08});
  EvalReport next = report_with_aps({0.35});  // moved to another range
  ImprovementBins bins = improvement_analysis(base, next);
  REQUIRE(bins.bins[0].count == 1);  // still counted in the base bin
  REQUIRE(bins.bins[3].count == 0);
  REQUIRE(bins.per_class_bin[0] == 0);
}

TEST_CASE("improvement_analysis: degradation counting and mismatches") {
  EvalReport base = report_with_aps({0.5, 0.4});
  EvalReport next = report_with_aps({0.42, 0.5});  // -16% and +25%
  ImprovementBins bins = improvement_analysis(base, next);
  REQUIRE(bins.n_degraded_gt10 == 1);
  REQUIRE(bins.n_improved_gt20 == 1);

  EvalReport other = report_with_aps({0.5});
  REQUIRE_THROWS_MATCHES(improvement_analysis(base, other), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::kClassSetMismatch;
                         }));
}

TEST_CASE("improvement histogram renders") {
  EvalReport base = report_with_aps({0.1, 0.5});
  EvalReport next = report_with_aps({0.15, 0.55});
  const std::string text = improvement_histogram(improvement_analysis(base, next));
  REQUIRE_FALSE(text.empty());
  REQUIRE(text.find("classes improved") != std::string::npos);
}
