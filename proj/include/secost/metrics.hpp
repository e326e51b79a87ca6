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
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "secost/error.hpp"
#include "secost/io.hpp"

namespace secost {

/// Non-interpolated average precision. Items are ranked by score descending
/// with ties broken by stable original order; AP is the mean over positives
/// of the precision at each positive's rank.
inline double average_precision(std::span<const float> scores, std::span<const uint8_t> labels) {
  check(scores.size() == labels.size(), ErrorKind::kLengthMismatch,
        "average_precision: scores vs labels");
  size_t n_pos = 0;
  for (uint8_t l : labels) n_pos += l ? 1 : 0;
  check(n_pos >= 1, ErrorKind::kNoPositives, "average_precision needs at least one positive");

  std::vector<uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](uint32_t a, uint32_t b) { return scores[a] > scores[b]; });

  double sum_prec = 0.0;
  size_t seen_pos = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]]) {
      ++seen_pos;
      sum_prec += static_cast<double>(seen_pos) / static_cast<double>(rank + 1);
    }
  }
  return sum_prec / static_cast<double>(n_pos);
}

/// ROC AUC in the Mann-Whitney form: the fraction of (positive, negative)
/// pairs ranked correctly, ties counting 1/2. Computed via tied rank sums.
inline double roc_auc(std::span<const float> scores, std::span<const uint8_t> labels) {
  check(scores.size() == labels.size(), ErrorKind::kLengthMismatch, "roc_auc: scores vs labels");
  size_t n_pos = 0;
  for (uint8_t l : labels) n_pos += l ? 1 : 0;
  const size_t n_neg = labels.size() - n_pos;
  check(n_pos >= 1 && n_neg >= 1, ErrorKind::kDegenerateLabels,
        "roc_auc needs at least one positive and one negative");

  std::vector<uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&scores](uint32_t a, uint32_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups; sum positive ranks.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// ---------------------------------------------------------------------------
// Dataset-level evaluation.
// ---------------------------------------------------------------------------

struct ClassMetrics {
  int class_index = 0;
  std::string name;
  double ap = 0.0;
  double auc = 0.0;
  int n_pos = 0;
  int n_neg = 0;
  bool in_map = false;   // has >= 1 positive
  bool in_mauc = false;  // has >= 1 positive and >= 1 negative
};

struct EvalReport {
  std::vector<ClassMetrics> classes;
  double map = 0.0;
  double mauc = 0.0;
  int n_eval = 0;
  int n_classes_in_map = 0;
  int n_classes_in_mauc = 0;
};

/// Per-class AP/AUC over recording-level scores. `scores` is n_eval x
/// n_classes row-major; `labels` likewise (0/1). Classes without positives
/// are excluded from mAP and flagged; classes without both label values are
/// excluded from mAUC.
inline EvalReport evaluate_scores(std::span<const float> scores, std::span<const uint8_t> labels,
                                  int n_eval, int n_classes,
                                  const std::vector<std::string>& class_names = {}) {
  check(n_eval > 0, ErrorKind::kEmptyDataset, "no evaluation recordings");
  check(static_cast<size_t>(n_eval) * n_classes == scores.size() && scores.size() == labels.size(),
        ErrorKind::kShapeMismatch, "evaluate_scores: bad matrix sizes");

  EvalReport report;
  report.n_eval = n_eval;
  report.classes.resize(static_cast<size_t>(n_classes));
  double ap_sum = 0.0, auc_sum = 0.0;
  std::vector<float> col(static_cast<size_t>(n_eval));
  std::vector<uint8_t> lab(static_cast<size_t>(n_eval));
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < n_eval; ++i) {
      col[static_cast<size_t>(i)] = scores[static_cast<size_t>(i) * n_classes + c];
      lab[static_cast<size_t>(i)] = labels[static_cast<size_t>(i) * n_classes + c];
    }
    ClassMetrics& m = report.classes[static_cast<size_t>(c)];
    m.class_index = c;
    m.name = c < static_cast<int>(class_names.size()) ? class_names[static_cast<size_t>(c)]
                                                      : "class_" + std::to_string(c);
    for (int i = 0; i < n_eval; ++i) (lab[static_cast<size_t>(i)] ? m.n_pos : m.n_neg)++;
    if (m.n_pos >= 1) {
      m.ap = average_precision(col, lab);
      m.in_map = true;
      ap_sum += m.ap;
      ++report.n_classes_in_map;
    }
    if (m.n_pos >= 1 && m.n_neg >= 1) {
      m.auc = roc_auc(col, lab);
      m.in_mauc = true;
      auc_sum += m.auc;
      ++report.n_classes_in_mauc;
    }
  }
  report.map = report.n_classes_in_map ? ap_sum / report.n_classes_in_map : 0.0;
  report.mauc = report.n_classes_in_mauc ? auc_sum / report.n_classes_in_mauc : 0.0;
  return report;
}

// Report files are JSON lines: one object per class, then a summary object.
inline void write_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ostringstream os;
  for (const auto& m : report.classes) {
    nlohmann::json j = {{"class", m.class_index}, {"name", m.name},
                        {"ap", m.ap},             {"auc", m.auc},
                        {"n_pos", m.n_pos},       {"n_neg", m.n_neg},
                        {"in_map", m.in_map},     {"in_mauc", m.in_mauc}};
    os << j.dump() << "\n";
  }
  nlohmann::json summary = {{"summary", true},
                            {"map", report.map},
                            {"mauc", report.mauc},
                            {"n_eval", report.n_eval},
                            {"n_classes_in_map", report.n_classes_in_map},
                            {"n_classes_in_mauc", report.n_classes_in_mauc}};
  os << summary.dump() << "\n";
  write_text_atomic(path, os.str());
}

inline EvalReport read_report(const std::filesystem::path& path) {
  EvalReport report;
  std::istringstream in(read_text(path));
  std::string line;
  bool have_summary = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw_error(ErrorKind::kParseError, "bad report line in " + path.string() + ": " + e.what());
    }
    if (j.value("summary", false)) {
      report.map = j.at("map").get<double>();
      report.mauc = j.at("mauc").get<double>();
      report.n_eval = j.at("n_eval").get<int>();
      report.n_classes_in_map = j.at("n_classes_in_map").get<int>();
      report.n_classes_in_mauc = j.at("n_classes_in_mauc").get<int>();
      have_summary = true;
    } else {
      ClassMetrics m;
      m.class_index = j.at("class").get<int>();
      m.name = j.at("name").get<std::string>();
      m.ap = j.at("ap").get<double>();
      m.auc = j.at("auc").get<double>();
      m.n_pos = j.at("n_pos").get<int>();
      m.n_neg = j.at("n_neg").get<int>();
      m.in_map = j.at("in_map").get<bool>();
      m.in_mauc = j.at("in_mauc").get<bool>();
      report.classes.push_back(std::move(m));
    }
  }
  check(have_summary, ErrorKind::kParseError, "report missing summary line: " + path.string());
  return report;
}

// ---------------------------------------------------------------------------
// Per-class improvement analysis: classes are binned by the BASE model's AP
// into [0,0.1), [0.1,0.2), ..., [0.9,1.0]; each bin reports the relative
// change of its mean AP.
// ---------------------------------------------------------------------------

struct ImprovementBin {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  double mean_base_ap = 0.0;
  double mean_new_ap = 0.0;
  double relative_improvement = 0.0;  // (mean_new - mean_base) / mean_base
};

struct ImprovementBins {
  std::vector<ImprovementBin> bins;                  // 10 bins
  std::vector<double> per_class_relative;            // indexed by class
  std::vector<int> per_class_bin;                    // base-AP bin per class
  int n_classes = 0;
  int n_improved_gt20 = 0;  // relative AP gain > 20%
  int n_degraded_gt10 = 0;  // relative AP drop > 10%
};

inline ImprovementBins improvement_analysis(const EvalReport& base, const EvalReport& next) {
  check(base.classes.size() == next.classes.size(), ErrorKind::kClassSetMismatch,
        "reports have different class counts");
  for (size_t i = 0; i < base.classes.size(); ++i) {
    check(base.classes[i].class_index == next.classes[i].class_index &&
              base.classes[i].name == next.classes[i].name,
          ErrorKind::kClassSetMismatch, "reports cover different classes");
  }

  ImprovementBins out;
  out.bins.resize(10);
  for (int b = 0; b < 10; ++b) {
    out.bins[static_cast<size_t>(b)].lo = 0.1 * b;
    out.bins[static_cast<size_t>(b)].hi = 0.1 * (b + 1);
  }
  std::vector<double> base_sum(10, 0.0), new_sum(10, 0.0);
  out.per_class_relative.assign(base.classes.size(), 0.0);
  out.per_class_bin.assign(base.classes.size(), -1);

  for (size_t i = 0; i < base.classes.size(); ++i) {
    const auto& b = base.classes[i];
    const auto& n = next.classes[i];
    if (!b.in_map || !n.in_map) continue;
    int bin = std::min(9, static_cast<int>(b.ap * 10.0));
    out.per_class_bin[i] = bin;
    out.bins[static_cast<size_t>(bin)].count++;
    base_sum[static_cast<size_t>(bin)] += b.ap;
    new_sum[static_cast<size_t>(bin)] += n.ap;
    ++out.n_classes;
    const double rel = b.ap > 0.0 ? (n.ap - b.ap) / b.ap : 0.0;
    out.per_class_relative[i] = rel;
    if (rel > 0.20) ++out.n_improved_gt20;
    if (rel < -0.10) ++out.n_degraded_gt10;
  }
  for (int b = 0; b < 10; ++b) {
    auto& bin = out.bins[static_cast<size_t>(b)];
    if (bin.count > 0) {
      bin.mean_base_ap = base_sum[static_cast<size_t>(b)] / bin.count;
      bin.mean_new_ap = new_sum[static_cast<size_t>(b)] / bin.count;
      if (bin.mean_base_ap > 0.0) {
        bin.relative_improvement = (bin.mean_new_ap - bin.mean_base_ap) / bin.mean_base_ap;
      }
    }
  }
  return out;
}

inline nlohmann::json improvement_to_json(const ImprovementBins& a) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : a.bins) {
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"count", b.count},
                    {"mean_base_ap", b.mean_base_ap},
                    {"mean_new_ap", b.mean_new_ap},
                    {"relative_improvement", b.relative_improvement}});
  }
  return {{"bins", bins},
          {"n_classes", a.n_classes},
          {"n_improved_gt20", a.n_improved_gt20},
          {"n_degraded_gt10", a.n_degraded_gt10}};
}

/// Plain-text histogram of per-bin relative improvement for terminal output.
inline std::string improvement_histogram(const ImprovementBins& a) {
  std::ostringstream os;
  os << "base-AP bin   classes  rel. mean-AP change\n";
  for (const auto& b : a.bins) {
    char head[64];
    std::snprintf(head, sizeof(head), "[%.1f,%.1f%c  %7d  %+7.1f%% ", b.lo, b.hi,
                  b.hi >= 1.0 ? ']' : ')', b.count, 100.0 * b.relative_improvement);
    os << head;
    const int len = std::min(40, static_cast<int>(std::lround(std::abs(b.relative_improvement) * 100.0)));
    for (int i = 0; i < len; ++i) os << (b.relative_improvement >= 0 ? '+' : '-');
    os << "\n";
  }
  os << "classes improved >20%: " << a.n_improved_gt20
     << ", degraded >10%: " << a.n_degraded_gt10 << " (of " << a.n_classes << ")\n";
  return os.str();
}

}  // namespace secost
