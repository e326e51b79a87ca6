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
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "secost/error.hpp"

namespace secost {

// Probabilities are clamped to [1e-7, 1 - 1e-7] before any log, so the loss
// and its log-odds term stay finite for saturated network outputs.
template <class T>
inline constexpr T kProbClampLo = static_cast<T>(1e-7);

template <class T>
T clamp_prob(T p) {
  const T lo = kProbClampLo<T>;
  const T hi = static_cast<T>(1.0) - lo;
  return p < lo ? lo : (p > hi ? hi : p);
}

namespace mixing_detail {

template <class T>
void check_lengths(std::span<const T> a, std::span<const T> b, const char* what) {
  check(a.size() == b.size(), ErrorKind::kLengthMismatch,
        std::string(what) + ": " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

}  // namespace mixing_detail

/// Class-mean binary cross entropy between predicted probabilities and a
/// (possibly soft) target vector.
template <class T>
T bce_loss(std::span<const T> p, std::span<const T> target) {
  mixing_detail::check_lengths(p, target, "bce_loss");
  check(!p.empty(), ErrorKind::kLengthMismatch, "bce_loss on empty vectors");
  T acc = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const T pi = clamp_prob(p[i]);
    const T ti = target[i];
    acc += -ti * std::log(pi) - (static_cast<T>(1) - ti) * std::log(static_cast<T>(1) - pi);
  }
  return acc / static_cast<T>(p.size());
}

/// Per-class gradient of bce_loss w.r.t. p: (p - t) / (p (1 - p)) / |C|,
/// evaluated at the clamped probability.
template <class T>
std::vector<T> bce_loss_grad(std::span<const T> p, std::span<const T> target) {
  mixing_detail::check_lengths(p, target, "bce_loss_grad");
  std::vector<T> g(p.size());
  const T inv_c = static_cast<T>(1) / static_cast<T>(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    const T pi = clamp_prob(p[i]);
    g[i] = (pi - target[i]) / (pi * (static_cast<T>(1) - pi)) * inv_c;
  }
  return g;
}

/// Co-supervision target: alpha * y + (1 - alpha) * y_teacher, elementwise.
/// alpha weights the ground truth; 1 - alpha is the teacher's contribution.
template <class T>
std::vector<T> mix_targets(std::span<const T> y, std::span<const T> y_teacher, T alpha) {
  mixing_detail::check_lengths(y, y_teacher, "mix_targets");
  check(alpha >= static_cast<T>(0) && alpha <= static_cast<T>(1), ErrorKind::kAlphaOutOfRange,
        "alpha must be in [0,1]");
  std::vector<T> out(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    out[i] = alpha * y[i] + (static_cast<T>(1) - alpha) * y_teacher[i];
  }
  return out;
}

/// Multi-teacher target: sum_k alpha_k yhat^k with yhat^0 = y. The weights
/// must be non-negative and sum to 1 (tolerance 1e-9).
template <class T>
std::vector<T> mix_targets_multi(std::span<const T> y,
                                 const std::vector<std::vector<T>>& teachers,
                                 std::span<const T> weights) {
  check(weights.size() == teachers.size() + 1, ErrorKind::kLengthMismatch,
        "need one weight per teacher plus one for the ground truth");
  double sum = 0.0;
  for (const T w : weights) {
    check(w >= static_cast<T>(0), ErrorKind::kWeightsNotConvex, "negative teacher weight");
    sum += static_cast<double>(w);
  }
  check(std::abs(sum - 1.0) <= 1e-9, ErrorKind::kWeightsNotConvex,
        "teacher weights sum to " + std::to_string(sum));
  for (const auto& t : teachers) {
    check(t.size() == y.size(), ErrorKind::kLengthMismatch,
          "teacher prediction length mismatch");
  }
  std::vector<T> out(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    T acc = weights[0] * y[i];
    for (size_t k = 0; k < teachers.size(); ++k) acc += weights[k + 1] * teachers[k][i];
    out[i] = acc;
  }
  return out;
}

/// Teacher-correction form of the mixed-target loss: per class,
/// l(p_i, alpha y_i) + (1 - alpha) yhat_i log((1 - p_i)/p_i), class-averaged.
/// Algebraically identical to bce_loss(p, mix_targets(y, yhat, alpha)).
template <class T>
T decomposed_loss(std::span<const T> p, std::span<const T> y, std::span<const T> y_teacher,
                  T alpha) {
  mixing_detail::check_lengths(p, y, "decomposed_loss");
  mixing_detail::check_lengths(p, y_teacher, "decomposed_loss");
  check(alpha >= static_cast<T>(0) && alpha <= static_cast<T>(1), ErrorKind::kAlphaOutOfRange,
        "alpha must be in [0,1]");
  check(!p.empty(), ErrorKind::kLengthMismatch, "decomposed_loss on empty vectors");
  T acc = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const T pi = clamp_prob(p[i]);
    const T ay = alpha * y[i];
    const T base =
        -ay * std::log(pi) - (static_cast<T>(1) - ay) * std::log(static_cast<T>(1) - pi);
    const T log_odds = std::log((static_cast<T>(1) - pi) / pi);
    acc += base + (static_cast<T>(1) - alpha) * y_teacher[i] * log_odds;
  }
  return acc / static_cast<T>(p.size());
}

/// Multi-teacher form: l(p_i, alpha_0 y_i) + sum_k alpha_k yhat_i^k
/// log((1 - p_i)/p_i), class-averaged. Identical to bce_loss on
/// mix_targets_multi.
template <class T>
T decomposed_loss_multi(std::span<const T> p, std::span<const T> y,
                        const std::vector<std::vector<T>>& teachers,
                        std::span<const T> weights) {
  mixing_detail::check_lengths(p, y, "decomposed_loss_multi");
  check(weights.size() == teachers.size() + 1, ErrorKind::kLengthMismatch,
        "need one weight per teacher plus one for the ground truth");
  double sum = 0.0;
  for (const T w : weights) {
    check(w >= static_cast<T>(0), ErrorKind::kWeightsNotConvex, "negative teacher weight");
    sum += static_cast<double>(w);
  }
  check(std::abs(sum - 1.0) <= 1e-9, ErrorKind::kWeightsNotConvex,
        "teacher weights sum to " + std::to_string(sum));
  for (const auto& t : teachers) {
    check(t.size() == p.size(), ErrorKind::kLengthMismatch, "teacher prediction length mismatch");
  }
  check(!p.empty(), ErrorKind::kLengthMismatch, "decomposed_loss_multi on empty vectors");
  T acc = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const T pi = clamp_prob(p[i]);
    const T ay = weights[0] * y[i];
    const T base =
        -ay * std::log(pi) - (static_cast<T>(1) - ay) * std::log(static_cast<T>(1) - pi);
    const T log_odds = std::log((static_cast<T>(1) - pi) / pi);
    T teach = 0;
    for (size_t k = 0; k < teachers.size(); ++k) teach += weights[k + 1] * teachers[k][i];
    acc += base + teach * log_odds;
  }
  return acc / static_cast<T>(p.size());
}

// Convenience overloads for vector arguments.
template <class T>
T bce_loss(const std::vector<T>& p, const std::vector<T>& t) {
  return bce_loss(std::span<const T>(p), std::span<const T>(t));
}
template <class T>
std::vector<T> mix_targets(const std::vector<T>& y, const std::vector<T>& yh, T alpha) {
  return mix_targets(std::span<const T>(y), std::span<const T>(yh), alpha);
}
template <class T>
T decomposed_loss(const std::vector<T>& p, const std::vector<T>& y, const std::vector<T>& yh,
                  T alpha) {
  return decomposed_loss(std::span<const T>(p), std::span<const T>(y), std::span<const T>(yh),
                         alpha);
}

}  // namespace secost
