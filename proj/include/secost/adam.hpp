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
#include <vector>

#include "secost/error.hpp"
#include "secost/nn.hpp"
#include "secost/tensor.hpp"

namespace secost {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for one parameter tensor.
struct AdamParamState {
  Tensor m;
  Tensor v;
};

/// Standard bias-corrected Adam update for one parameter tensor. `t` is the
/// 1-based step count after this update.
inline void adam_step(Tensor& param, const Tensor& grad, AdamParamState& state, int64_t t,
                      const AdamConfig& cfg) {
  check_same_shape(param, grad, "adam_step param/grad");
  if (state.m.numel() == 0) {
    state.m = Tensor(param.shape);
    state.v = Tensor(param.shape);
  }
  check_same_shape(param, state.m, "adam_step param/moment");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  float* p = param.ptr();
  const float* g = grad.ptr();
  float* m = state.m.ptr();
  float* v = state.v.ptr();
  const int64_t n = param.numel();
  for (int64_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double m_hat = mi / bc1;
    const double v_hat = vi / bc2;
    p[i] = static_cast<float>(p[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
  }
}

/// Optimizer over a model's parameter list. The parameter list order must be
/// stable across step() calls.
class Adam {
 public:
  explicit Adam(const AdamConfig& cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<ParamRef>& params) {
    if (states_.empty()) states_.resize(params.size());
    check(states_.size() == params.size(), ErrorKind::kShapeMismatch,
          "adam parameter list changed size");
    ++t_;
    for (size_t i = 0; i < params.size(); ++i) {
      adam_step(*params[i].value, *params[i].grad, states_[i], t_, cfg_);
    }
  }

  int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<AdamParamState> states_;
  int64_t t_ = 0;
};

}  // namespace secost
