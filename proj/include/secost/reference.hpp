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

// Naive double-precision reference implementations of every layer, kept
// deliberately independent of the optimized kernels in nn.hpp. They serve as
// oracles: agreement checks for the fast forward passes and a low-noise
// function to differentiate numerically in the gradient checks.

#include <cmath>
#include <vector>

#include "secost/error.hpp"
#include "secost/nn.hpp"
#include "secost/tensor.hpp"

namespace secost::refnn {

struct DTensor {
  std::vector<int> shape;
  std::vector<double> data;

  DTensor() = default;
  explicit DTensor(std::vector<int> s) : shape(std::move(s)) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    data.assign(static_cast<size_t>(n), 0.0);
  }
  explicit DTensor(const Tensor& t) : shape(t.shape), data(t.data.begin(), t.data.end()) {}

  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int64_t offset4(int n, int c, int h, int w) const {
    return ((static_cast<int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w;
  }
  double at4(int n, int c, int h, int w) const {
    return data[static_cast<size_t>(offset4(n, c, h, w))];
  }
  double& at4(int n, int c, int h, int w) {
    return data[static_cast<size_t>(offset4(n, c, h, w))];
  }
};

inline DTensor conv2d(const DTensor& x, const DTensor& w, const DTensor& b, int stride, int pad) {
  const int n_batch = x.dim(0), in_ch = x.dim(1), h = x.dim(2), width = x.dim(3);
  const int out_ch = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  DTensor out({n_batch, out_ch, (h + 2 * pad - kh) / stride + 1,
               (width + 2 * pad - kw) / stride + 1});
  const int ho = out.dim(2), wo = out.dim(3);
  for (int n = 0; n < n_batch; ++n) {
    for (int co = 0; co < out_ch; ++co) {
      for (int yo = 0; yo < ho; ++yo) {
        for (int xo = 0; xo < wo; ++xo) {
          double acc = b.data[static_cast<size_t>(co)];
          for (int ci = 0; ci < in_ch; ++ci) {
            for (int ky = 0; ky < kh; ++ky) {
              for (int kx = 0; kx < kw; ++kx) {
                const int yi = yo * stride + ky - pad;
                const int xi = xo * stride + kx - pad;
                if (yi < 0 || yi >= h || xi < 0 || xi >= width) continue;
                acc += w.at4(co, ci, ky, kx) * x.at4(n, ci, yi, xi);
              }
            }
          }
          out.at4(n, co, yo, xo) = acc;
        }
      }
    }
  }
  return out;
}

inline DTensor batchnorm(const DTensor& x, const std::vector<double>& gamma,
                         const std::vector<double>& beta, const std::vector<double>& run_mean,
                         const std::vector<double>& run_var, double eps, bool train) {
  const int n_batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t plane = static_cast<int64_t>(h) * w;
  const int64_t m = static_cast<int64_t>(n_batch) * plane;
  DTensor out(x.shape);
  for (int c = 0; c < ch; ++c) {
    double mu, var;
    if (train) {
      double s = 0.0;
      for (int n = 0; n < n_batch; ++n) {
        for (int64_t i = 0; i < plane; ++i) {
          s += x.data[static_cast<size_t>((static_cast<int64_t>(n) * ch + c) * plane + i)];
        }
      }
      mu = s / static_cast<double>(m);
      double sq = 0.0;
      for (int n = 0; n < n_batch; ++n) {
        for (int64_t i = 0; i < plane; ++i) {
          const double d =
              x.data[static_cast<size_t>((static_cast<int64_t>(n) * ch + c) * plane + i)] - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(m);
    } else {
      mu = run_mean[static_cast<size_t>(c)];
      var = run_var[static_cast<size_t>(c)];
    }
    const double istd = 1.0 / std::sqrt(var + eps);
    for (int n = 0; n < n_batch; ++n) {
      for (int64_t i = 0; i < plane; ++i) {
        const size_t idx = static_cast<size_t>((static_cast<int64_t>(n) * ch + c) * plane + i);
        out.data[idx] = gamma[static_cast<size_t>(c)] * (x.data[idx] - mu) * istd +
                        beta[static_cast<size_t>(c)];
      }
    }
  }
  return out;
}

/// Discrete routing state of one forward pass (ReLU masks, pool argmaxes).
/// Two evaluations with equal patterns lie in the same affine piece of the
/// piecewise-smooth network, which makes finite differences between them
/// meaningful.
struct Pattern {
  uint64_t hash = 0xcbf29ce484222325ull;
  void add(uint64_t v) {
    hash ^= v;
    hash *= 0x100000001b3ull;
  }
};

inline DTensor relu(const DTensor& x, Pattern* pattern = nullptr) {
  DTensor out(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) {
    const bool on = x.data[i] > 0.0;
    out.data[i] = on ? x.data[i] : 0.0;
    if (pattern) pattern->add(on ? 2 : 1);
  }
  return out;
}

inline DTensor sigmoid(const DTensor& x) {
  DTensor out(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
  return out;
}

inline DTensor pool2d(const DTensor& x, PoolKind kind, int size, int stride,
                      Pattern* pattern = nullptr) {
  const int n_batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  DTensor out({n_batch, ch, (h - size) / stride + 1, (w - size) / stride + 1});
  const int ho = out.dim(2), wo = out.dim(3);
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < ch; ++c) {
      for (int yo = 0; yo < ho; ++yo) {
        for (int xo = 0; xo < wo; ++xo) {
          if (kind == PoolKind::kMax) {
            double best = x.at4(n, c, yo * stride, xo * stride);
            int best_idx = 0;
            for (int dy = 0; dy < size; ++dy) {
              for (int dx = 0; dx < size; ++dx) {
                const double v = x.at4(n, c, yo * stride + dy, xo * stride + dx);
                if (v > best) {
                  best = v;
                  best_idx = dy * size + dx;
                }
              }
            }
            out.at4(n, c, yo, xo) = best;
            if (pattern) pattern->add(static_cast<uint64_t>(best_idx) + 3);
          } else {
            double acc = 0.0;
            for (int dy = 0; dy < size; ++dy) {
              for (int dx = 0; dx < size; ++dx) {
                acc += x.at4(n, c, yo * stride + dy, xo * stride + dx);
              }
            }
            out.at4(n, c, yo, xo) = acc / (static_cast<double>(size) * size);
          }
        }
      }
    }
  }
  return out;
}

/// [N, C, K, 1] -> [N, C]
inline DTensor global_pool(const DTensor& x, PoolKind kind, Pattern* pattern = nullptr) {
  const int n_batch = x.dim(0), ch = x.dim(1), k = x.dim(2);
  DTensor out({n_batch, ch});
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < ch; ++c) {
      const double* p = x.data.data() + (static_cast<int64_t>(n) * ch + c) * k;
      double v;
      if (kind == PoolKind::kAvg) {
        v = 0.0;
        for (int i = 0; i < k; ++i) v += p[i];
        v /= k;
      } else {
        int best = 0;
        for (int i = 1; i < k; ++i) {
          if (p[i] > p[best]) best = i;
        }
        v = p[best];
        if (pattern) pattern->add(static_cast<uint64_t>(best) + 3);
      }
      out.data[static_cast<size_t>(n) * ch + c] = v;
    }
  }
  return out;
}

}  // namespace secost::refnn
