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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "secost/error.hpp"
#include "secost/rng.hpp"
#include "secost/tensor.hpp"

namespace secost {

enum class Mode { kTrain, kEval };

struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

struct BufferRef {
  std::string name;
  Tensor* value;
};

// ---------------------------------------------------------------------------
// Layers. forward() with record=true keeps whatever backward() needs; a
// backward() call without a recorded forward throws GraphNotRecorded.
// Recorded state is owned per layer, so training is single-owner; eval-mode
// forward with record=false writes no member state and is safe to call from
// multiple threads on a shared model.
// ---------------------------------------------------------------------------

class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* kind() const = 0;
  virtual TensorPtr forward(const TensorPtr& x, Mode mode, bool record) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {}
  virtual void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {}
  virtual void zero_grad() {}
  virtual void clear_recorded() {}

 protected:
  [[noreturn]] static void not_recorded(const char* who) {
    throw_error(ErrorKind::kGraphNotRecorded,
                std::string(who) + ": backward without a recorded forward pass");
  }
};

using LayerPtr = std::unique_ptr<Layer>;

namespace nn_detail {

// C[M x P] = A[M x K] * B[K x P] (+= when accumulate), all row-major.
// Tiled so the inner loop runs along P and vectorizes.
inline void gemm(const float* a, const float* b, float* c, int m_dim, int k_dim, int p_dim,
                 bool accumulate) {
  constexpr int kMr = 4;
  constexpr int kPt = 128;
  float acc[kMr][kPt];
  for (int p0 = 0; p0 < p_dim; p0 += kPt) {
    const int pw = std::min(kPt, p_dim - p0);
    for (int m0 = 0; m0 < m_dim; m0 += kMr) {
      const int mw = std::min(kMr, m_dim - m0);
      for (int i = 0; i < mw; ++i) {
        if (accumulate) {
          const float* crow = c + static_cast<int64_t>(m0 + i) * p_dim + p0;
          for (int j = 0; j < pw; ++j) acc[i][j] = crow[j];
        } else {
          for (int j = 0; j < pw; ++j) acc[i][j] = 0.0f;
        }
      }
      for (int k = 0; k < k_dim; ++k) {
        const float* brow = b + static_cast<int64_t>(k) * p_dim + p0;
        for (int i = 0; i < mw; ++i) {
          const float av = a[static_cast<int64_t>(m0 + i) * k_dim + k];
          for (int j = 0; j < pw; ++j) acc[i][j] += av * brow[j];
        }
      }
      for (int i = 0; i < mw; ++i) {
        float* crow = c + static_cast<int64_t>(m0 + i) * p_dim + p0;
        for (int j = 0; j < pw; ++j) crow[j] = acc[i][j];
      }
    }
  }
}

// C[M x K] += A[M x P] * B[K x P]^T, blocked along P so each chunk of A and B
// is read once. Dot products run in 16 explicit lanes (vectorizable without
// reassociation flags) and are flushed into double accumulators per chunk.
inline void gemm_nt_acc(const float* a, const float* b, double* c, int m_dim, int k_dim,
                        int p_dim) {
  constexpr int kPc = 4096;
  constexpr int kLanes = 16;
  float lanes[kLanes];
  for (int p0 = 0; p0 < p_dim; p0 += kPc) {
    const int pw = std::min(kPc, p_dim - p0);
    const int pw_vec = pw - pw % kLanes;
    for (int m = 0; m < m_dim; ++m) {
      const float* arow = a + static_cast<int64_t>(m) * p_dim + p0;
      double* crow = c + static_cast<int64_t>(m) * k_dim;
      for (int k = 0; k < k_dim; ++k) {
        const float* brow = b + static_cast<int64_t>(k) * p_dim + p0;
        for (int l = 0; l < kLanes; ++l) lanes[l] = 0.0f;
        for (int j = 0; j < pw_vec; j += kLanes) {
          for (int l = 0; l < kLanes; ++l) lanes[l] += arow[j + l] * brow[j + l];
        }
        double dot = 0.0;
        for (int l = 0; l < kLanes; ++l) dot += lanes[l];
        for (int j = pw_vec; j < pw; ++j) dot += static_cast<double>(arow[j]) * brow[j];
        crow[k] += dot;
      }
    }
  }
}

}  // namespace nn_detail

// ---------------------------------------------------------------------------
// Conv2d: cross-correlation, NCHW, H' = (H + 2P - KH)/S + 1. Implemented as
// im2col + GEMM per batch item; 1x1/stride-1/no-pad kernels skip the im2col
// copy entirely.
// ---------------------------------------------------------------------------

class Conv2d : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int kh, int kw, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw), stride_(stride), pad_(pad),
        weight_({out_ch, in_ch, kh, kw}), bias_({out_ch}),
        d_weight_({out_ch, in_ch, kh, kw}), d_bias_({out_ch}) {
    check(in_ch > 0 && out_ch > 0 && kh > 0 && kw > 0 && stride > 0 && pad >= 0,
          ErrorKind::kInvalidConfig, "bad conv2d geometry");
  }

  void init_kaiming_uniform(Rng& rng) {
    const double fan_in = static_cast<double>(in_ch_) * kh_ * kw_;
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& v : weight_.data) v = static_cast<float>(rng.uniform(-bound, bound));
    bias_.fill(0.0f);
  }

  const char* kind() const override { return "conv2d"; }

  std::vector<int> output_shape(const std::vector<int>& in) const {
    check(in.size() == 4, ErrorKind::kShapeMismatch, "conv2d expects NCHW input");
    check(in[1] == in_ch_, ErrorKind::kShapeMismatch,
          "conv2d expects " + std::to_string(in_ch_) + " input channels, got " +
              std::to_string(in[1]));
    const int h = in[2], w = in[3];
    check(h + 2 * pad_ >= kh_ && w + 2 * pad_ >= kw_, ErrorKind::kShapeMismatch,
          "conv2d kernel does not fit padded input");
    return {in[0], out_ch_, (h + 2 * pad_ - kh_) / stride_ + 1,
            (w + 2 * pad_ - kw_) / stride_ + 1};
  }

  TensorPtr forward(const TensorPtr& x, Mode, bool record) override {
    auto out = make_tensor(output_shape(x->shape));
    const int n_batch = x->dim(0), h = x->dim(2), w = x->dim(3);
    const int ho = out->dim(2), wo = out->dim(3);
    const int64_t in_size = static_cast<int64_t>(in_ch_) * h * w;
    const int64_t p_dim = static_cast<int64_t>(ho) * wo;
    const int k_dim = in_ch_ * kh_ * kw_;

#pragma omp parallel for schedule(static)
    for (int n = 0; n < n_batch; ++n) {
      const float* in_n = x->ptr() + n * in_size;
      float* out_n = out->ptr() + static_cast<int64_t>(n) * out_ch_ * p_dim;
      if (use_row_kernel(wo)) {
        forward_rows(in_n, out_n, h, w, ho, wo);
      } else {
        const float* b = patch_matrix(in_n, h, w, ho, wo, thread_scratch());
        nn_detail::gemm(weight_.ptr(), b, out_n, out_ch_, k_dim, static_cast<int>(p_dim), false);
        for (int co = 0; co < out_ch_; ++co) {
          const float bias = bias_.data[static_cast<size_t>(co)];
          float* row = out_n + static_cast<int64_t>(co) * p_dim;
          for (int64_t i = 0; i < p_dim; ++i) row[i] += bias;
        }
      }
    }
    if (record) x_ = x;
    return out;
  }

  Tensor backward(const Tensor& dy) override {
    if (!x_) not_recorded(kind());
    const Tensor& x = *x_;
    check(dy.shape == output_shape(x.shape), ErrorKind::kShapeMismatch,
          "conv2d backward shape mismatch");
    const int n_batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int ho = dy.dim(2), wo = dy.dim(3);
    const int64_t in_size = static_cast<int64_t>(in_ch_) * h * w;
    const int64_t p_dim = static_cast<int64_t>(ho) * wo;
    const int k_dim = in_ch_ * kh_ * kw_;
    Tensor dx(x.shape);

    // Weight transposed to [K x M] for the input-gradient GEMM.
    wt_scratch_.resize(static_cast<size_t>(k_dim) * out_ch_);
    for (int co = 0; co < out_ch_; ++co) {
      for (int k = 0; k < k_dim; ++k) {
        wt_scratch_[static_cast<size_t>(k) * out_ch_ + co] =
            weight_.data[static_cast<size_t>(co) * k_dim + k];
      }
    }

    // Per-item weight/bias gradient partials, reduced in batch order below so
    // results do not depend on the thread count.
    dw_part_.assign(static_cast<size_t>(n_batch) * out_ch_ * k_dim, 0.0);
    db_part_.assign(static_cast<size_t>(n_batch) * out_ch_, 0.0);

#pragma omp parallel for schedule(static)
    for (int n = 0; n < n_batch; ++n) {
      const float* in_n = x.ptr() + n * in_size;
      const float* dout_n = dy.ptr() + static_cast<int64_t>(n) * out_ch_ * p_dim;
      float* dx_n = dx.ptr() + n * in_size;

      // dIn = W^T * dOut, scattered back through the patch map.
      if (use_row_kernel(wo)) {
        backward_rows_din(dout_n, dx_n, h, w, ho, wo);
      } else {
        std::vector<float>& dpatch = thread_scratch2();
        dpatch.resize(static_cast<size_t>(k_dim) * p_dim);
        nn_detail::gemm(wt_scratch_.data(), dout_n, dpatch.data(), k_dim, out_ch_,
                        static_cast<int>(p_dim), false);
        if (is_direct()) {
          std::copy(dpatch.begin(), dpatch.end(), dx_n);
        } else {
          col2im_add(dpatch.data(), h, w, ho, wo, dx_n);
        }
      }

      // dW += dOut * patches^T
      const float* b = patch_matrix(in_n, h, w, ho, wo, thread_scratch());
      nn_detail::gemm_nt_acc(dout_n, b,
                             dw_part_.data() + static_cast<int64_t>(n) * out_ch_ * k_dim,
                             out_ch_, k_dim, static_cast<int>(p_dim));

      double* db_n = db_part_.data() + static_cast<int64_t>(n) * out_ch_;
      for (int co = 0; co < out_ch_; ++co) {
        const float* row = dout_n + static_cast<int64_t>(co) * p_dim;
        double acc = 0.0;
        for (int64_t i = 0; i < p_dim; ++i) acc += row[i];
        db_n[co] = acc;
      }
    }

    for (int co = 0; co < out_ch_; ++co) {
      for (int k = 0; k < k_dim; ++k) {
        double acc = 0.0;
        for (int n = 0; n < n_batch; ++n) {
          acc += dw_part_[(static_cast<size_t>(n) * out_ch_ + co) * k_dim + k];
        }
        d_weight_.data[static_cast<size_t>(co) * k_dim + k] += static_cast<float>(acc);
      }
      double acc = 0.0;
      for (int n = 0; n < n_batch; ++n) acc += db_part_[static_cast<size_t>(n) * out_ch_ + co];
      d_bias_.data[static_cast<size_t>(co)] += static_cast<float>(acc);
    }
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", &weight_, &d_weight_});
    out.push_back({prefix + ".bias", &bias_, &d_bias_});
  }
  void zero_grad() override {
    d_weight_.fill(0.0f);
    d_bias_.fill(0.0f);
  }
  void clear_recorded() override { x_.reset(); }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  int stride() const { return stride_; }
  int pad() const { return pad_; }

 private:
  // 1x1 stride-1 unpadded kernels read the input plane as the patch matrix.
  bool is_direct() const { return kh_ == 1 && kw_ == 1 && stride_ == 1 && pad_ == 0; }

  // Wide rows with small kernels: per output row, keep one accumulator row
  // per output channel L1-hot and make each kernel tap a full-width FMA over
  // a zero-padded source row; the padded row removes all edge branches. This
  // beats im2col + GEMM, which is bandwidth-bound at those shapes.
  bool use_row_kernel(int wo) const { return stride_ == 1 && kw_ <= 3 && wo >= 32; }

  void forward_rows(const float* in_n, float* out_n, int h, int w, int ho, int wo) const {
    std::vector<float>& scratch = thread_scratch2();
    scratch.resize(static_cast<size_t>(out_ch_) * wo + (static_cast<size_t>(w) + 2 * pad_));
    float* acc = scratch.data();                              // [out_ch x wo]
    float* rowpad = acc + static_cast<size_t>(out_ch_) * wo;  // [w + 2*pad]
    const int pad_w = w + 2 * pad_;

    for (int yo = 0; yo < ho; ++yo) {
      for (int co = 0; co < out_ch_; ++co) {
        const float bias = bias_.data[static_cast<size_t>(co)];
        float* arow = acc + static_cast<int64_t>(co) * wo;
        for (int xo = 0; xo < wo; ++xo) arow[xo] = bias;
      }
      for (int ci = 0; ci < in_ch_; ++ci) {
        const float* plane = in_n + static_cast<int64_t>(ci) * h * w;
        for (int ky = 0; ky < kh_; ++ky) {
          const int yi = yo + ky - pad_;
          if (yi < 0 || yi >= h) continue;
          const float* row = plane + static_cast<int64_t>(yi) * w;
          for (int j = 0; j < pad_; ++j) rowpad[j] = 0.0f;
          std::copy(row, row + w, rowpad + pad_);
          for (int j = 0; j < pad_; ++j) rowpad[pad_ + w + j] = 0.0f;
          for (int co = 0; co < out_ch_; ++co) {
            const float* w_tap =
                weight_.ptr() + ((static_cast<int64_t>(co) * in_ch_ + ci) * kh_ + ky) * kw_;
            float* arow = acc + static_cast<int64_t>(co) * wo;
            for (int kx = 0; kx < kw_; ++kx) {
              const float wv = w_tap[kx];
              const float* src = rowpad + kx;
              for (int xo = 0; xo < wo; ++xo) arow[xo] += wv * src[xo];
            }
          }
        }
      }
      for (int co = 0; co < out_ch_; ++co) {
        const float* arow = acc + static_cast<int64_t>(co) * wo;
        float* dst = out_n + (static_cast<int64_t>(co) * ho + yo) * wo;
        std::copy(arow, arow + wo, dst);
      }
    }
    (void)pad_w;
  }

  void backward_rows_din(const float* dout_n, float* dx_n, int h, int w, int ho, int wo) const {
    std::vector<float>& scratch = thread_scratch2();
    const int pad_w = wo + kw_ - 1;
    scratch.resize(static_cast<size_t>(in_ch_) * w + pad_w);
    float* acc = scratch.data();                            // [in_ch x w]
    float* rowpad = acc + static_cast<size_t>(in_ch_) * w;  // [wo + kw - 1]

    for (int yi = 0; yi < h; ++yi) {
      std::fill(acc, acc + static_cast<size_t>(in_ch_) * w, 0.0f);
      for (int co = 0; co < out_ch_; ++co) {
        const float* dout_plane = dout_n + static_cast<int64_t>(co) * ho * wo;
        for (int ky = 0; ky < kh_; ++ky) {
          const int yo = yi - ky + pad_;
          if (yo < 0 || yo >= ho) continue;
          // rowpad[j] = dout[yo][j + pad - kw + 1], zero outside.
          const float* row = dout_plane + static_cast<int64_t>(yo) * wo;
          const int shift = pad_ - kw_ + 1;
          for (int j = 0; j < pad_w; ++j) {
            const int src = j + shift;
            rowpad[j] = (src >= 0 && src < wo) ? row[src] : 0.0f;
          }
          for (int ci = 0; ci < in_ch_; ++ci) {
            const float* w_tap =
                weight_.ptr() + ((static_cast<int64_t>(co) * in_ch_ + ci) * kh_ + ky) * kw_;
            float* arow = acc + static_cast<int64_t>(ci) * w;
            for (int kx = 0; kx < kw_; ++kx) {
              const float wv = w_tap[kx];
              const float* src = rowpad + (kw_ - 1 - kx);
              for (int xi = 0; xi < w; ++xi) arow[xi] += wv * src[xi];
            }
          }
        }
      }
      for (int ci = 0; ci < in_ch_; ++ci) {
        const float* arow = acc + static_cast<int64_t>(ci) * w;
        float* dst = dx_n + (static_cast<int64_t>(ci) * h + yi) * w;
        std::copy(arow, arow + w, dst);
      }
    }
  }

  // Persistent per-thread scratch: im2col buffers are tens of megabytes at
  // the widest layer, and reallocating them per batch item costs more in page
  // faults than the arithmetic.
  static std::vector<float>& thread_scratch() {
    static thread_local std::vector<float> scratch;
    return scratch;
  }
  static std::vector<float>& thread_scratch2() {
    static thread_local std::vector<float> scratch;
    return scratch;
  }

  // Patch row index (ci, ky, kx) matches the weight's row-major layout.
  const float* patch_matrix(const float* in_n, int h, int w, int ho, int wo,
                            std::vector<float>& storage) const {
    if (is_direct()) return in_n;
    const int64_t p_dim = static_cast<int64_t>(ho) * wo;
    storage.assign(static_cast<size_t>(in_ch_) * kh_ * kw_ * p_dim, 0.0f);
    for (int ci = 0; ci < in_ch_; ++ci) {
      const float* plane = in_n + static_cast<int64_t>(ci) * h * w;
      for (int ky = 0; ky < kh_; ++ky) {
        for (int kx = 0; kx < kw_; ++kx) {
          float* row = storage.data() +
                       ((static_cast<int64_t>(ci) * kh_ + ky) * kw_ + kx) * p_dim;
          for (int yo = 0; yo < ho; ++yo) {
            const int yi = yo * stride_ + ky - pad_;
            if (yi < 0 || yi >= h) continue;
            const float* src = plane + static_cast<int64_t>(yi) * w;
            float* dst = row + static_cast<int64_t>(yo) * wo;
            if (stride_ == 1) {
              const int xo_lo = std::max(0, pad_ - kx);
              const int xo_hi = std::min(wo, w + pad_ - kx);
              const float* s = src + (xo_lo + kx - pad_);
              for (int xo = xo_lo; xo < xo_hi; ++xo) dst[xo] = s[xo - xo_lo];
            } else {
              for (int xo = 0; xo < wo; ++xo) {
                const int xi = xo * stride_ + kx - pad_;
                if (xi >= 0 && xi < w) dst[xo] = src[xi];
              }
            }
          }
        }
      }
    }
    return storage.data();
  }

  void col2im_add(const float* dpatch, int h, int w, int ho, int wo, float* dx_n) const {
    const int64_t p_dim = static_cast<int64_t>(ho) * wo;
    for (int ci = 0; ci < in_ch_; ++ci) {
      float* plane = dx_n + static_cast<int64_t>(ci) * h * w;
      for (int ky = 0; ky < kh_; ++ky) {
        for (int kx = 0; kx < kw_; ++kx) {
          const float* row = dpatch +
                             ((static_cast<int64_t>(ci) * kh_ + ky) * kw_ + kx) * p_dim;
          for (int yo = 0; yo < ho; ++yo) {
            const int yi = yo * stride_ + ky - pad_;
            if (yi < 0 || yi >= h) continue;
            float* dst = plane + static_cast<int64_t>(yi) * w;
            const float* src = row + static_cast<int64_t>(yo) * wo;
            if (stride_ == 1) {
              const int xo_lo = std::max(0, pad_ - kx);
              const int xo_hi = std::min(wo, w + pad_ - kx);
              float* d = dst + (xo_lo + kx - pad_);
              for (int xo = xo_lo; xo < xo_hi; ++xo) d[xo - xo_lo] += src[xo];
            } else {
              for (int xo = 0; xo < wo; ++xo) {
                const int xi = xo * stride_ + kx - pad_;
                if (xi >= 0 && xi < w) dst[xi] += src[xo];
              }
            }
          }
        }
      }
    }
  }

  int in_ch_, out_ch_, kh_, kw_, stride_, pad_;
  Tensor weight_, bias_, d_weight_, d_bias_;
  TensorPtr x_;
  std::vector<float> wt_scratch_;
  std::vector<double> dw_part_, db_part_;
};

// ---------------------------------------------------------------------------
// BatchNorm2d: per-channel over (N, H, W); train mode normalizes with batch
// statistics (biased variance) and updates running stats with momentum 0.1;
// eval mode applies the stored affine map.
// ---------------------------------------------------------------------------

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f)
      : ch_(channels), momentum_(momentum), eps_(eps),
        gamma_({channels}), beta_({channels}), run_mean_({channels}), run_var_({channels}),
        d_gamma_({channels}), d_beta_({channels}) {
    gamma_.fill(1.0f);
    run_var_.fill(1.0f);
  }

  const char* kind() const override { return "batchnorm"; }

  TensorPtr forward(const TensorPtr& x, Mode mode, bool record) override {
    check(x->rank() == 4 && x->dim(1) == ch_, ErrorKind::kShapeMismatch,
          "batchnorm expects NCHW input with " + std::to_string(ch_) + " channels");
    const int n_batch = x->dim(0), h = x->dim(2), w = x->dim(3);
    const int64_t plane = static_cast<int64_t>(h) * w;
    const int64_t m = static_cast<int64_t>(n_batch) * plane;
    auto out = make_tensor(x->shape);

    std::vector<float> mean(static_cast<size_t>(ch_)), istd(static_cast<size_t>(ch_));
    if (mode == Mode::kTrain) {
      check(m > 0, ErrorKind::kShapeMismatch, "batchnorm train mode on empty batch");
#pragma omp parallel for schedule(static)
      for (int c = 0; c < ch_; ++c) {
        double s = 0.0;
        for (int n = 0; n < n_batch; ++n) {
          const float* p = x->ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
          for (int64_t i = 0; i < plane; ++i) s += p[i];
        }
        const double mu = s / static_cast<double>(m);
        double sq = 0.0;
        for (int n = 0; n < n_batch; ++n) {
          const float* p = x->ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            const double d = p[i] - mu;
            sq += d * d;
          }
        }
        const double var = sq / static_cast<double>(m);
        mean[static_cast<size_t>(c)] = static_cast<float>(mu);
        istd[static_cast<size_t>(c)] = static_cast<float>(1.0 / std::sqrt(var + eps_));
        run_mean_.data[static_cast<size_t>(c)] =
            (1.0f - momentum_) * run_mean_.data[static_cast<size_t>(c)] +
            momentum_ * static_cast<float>(mu);
        run_var_.data[static_cast<size_t>(c)] =
            (1.0f - momentum_) * run_var_.data[static_cast<size_t>(c)] +
            momentum_ * static_cast<float>(var);
      }
    } else {
      for (int c = 0; c < ch_; ++c) {
        mean[static_cast<size_t>(c)] = run_mean_.data[static_cast<size_t>(c)];
        istd[static_cast<size_t>(c)] =
            1.0f / std::sqrt(run_var_.data[static_cast<size_t>(c)] + eps_);
      }
    }

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < n_batch; ++n) {
      for (int c = 0; c < ch_; ++c) {
        const float mu = mean[static_cast<size_t>(c)];
        const float is = istd[static_cast<size_t>(c)];
        const float g = gamma_.data[static_cast<size_t>(c)];
        const float b = beta_.data[static_cast<size_t>(c)];
        const float* p = x->ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
        float* q = out->ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
        for (int64_t i = 0; i < plane; ++i) q[i] = g * (p[i] - mu) * is + b;
      }
    }

    if (record) {
      x_ = x;
      mean_ = std::move(mean);
      istd_ = std::move(istd);
      recorded_mode_ = mode;
    }
    return out;
  }

  Tensor backward(const Tensor& dy) override {
    if (!x_) not_recorded(kind());
    const Tensor& x = *x_;
    check_same_shape(dy, x, "batchnorm backward");
    const int n_batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t plane = static_cast<int64_t>(h) * w;
    const int64_t m = static_cast<int64_t>(n_batch) * plane;
    Tensor dx(x.shape);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < ch_; ++c) {
      const float mu = mean_[static_cast<size_t>(c)];
      const float is = istd_[static_cast<size_t>(c)];
      const float g = gamma_.data[static_cast<size_t>(c)];
      double s_dy = 0.0, s_dy_xhat = 0.0;
      for (int n = 0; n < n_batch; ++n) {
        const float* xr = x.ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
        const float* dr = dy.ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          s_dy += dr[i];
          s_dy_xhat += static_cast<double>(dr[i]) * ((xr[i] - mu) * is);
        }
      }
      d_beta_.data[static_cast<size_t>(c)] += static_cast<float>(s_dy);
      d_gamma_.data[static_cast<size_t>(c)] += static_cast<float>(s_dy_xhat);

      if (recorded_mode_ == Mode::kTrain) {
        const float k1 = static_cast<float>(s_dy / static_cast<double>(m));
        const float k2 = static_cast<float>(s_dy_xhat / static_cast<double>(m));
        for (int n = 0; n < n_batch; ++n) {
          const float* xr = x.ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
          const float* dr = dy.ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
          float* dxr = dx.ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            const float xhat = (xr[i] - mu) * is;
            dxr[i] = g * is * (dr[i] - k1 - xhat * k2);
          }
        }
      } else {
        // Eval mode is a per-channel affine map.
        for (int n = 0; n < n_batch; ++n) {
          const float* dr = dy.ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
          float* dxr = dx.ptr() + (static_cast<int64_t>(n) * ch_ + c) * plane;
          for (int64_t i = 0; i < plane; ++i) dxr[i] = g * is * dr[i];
        }
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".gamma", &gamma_, &d_gamma_});
    out.push_back({prefix + ".beta", &beta_, &d_beta_});
  }
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override {
    out.push_back({prefix + ".running_mean", &run_mean_});
    out.push_back({prefix + ".running_var", &run_var_});
  }
  void zero_grad() override {
    d_gamma_.fill(0.0f);
    d_beta_.fill(0.0f);
  }
  void clear_recorded() override {
    x_.reset();
    mean_.clear();
    istd_.clear();
  }

  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  Tensor& running_mean() { return run_mean_; }
  Tensor& running_var() { return run_var_; }
  float eps() const { return eps_; }

 private:
  int ch_;
  float momentum_, eps_;
  Tensor gamma_, beta_, run_mean_, run_var_, d_gamma_, d_beta_;
  TensorPtr x_;
  std::vector<float> mean_, istd_;
  Mode recorded_mode_ = Mode::kTrain;
};

// ---------------------------------------------------------------------------
// Elementwise activations.
// ---------------------------------------------------------------------------

class ReLU : public Layer {
 public:
  const char* kind() const override { return "relu"; }

  TensorPtr forward(const TensorPtr& x, Mode, bool record) override {
    auto out = make_tensor(x->shape);
    const float* p = x->ptr();
    float* q = out->ptr();
    const int64_t n = x->numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) q[i] = p[i] > 0.0f ? p[i] : 0.0f;
    if (record) y_ = out;
    return out;
  }

  Tensor backward(const Tensor& dy) override {
    if (!y_) not_recorded(kind());
    check_same_shape(dy, *y_, "relu backward");
    Tensor dx(dy.shape);
    const float* y = y_->ptr();
    const float* d = dy.ptr();
    float* o = dx.ptr();
    const int64_t n = dy.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) o[i] = y[i] > 0.0f ? d[i] : 0.0f;
    return dx;
  }

  void clear_recorded() override { y_.reset(); }

 private:
  TensorPtr y_;
};

class Sigmoid : public Layer {
 public:
  const char* kind() const override { return "sigmoid"; }

  TensorPtr forward(const TensorPtr& x, Mode, bool record) override {
    auto out = make_tensor(x->shape);
    const float* p = x->ptr();
    float* q = out->ptr();
    const int64_t n = x->numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) q[i] = 1.0f / (1.0f + std::exp(-p[i]));
    if (record) y_ = out;
    return out;
  }

  Tensor backward(const Tensor& dy) override {
    if (!y_) not_recorded(kind());
    check_same_shape(dy, *y_, "sigmoid backward");
    Tensor dx(dy.shape);
    const float* y = y_->ptr();
    const float* d = dy.ptr();
    float* o = dx.ptr();
    const int64_t n = dy.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) o[i] = d[i] * y[i] * (1.0f - y[i]);
    return dx;
  }

  void clear_recorded() override { y_.reset(); }

 private:
  TensorPtr y_;
};

// ---------------------------------------------------------------------------
// Pool2d: square window, ragged edges truncated (output dim (H - size)/stride + 1).
// ---------------------------------------------------------------------------

enum class PoolKind { kMax, kAvg };

class Pool2d : public Layer {
 public:
  Pool2d(PoolKind pool_kind, int size, int stride)
      : kind_(pool_kind), size_(size), stride_(stride) {
    check(size > 0 && stride > 0, ErrorKind::kInvalidConfig, "bad pool geometry");
  }

  const char* kind() const override { return kind_ == PoolKind::kMax ? "maxpool" : "avgpool"; }

  std::vector<int> output_shape(const std::vector<int>& in) const {
    check(in.size() == 4, ErrorKind::kShapeMismatch, "pool2d expects NCHW input");
    check(in[2] >= size_ && in[3] >= size_, ErrorKind::kShapeMismatch,
          "pool window larger than input");
    return {in[0], in[1], (in[2] - size_) / stride_ + 1, (in[3] - size_) / stride_ + 1};
  }

  TensorPtr forward(const TensorPtr& x, Mode, bool record) override {
    auto out = make_tensor(output_shape(x->shape));
    const int n_batch = x->dim(0), ch = x->dim(1), h = x->dim(2), w = x->dim(3);
    const int ho = out->dim(2), wo = out->dim(3);
    const int64_t in_plane = static_cast<int64_t>(h) * w;
    const int64_t out_plane = static_cast<int64_t>(ho) * wo;
    std::vector<int32_t> argmax;
    if (kind_ == PoolKind::kMax && record)
      argmax.resize(static_cast<size_t>(out->numel()));

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < n_batch; ++n) {
      for (int c = 0; c < ch; ++c) {
        const float* ip = x->ptr() + (static_cast<int64_t>(n) * ch + c) * in_plane;
        float* op = out->ptr() + (static_cast<int64_t>(n) * ch + c) * out_plane;
        int32_t* am = argmax.empty()
                          ? nullptr
                          : argmax.data() + (static_cast<int64_t>(n) * ch + c) * out_plane;
        for (int yo = 0; yo < ho; ++yo) {
          for (int xo = 0; xo < wo; ++xo) {
            const int y0 = yo * stride_, x0 = xo * stride_;
            if (kind_ == PoolKind::kMax) {
              float best = ip[static_cast<int64_t>(y0) * w + x0];
              int32_t best_idx = static_cast<int32_t>(y0 * w + x0);
              for (int dy = 0; dy < size_; ++dy) {
                for (int dx_ = 0; dx_ < size_; ++dx_) {
                  const float v = ip[static_cast<int64_t>(y0 + dy) * w + (x0 + dx_)];
                  if (v > best) {
                    best = v;
                    best_idx = static_cast<int32_t>((y0 + dy) * w + (x0 + dx_));
                  }
                }
              }
              op[static_cast<int64_t>(yo) * wo + xo] = best;
              if (am) am[static_cast<int64_t>(yo) * wo + xo] = best_idx;
            } else {
              double acc = 0.0;
              for (int dy = 0; dy < size_; ++dy) {
                for (int dx_ = 0; dx_ < size_; ++dx_) {
                  acc += ip[static_cast<int64_t>(y0 + dy) * w + (x0 + dx_)];
                }
              }
              op[static_cast<int64_t>(yo) * wo + xo] =
                  static_cast<float>(acc / (static_cast<double>(size_) * size_));
            }
          }
        }
      }
    }

    if (record) {
      in_shape_ = x->shape;
      out_shape_ = out->shape;
      argmax_ = std::move(argmax);
      recorded_ = true;
    }
    return out;
  }

  Tensor backward(const Tensor& dy) override {
    if (!recorded_) not_recorded(kind());
    check(dy.shape == out_shape_, ErrorKind::kShapeMismatch, "pool backward shape mismatch");
    Tensor dx(in_shape_);
    const int n_batch = in_shape_[0], ch = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    const int ho = out_shape_[2], wo = out_shape_[3];
    const int64_t in_plane = static_cast<int64_t>(h) * w;
    const int64_t out_plane = static_cast<int64_t>(ho) * wo;
    const float inv_area = 1.0f / (static_cast<float>(size_) * size_);

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < n_batch; ++n) {
      for (int c = 0; c < ch; ++c) {
        const float* dop = dy.ptr() + (static_cast<int64_t>(n) * ch + c) * out_plane;
        float* dip = dx.ptr() + (static_cast<int64_t>(n) * ch + c) * in_plane;
        if (kind_ == PoolKind::kMax) {
          const int32_t* am = argmax_.data() + (static_cast<int64_t>(n) * ch + c) * out_plane;
          for (int64_t i = 0; i < out_plane; ++i) dip[am[i]] += dop[i];
        } else {
          for (int yo = 0; yo < ho; ++yo) {
            for (int xo = 0; xo < wo; ++xo) {
              const float g = dop[static_cast<int64_t>(yo) * wo + xo] * inv_area;
              for (int dy_ = 0; dy_ < size_; ++dy_) {
                for (int dx_ = 0; dx_ < size_; ++dx_) {
                  dip[static_cast<int64_t>(yo * stride_ + dy_) * w + (xo * stride_ + dx_)] += g;
                }
              }
            }
          }
        }
      }
    }
    return dx;
  }

  void clear_recorded() override {
    recorded_ = false;
    argmax_.clear();
  }

  PoolKind pool_kind() const { return kind_; }
  int size() const { return size_; }
  int stride() const { return stride_; }

 private:
  PoolKind kind_;
  int size_, stride_;
  std::vector<int> in_shape_, out_shape_;
  std::vector<int32_t> argmax_;
  bool recorded_ = false;
};

// ---------------------------------------------------------------------------
// Pooling over the segment axis: [N, C, K, 1] -> [N, C].
// ---------------------------------------------------------------------------

class GlobalPool : public Layer {
 public:
  explicit GlobalPool(PoolKind pool_kind = PoolKind::kAvg) : kind_(pool_kind) {}

  const char* kind() const override {
    return kind_ == PoolKind::kAvg ? "global_avg_pool" : "global_max_pool";
  }

  TensorPtr forward(const TensorPtr& x, Mode, bool record) override {
    check(x->rank() == 4 && x->dim(3) == 1, ErrorKind::kShapeMismatch,
          "global pool expects [N,C,K,1], got " + x->shape_str());
    const int n_batch = x->dim(0), ch = x->dim(1), k = x->dim(2);
    check(k >= 1, ErrorKind::kShapeMismatch, "global pool needs K >= 1");
    auto out = make_tensor({n_batch, ch});
    std::vector<int32_t> argmax;
    if (kind_ == PoolKind::kMax && record) argmax.resize(static_cast<size_t>(out->numel()));

    for (int n = 0; n < n_batch; ++n) {
      for (int c = 0; c < ch; ++c) {
        const float* p = x->ptr() + (static_cast<int64_t>(n) * ch + c) * k;
        if (kind_ == PoolKind::kAvg) {
          double acc = 0.0;
          for (int i = 0; i < k; ++i) acc += p[i];
          out->at2(n, c) = static_cast<float>(acc / k);
        } else {
          int best = 0;
          for (int i = 1; i < k; ++i) {
            if (p[i] > p[best]) best = i;
          }
          out->at2(n, c) = p[best];
          if (!argmax.empty()) argmax[static_cast<size_t>(n) * ch + c] = best;
        }
      }
    }
    if (record) {
      in_shape_ = x->shape;
      argmax_ = std::move(argmax);
      recorded_ = true;
    }
    return out;
  }

  Tensor backward(const Tensor& dy) override {
    if (!recorded_) not_recorded(kind());
    const int n_batch = in_shape_[0], ch = in_shape_[1], k = in_shape_[2];
    check(dy.shape == std::vector<int>({n_batch, ch}), ErrorKind::kShapeMismatch,
          "global pool backward shape mismatch");
    Tensor dx(in_shape_);
    for (int n = 0; n < n_batch; ++n) {
      for (int c = 0; c < ch; ++c) {
        float* q = dx.ptr() + (static_cast<int64_t>(n) * ch + c) * k;
        const float g = dy.at2(n, c);
        if (kind_ == PoolKind::kAvg) {
          const float share = g / static_cast<float>(k);
          for (int i = 0; i < k; ++i) q[i] = share;
        } else {
          q[argmax_[static_cast<size_t>(n) * ch + c]] = g;
        }
      }
    }
    return dx;
  }

  void clear_recorded() override {
    recorded_ = false;
    argmax_.clear();
  }

  PoolKind pool_kind() const { return kind_; }

 private:
  PoolKind kind_;
  std::vector<int> in_shape_;
  std::vector<int32_t> argmax_;
  bool recorded_ = false;
};

/// Functional form of the segment-axis mean pool.
inline Tensor global_avg_pool(const Tensor& x) {
  GlobalPool pool(PoolKind::kAvg);
  auto in = std::make_shared<Tensor>(x);
  return *pool.forward(in, Mode::kEval, false);
}

// ---------------------------------------------------------------------------
// Net: a named layer sequence with a fixed-order backward pass.
// ---------------------------------------------------------------------------

class Net {
 public:
  Layer* add(const std::string& name, LayerPtr layer) {
    layers_.emplace_back(name, std::move(layer));
    return layers_.back().second.get();
  }

  TensorPtr forward(TensorPtr x, Mode mode, bool record) {
    for (auto& [name, layer] : layers_) x = layer->forward(x, mode, record);
    return x;
  }

  Tensor backward(Tensor dy) {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) dy = it->second->backward(dy);
    return dy;
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (auto& [name, layer] : layers_) layer->collect_params(name, out);
    return out;
  }
  std::vector<BufferRef> buffers() {
    std::vector<BufferRef> out;
    for (auto& [name, layer] : layers_) layer->collect_buffers(name, out);
    return out;
  }
  void zero_grad() {
    for (auto& [name, layer] : layers_) layer->zero_grad();
  }
  void clear_recorded() {
    for (auto& [name, layer] : layers_) layer->clear_recorded();
  }

  size_t size() const { return layers_.size(); }
  Layer* layer(size_t i) { return layers_[i].second.get(); }
  const std::string& layer_name(size_t i) const { return layers_[i].first; }

 private:
  std::vector<std::pair<std::string, LayerPtr>> layers_;
};

}  // namespace secost
