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
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "secost/error.hpp"

namespace secost {

/// Keeps large activation buffers on the heap free list instead of letting
/// glibc mmap/munmap them per allocation; layer outputs are tens of megabytes
/// and re-faulting them every forward pass dominates the arithmetic.
/// Idempotent; called by the training and inference entry points.
inline void tune_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
#endif
}

/// Dense row-major float32 array with shape metadata. The carrier for all
/// network computation; reductions that need extra precision accumulate in
/// double internally.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
  }
  Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    check(static_cast<int64_t>(data.size()) == numel_of(shape), ErrorKind::kShapeMismatch,
          "tensor data size does not match shape");
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      check(d >= 0, ErrorKind::kShapeMismatch, "negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<int> s, float value) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  // 4-d offset helper for NCHW kernels.
  int64_t offset4(int n, int c, int h, int w) const {
    return ((static_cast<int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w;
  }
  float& at4(int n, int c, int h, int w) { return data[static_cast<size_t>(offset4(n, c, h, w))]; }
  float at4(int n, int c, int h, int w) const {
    return data[static_cast<size_t>(offset4(n, c, h, w))];
  }

  float& at2(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  float at2(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }

  void fill(float v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (float v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ",";
      os << shape[i];
    }
    os << "]";
    return os.str();
  }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::vector<int> shape) {
  return std::make_shared<Tensor>(std::move(shape));
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  check(a.shape == b.shape, ErrorKind::kShapeMismatch,
        std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
}

inline void check_finite(const Tensor& t, const char* what) {
  check(t.all_finite(), ErrorKind::kShapeMismatch,
        std::string("non-finite values in ") + what);
}

}  // namespace secost
