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
#include <vector>

#include "secost/error.hpp"
#include "secost/io.hpp"
#include "secost/wav.hpp"

namespace secost {

/// Frames-by-mels matrix of log filterbank energies; the network input.
struct LogMelSpec {
  std::vector<float> values;  // row-major, frames x n_mels
  int frames = 0;
  int n_mels = 0;
  double frame_rate = 0.0;  // frames per second

  float at(int frame, int mel) const {
    return values[static_cast<size_t>(frame) * n_mels + mel];
  }
  float* row(int frame) { return values.data() + static_cast<size_t>(frame) * n_mels; }
  const float* row(int frame) const {
    return values.data() + static_cast<size_t>(frame) * n_mels;
  }
};

struct LogMelConfig {
  int sample_rate = 16000;  // required input rate
  int n_mels = 64;
  double win_ms = 16.0;
  double hop_ms = 10.0;
  float log_floor_eps = 1e-10f;

  int win_samples() const {
    return static_cast<int>(std::lround(sample_rate * win_ms / 1000.0));
  }
  int hop_samples() const {
    return static_cast<int>(std::lround(sample_rate * hop_ms / 1000.0));
  }
};

inline int logmel_frame_count(int64_t n_samples, int win, int hop) {
  if (n_samples < win) return 0;
  return static_cast<int>((n_samples - win) / hop) + 1;
}

namespace dsp_detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Integral of the unit triangle (rise f_lo->f_c, fall f_c->f_hi) over [a, b].
inline double triangle_integral(double f_lo, double f_c, double f_hi, double a, double b) {
  auto seg = [](double x0, double v0, double x1, double v1, double lo, double hi) {
    lo = std::max(lo, x0);
    hi = std::min(hi, x1);
    if (hi <= lo || x1 <= x0) return 0.0;
    double t_lo = v0 + (v1 - v0) * (lo - x0) / (x1 - x0);
    double t_hi = v0 + (v1 - v0) * (hi - x0) / (x1 - x0);
    return 0.5 * (t_lo + t_hi) * (hi - lo);
  };
  return seg(f_lo, 0.0, f_c, 1.0, a, b) + seg(f_c, 1.0, f_hi, 0.0, a, b);
}

struct MelFilter {
  int first_bin = 0;
  std::vector<float> weights;  // contiguous non-zero span
  double center_hz = 0.0;
};

// Triangular filters equally spaced on the HTK mel scale from 0 Hz to
// Nyquist. Each weight is the mean of the triangle over the DFT bin's
// frequency band; with 64 filters against 62.5 Hz bins, point sampling
// would leave the lowest filter with no bins at all.
inline std::vector<MelFilter> build_mel_filters(int n_mels, int n_bins, int sample_rate,
                                                int dft_size) {
  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[static_cast<size_t>(i)] = mel_to_hz(mel_max * i / (n_mels + 1));
  }
  const double bin_hz = static_cast<double>(sample_rate) / dft_size;

  std::vector<MelFilter> filters(static_cast<size_t>(n_mels));
  for (int m = 0; m < n_mels; ++m) {
    const double f_lo = edges[static_cast<size_t>(m)];
    const double f_c = edges[static_cast<size_t>(m) + 1];
    const double f_hi = edges[static_cast<size_t>(m) + 2];
    MelFilter& f = filters[static_cast<size_t>(m)];
    f.center_hz = f_c;
    int first = -1, last = -1;
    std::vector<float> w(static_cast<size_t>(n_bins), 0.0f);
    for (int k = 0; k < n_bins; ++k) {
      double band_lo = std::max(0.0, (k - 0.5) * bin_hz);
      double band_hi = std::min(nyquist, (k + 0.5) * bin_hz);
      double v = triangle_integral(f_lo, f_c, f_hi, band_lo, band_hi) / bin_hz;
      if (v > 0.0) {
        w[static_cast<size_t>(k)] = static_cast<float>(v);
        if (first < 0) first = k;
        last = k;
      }
    }
    if (first < 0) {
      f.first_bin = 0;
    } else {
      f.first_bin = first;
      f.weights.assign(w.begin() + first, w.begin() + last + 1);
    }
  }
  return filters;
}

// Iterative radix-2 complex FFT over interleaved (re, im) pairs.
struct FftPlan {
  int n = 0;
  std::vector<int> bitrev;
  std::vector<float> twiddle;  // (cos, -sin) per stage, packed

  explicit FftPlan(int size) : n(size) {
    check((n & (n - 1)) == 0 && n > 0, ErrorKind::kInvalidConfig,
          "FFT size must be a power of two");
    bitrev.resize(static_cast<size_t>(n));
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < log2n; ++b) r |= ((i >> b) & 1) << (log2n - 1 - b);
      bitrev[static_cast<size_t>(i)] = r;
    }
    for (int len = 2; len <= n; len <<= 1) {
      for (int j = 0; j < len / 2; ++j) {
        double ang = -2.0 * 3.14159265358979323846 * j / len;
        twiddle.push_back(static_cast<float>(std::cos(ang)));
        twiddle.push_back(static_cast<float>(std::sin(ang)));
      }
    }
  }

  // io: n interleaved complex values, transformed in place.
  void run(float* io) const {
    for (int i = 0; i < n; ++i) {
      int j = bitrev[static_cast<size_t>(i)];
      if (j > i) {
        std::swap(io[2 * i], io[2 * j]);
        std::swap(io[2 * i + 1], io[2 * j + 1]);
      }
    }
    size_t tw = 0;
    for (int len = 2; len <= n; len <<= 1) {
      const int half = len / 2;
      for (int start = 0; start < n; start += len) {
        for (int j = 0; j < half; ++j) {
          const float wr = twiddle[tw + 2 * static_cast<size_t>(j)];
          const float wi = twiddle[tw + 2 * static_cast<size_t>(j) + 1];
          float* a = io + 2 * (start + j);
          float* b = io + 2 * (start + j + half);
          const float br = b[0] * wr - b[1] * wi;
          const float bi = b[0] * wi + b[1] * wr;
          b[0] = a[0] - br;
          b[1] = a[1] - bi;
          a[0] += br;
          a[1] += bi;
        }
      }
      tw += 2 * static_cast<size_t>(half);
    }
  }
};

}  // namespace dsp_detail

/// Precomputed window, FFT plan and filterbank for one configuration.
/// Immutable after construction; apply() is safe to call concurrently.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(const LogMelConfig& cfg = {})
      : cfg_(cfg),
        win_(cfg.win_samples()),
        hop_(cfg.hop_samples()),
        n_bins_(cfg.win_samples() / 2 + 1),
        fft_(cfg.win_samples()),
        filters_(dsp_detail::build_mel_filters(cfg.n_mels, n_bins_, cfg.sample_rate, win_)) {
    check(win_ > 0 && hop_ > 0, ErrorKind::kInvalidConfig, "window and hop must be positive");
    // Periodic Hann.
    window_.resize(static_cast<size_t>(win_));
    for (int i = 0; i < win_; ++i) {
      window_[static_cast<size_t>(i)] =
          0.5f - 0.5f * static_cast<float>(std::cos(2.0 * 3.14159265358979323846 * i / win_));
    }
  }

  const LogMelConfig& config() const { return cfg_; }
  int n_bins() const { return n_bins_; }
  const std::vector<dsp_detail::MelFilter>& filters() const { return filters_; }

  LogMelSpec apply(const SampleBuffer& buf) const {
    check(buf.sample_rate == cfg_.sample_rate, ErrorKind::kWrongSampleRate,
          "expected " + std::to_string(cfg_.sample_rate) + " Hz, got " +
              std::to_string(buf.sample_rate));
    const int64_t n = static_cast<int64_t>(buf.samples.size());
    check(n >= win_, ErrorKind::kTooShort,
          "need at least " + std::to_string(win_) + " samples, got " + std::to_string(n));

    const int frames = logmel_frame_count(n, win_, hop_);
    LogMelSpec spec;
    spec.frames = frames;
    spec.n_mels = cfg_.n_mels;
    spec.frame_rate = 1000.0 / cfg_.hop_ms;
    spec.values.resize(static_cast<size_t>(frames) * cfg_.n_mels);

    std::vector<float> fft_buf(2 * static_cast<size_t>(win_));
    std::vector<float> power(static_cast<size_t>(n_bins_));
    for (int t = 0; t < frames; ++t) {
      const float* x = buf.samples.data() + static_cast<int64_t>(t) * hop_;
      for (int i = 0; i < win_; ++i) {
        fft_buf[2 * static_cast<size_t>(i)] = x[i] * window_[static_cast<size_t>(i)];
        fft_buf[2 * static_cast<size_t>(i) + 1] = 0.0f;
      }
      fft_.run(fft_buf.data());
      for (int k = 0; k < n_bins_; ++k) {
        const float re = fft_buf[2 * static_cast<size_t>(k)];
        const float im = fft_buf[2 * static_cast<size_t>(k) + 1];
        power[static_cast<size_t>(k)] = re * re + im * im;
      }
      float* out = spec.row(t);
      for (int m = 0; m < cfg_.n_mels; ++m) {
        const auto& f = filters_[static_cast<size_t>(m)];
        double acc = 0.0;
        const float* p = power.data() + f.first_bin;
        for (size_t k = 0; k < f.weights.size(); ++k) acc += static_cast<double>(f.weights[k]) * p[k];
        out[m] = std::log(static_cast<float>(acc) + cfg_.log_floor_eps);
      }
    }
    return spec;
  }

 private:
  LogMelConfig cfg_;
  int win_;
  int hop_;
  int n_bins_;
  dsp_detail::FftPlan fft_;
  std::vector<dsp_detail::MelFilter> filters_;
  std::vector<float> window_;
};

/// One-shot convenience wrapper around LogMelExtractor.
inline LogMelSpec logmel(const SampleBuffer& buf, int n_mels = 64, double win_ms = 16.0,
                         double hop_ms = 10.0) {
  LogMelConfig cfg;
  cfg.n_mels = n_mels;
  cfg.win_ms = win_ms;
  cfg.hop_ms = hop_ms;
  return LogMelExtractor(cfg).apply(buf);
}

// ---------------------------------------------------------------------------
// Feature file format: magic "LMEL", u32 version=1, u32 frames, u32 n_mels,
// then frames*n_mels little-endian float32, row-major by frame.
// ---------------------------------------------------------------------------

inline constexpr uint32_t kLmelMagic = 0x4c454d4cu;  // "LMEL"
inline constexpr uint32_t kLmelVersion = 1;

inline void write_lmel(const std::filesystem::path& path, const LogMelSpec& spec) {
  ByteWriter w;
  w.u32(kLmelMagic);
  w.u32(kLmelVersion);
  w.u32(static_cast<uint32_t>(spec.frames));
  w.u32(static_cast<uint32_t>(spec.n_mels));
  w.f32_array(spec.values.data(), spec.values.size());
  write_file_atomic(path, w.bytes());
}

inline LogMelSpec read_lmel(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  ByteReader r(bytes);
  if (r.remaining() < 16 || r.u32() != kLmelMagic)
    throw_error(ErrorKind::kVersionMismatch, "not an LMEL file: " + path.string());
  uint32_t version = r.u32();
  if (version != kLmelVersion)
    throw_error(ErrorKind::kVersionMismatch,
                "LMEL version " + std::to_string(version) + " unsupported");
  LogMelSpec spec;
  spec.frames = static_cast<int>(r.u32());
  spec.n_mels = static_cast<int>(r.u32());
  check(spec.frames >= 0 && spec.n_mels > 0, ErrorKind::kIoError, "bad LMEL dimensions");
  const size_t n = static_cast<size_t>(spec.frames) * static_cast<size_t>(spec.n_mels);
  if (r.remaining() < n * 4)
    throw_error(ErrorKind::kIoError, "LMEL payload truncated: " + path.string());
  spec.values.resize(n);
  r.f32_array(spec.values.data(), n);
  spec.frame_rate = 100.0;
  return spec;
}

}  // namespace secost
