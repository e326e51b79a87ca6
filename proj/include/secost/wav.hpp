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
#include <string>
#include <vector>

#include "secost/error.hpp"
#include "secost/io.hpp"

namespace secost {

/// Mono waveform in [-1, 1].
struct SampleBuffer {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

namespace wav_detail {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

struct FmtChunk {
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t bits_per_sample = 0;
};

}  // namespace wav_detail

/// Decodes a RIFF/WAVE byte stream. Supported encodings: PCM 16-bit integer
/// and IEEE float 32-bit. Multi-channel input is averaged to mono; PCM16
/// samples are scaled by 1/32768.
inline SampleBuffer decode_wav(const std::vector<uint8_t>& bytes) {
  using namespace wav_detail;
  ByteReader r(bytes);
  try {
    if (r.remaining() < 12) throw_error(ErrorKind::kMalformedHeader, "file shorter than RIFF header");
    if (r.u32() != 0x46464952u)  // "RIFF"
      throw_error(ErrorKind::kMalformedHeader, "missing RIFF tag");
    r.u32();                     // declared size; not trusted
    if (r.u32() != 0x45564157u)  // "WAVE"
      throw_error(ErrorKind::kMalformedHeader, "missing WAVE tag");

    FmtChunk fmt;
    bool have_fmt = false;
    while (r.remaining() >= 8) {
      uint32_t id = r.u32();
      uint32_t size = r.u32();
      if (id == 0x20746d66u) {  // "fmt "
        if (size < 16 || r.remaining() < size)
          throw_error(ErrorKind::kMalformedHeader, "bad fmt chunk");
        size_t start = r.pos();
        fmt.format = r.u16();
        fmt.channels = r.u16();
        fmt.sample_rate = r.u32();
        r.u32();  // byte rate
        r.u16();  // block align
        fmt.bits_per_sample = r.u16();
        r.skip(size - (r.pos() - start));
        have_fmt = true;
      } else if (id == 0x61746164u) {  // "data"
        if (!have_fmt) throw_error(ErrorKind::kMalformedHeader, "data chunk before fmt chunk");
        if (r.remaining() < size)
          throw_error(ErrorKind::kMalformedHeader, "data chunk truncated");
        if (fmt.channels == 0 || fmt.sample_rate == 0)
          throw_error(ErrorKind::kMalformedHeader, "fmt chunk has zero channels or rate");

        const bool pcm16 = fmt.format == kFormatPcm && fmt.bits_per_sample == 16;
        const bool f32 = fmt.format == kFormatFloat && fmt.bits_per_sample == 32;
        if (!pcm16 && !f32)
          throw_error(ErrorKind::kUnsupportedEncoding,
                      "format " + std::to_string(fmt.format) + " / " +
                          std::to_string(fmt.bits_per_sample) + " bits (PCM16 or float32 only)");

        const uint32_t bytes_per_sample = fmt.bits_per_sample / 8;
        const uint32_t frame_bytes = bytes_per_sample * fmt.channels;
        if (size % frame_bytes != 0)
          throw_error(ErrorKind::kMalformedHeader, "data size not a multiple of frame size");
        const uint32_t n_frames = size / frame_bytes;

        SampleBuffer out;
        out.sample_rate = static_cast<int>(fmt.sample_rate);
        out.samples.resize(n_frames);
        const float inv_ch = 1.0f / static_cast<float>(fmt.channels);
        for (uint32_t i = 0; i < n_frames; ++i) {
          float acc = 0.0f;
          for (uint16_t c = 0; c < fmt.channels; ++c) {
            acc += pcm16 ? static_cast<float>(r.i16()) * (1.0f / 32768.0f) : r.f32();
          }
          out.samples[i] = acc * inv_ch;
        }
        return out;
      } else {
        if (r.remaining() < size)
          throw_error(ErrorKind::kMalformedHeader, "chunk extends past end of file");
        r.skip(size + (size & 1));  // chunks are word-aligned
      }
    }
    throw_error(ErrorKind::kMalformedHeader, "no data chunk");
  } catch (const Error&) {
    throw;
  }
}

inline SampleBuffer decode_wav_file(const std::filesystem::path& path) {
  return decode_wav(read_file(path));
}

/// Serializes a mono buffer as 16-bit PCM.
inline std::vector<uint8_t> encode_wav_pcm16(const SampleBuffer& buf) {
  ByteWriter w;
  const uint32_t n = static_cast<uint32_t>(buf.samples.size());
  const uint32_t data_bytes = n * 2;
  w.u32(0x46464952u);  // "RIFF"
  w.u32(36 + data_bytes);
  w.u32(0x45564157u);  // "WAVE"
  w.u32(0x20746d66u);  // "fmt "
  w.u32(16);
  w.u16(wav_detail::kFormatPcm);
  w.u16(1);  // mono
  w.u32(static_cast<uint32_t>(buf.sample_rate));
  w.u32(static_cast<uint32_t>(buf.sample_rate) * 2);
  w.u16(2);
  w.u16(16);
  w.u32(0x61746164u);  // "data"
  w.u32(data_bytes);
  for (uint32_t i = 0; i < n; ++i) {
    float v = std::clamp(buf.samples[i], -1.0f, 1.0f);
    int s = static_cast<int>(std::lrintf(v * 32767.0f));
    w.i16(static_cast<int16_t>(std::clamp(s, -32768, 32767)));
  }
  return w.take();
}

inline void write_wav_pcm16(const std::filesystem::path& path, const SampleBuffer& buf) {
  write_file_atomic(path, encode_wav_pcm16(buf));
}

/// Linear-interpolation resample. Output length is round(len * target/source);
/// sample i is read at source position i * source/target with edge clamping.
/// Equal rates return the input unchanged.
inline SampleBuffer resample(const SampleBuffer& buf, int target_rate) {
  check(target_rate > 0, ErrorKind::kInvalidConfig, "target sample rate must be positive");
  if (buf.sample_rate == target_rate || buf.samples.empty()) {
    SampleBuffer out = buf;
    out.sample_rate = target_rate;
    return out;
  }
  const size_t in_len = buf.samples.size();
  const double ratio = static_cast<double>(target_rate) / buf.sample_rate;
  const size_t out_len = static_cast<size_t>(std::llround(static_cast<double>(in_len) * ratio));

  SampleBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const double step = static_cast<double>(buf.sample_rate) / target_rate;
  for (size_t i = 0; i < out_len; ++i) {
    double pos = static_cast<double>(i) * step;
    size_t i0 = static_cast<size_t>(pos);
    if (i0 >= in_len - 1) {
      out.samples[i] = buf.samples[in_len - 1];
      continue;
    }
    float frac = static_cast<float>(pos - static_cast<double>(i0));
    out.samples[i] = buf.samples[i0] + frac * (buf.samples[i0 + 1] - buf.samples[i0]);
  }
  return out;
}

}  // namespace secost
