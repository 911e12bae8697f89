// Copyright 2026 The auscqa Authors.
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

#include "auscqa/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "auscqa/error.hpp"

namespace auscqa {
namespace {

constexpr int kTapsPerPhase = 64;
constexpr double kKaiserBeta = 8.6;
constexpr double kRolloff = 0.95;

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

// Per-phase filter taps for upsample-by-up / downsample-by-down. Tap k of
// phase p sits at input offset (k - half + 1) relative to floor(t), where the
// fractional position is p / up.
std::vector<double> design_polyphase(std::int64_t up, std::int64_t down) {
  const int half = kTapsPerPhase / 2;
  const double cutoff = kRolloff * std::min(1.0, static_cast<double>(up) /
                                                     static_cast<double>(down));
  const double i0_beta = bessel_i0(kKaiserBeta);
  std::vector<double> table(static_cast<std::size_t>(up) * kTapsPerPhase);
  for (std::int64_t p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    double norm = 0.0;
    double* row = table.data() + p * kTapsPerPhase;
    for (int k = 0; k < kTapsPerPhase; ++k) {
      const double t = static_cast<double>(k - half + 1) - frac;
      const double r = t / static_cast<double>(half);
      const double win =
          std::abs(r) >= 1.0 ? 0.0 : bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
      row[k] = cutoff * sinc(cutoff * t) * win;
      norm += row[k];
    }
    for (int k = 0; k < kTapsPerPhase; ++k) row[k] /= norm;
  }
  return table;
}

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorKind::kData, path + ": truncated clip file");
  return v;
}

}  // namespace

RawRecording to_mono(const RawRecording& rec) {
  if (rec.channels.empty()) fail(ErrorKind::kData, rec.source_path + ": no channels");
  RawRecording out;
  out.sample_rate = rec.sample_rate;
  out.source_path = rec.source_path;
  const std::size_t n = rec.num_frames();
  std::vector<double> mono(n, 0.0);
  for (const auto& ch : rec.channels) {
    if (ch.size() != n) fail(ErrorKind::kData, rec.source_path + ": ragged channels");
    for (std::size_t i = 0; i < n; ++i) mono[i] += ch[i];
  }
  const double inv = 1.0 / static_cast<double>(rec.channels.size());
  if (rec.channels.size() > 1)
    for (double& v : mono) v *= inv;
  out.channels.push_back(std::move(mono));
  return out;
}

RawRecording resample_16k(const RawRecording& rec) {
  if (rec.sample_rate <= 0) {
    fail(ErrorKind::kData, rec.source_path + ": invalid sample rate " +
                               std::to_string(rec.sample_rate));
  }
  if (rec.num_channels() != 1) {
    fail(ErrorKind::kUsage, "resample_16k expects a mono recording");
  }
  if (rec.sample_rate == kTargetRate) return rec;

  const std::int64_t g = std::gcd<std::int64_t>(kTargetRate, rec.sample_rate);
  const std::int64_t up = kTargetRate / g;
  const std::int64_t down = rec.sample_rate / g;
  const auto table = design_polyphase(up, down);
  const auto& in = rec.channels[0];
  const std::int64_t n_in = static_cast<std::int64_t>(in.size());
  const std::int64_t n_out = static_cast<std::int64_t>(std::llround(
      static_cast<double>(n_in) * kTargetRate / static_cast<double>(rec.sample_rate)));
  const int half = kTapsPerPhase / 2;

  std::vector<double> out(static_cast<std::size_t>(n_out));
  for (std::int64_t n = 0; n < n_out; ++n) {
    const std::int64_t num = n * down;
    const std::int64_t base = num / up;
    const std::int64_t phase = num % up;
    const double* taps = table.data() + phase * kTapsPerPhase;
    double acc = 0.0;
    for (int k = 0; k < kTapsPerPhase; ++k) {
      const std::int64_t i = base + k - half + 1;
      if (i >= 0 && i < n_in) acc += taps[k] * in[static_cast<std::size_t>(i)];
    }
    out[static_cast<std::size_t>(n)] = acc;
  }
  RawRecording res;
  res.sample_rate = kTargetRate;
  res.source_path = rec.source_path;
  res.channels.push_back(std::move(out));
  return res;
}

AudioClip normalize_pad(const RawRecording& rec, double max_seconds) {
  if (rec.sample_rate != kTargetRate || rec.num_channels() != 1) {
    fail(ErrorKind::kUsage, "normalize_pad expects 16 kHz mono input");
  }
  if (!(max_seconds > 0.0)) fail(ErrorKind::kUsage, "max_seconds must be positive");
  const auto& x = rec.channels[0];
  if (x.empty()) fail(ErrorKind::kData, rec.source_path + ": empty signal");

  const auto max_len = static_cast<std::size_t>(std::llround(max_seconds * kTargetRate));
  const std::size_t valid = std::min(x.size(), max_len);
  if (valid == 0) fail(ErrorKind::kData, rec.source_path + ": empty signal");

  double mean = 0.0;
  for (std::size_t i = 0; i < valid; ++i) mean += x[i];
  mean /= static_cast<double>(valid);
  // Second-pass correction so a constant signal maps to exact zeros.
  double resid = 0.0;
  for (std::size_t i = 0; i < valid; ++i) resid += x[i] - mean;
  mean += resid / static_cast<double>(valid);
  double var = 0.0;
  for (std::size_t i = 0; i < valid; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<double>(valid);
  const double denom = std::sqrt(var) + kNormalizeEps;

  AudioClip clip;
  clip.valid_len = valid;
  const std::size_t padded = (valid + kPatchSamples - 1) / kPatchSamples * kPatchSamples;
  clip.waveform.assign(padded, 0.0f);
  for (std::size_t i = 0; i < valid; ++i) {
    clip.waveform[i] = static_cast<float>((x[i] - mean) / denom);
  }
  return clip;
}

AudioClip preprocess_file(const std::filesystem::path& wav, const std::string& site,
                          const std::string& patient_id, double max_seconds) {
  AudioClip clip = normalize_pad(resample_16k(to_mono(load_wav(wav))), max_seconds);
  clip.site = site;
  clip.patient_id = patient_id;
  return clip;
}

void write_clip(const std::filesystem::path& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write("AQCL", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, clip.valid_len);
  put<std::uint64_t>(out, clip.waveform.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.site.size()));
  out.write(clip.site.data(), static_cast<std::streamsize>(clip.site.size()));
  for (float v : clip.waveform) put<double>(out, static_cast<double>(v));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

AudioClip read_clip(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + name);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AQCL", 4) != 0) {
    fail(ErrorKind::kData, name + ": bad clip magic");
  }
  const auto version = get<std::uint32_t>(in, name);
  if (version != 1) fail(ErrorKind::kData, name + ": unsupported clip version");
  AudioClip clip;
  clip.valid_len = get<std::uint64_t>(in, name);
  const auto length = get<std::uint64_t>(in, name);
  const auto site_len = get<std::uint32_t>(in, name);
  if (length % kPatchSamples != 0 || clip.valid_len > length) {
    fail(ErrorKind::kData, name + ": inconsistent clip lengths");
  }
  clip.site.resize(site_len);
  in.read(clip.site.data(), site_len);
  clip.waveform.resize(length);
  for (auto& v : clip.waveform) v = static_cast<float>(get<double>(in, name));
  return clip;
}

}  // namespace auscqa
