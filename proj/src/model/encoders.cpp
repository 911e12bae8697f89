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

#include "auscqa/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "auscqa/error.hpp"
#include "auscqa/ops.hpp"

namespace auscqa {
namespace {

constexpr char kEmbedMagic[4] = {'A', 'Q', 'E', 'M'};

Tensor waveform_tensor(const AudioClip& clip) {
  const std::size_t n = clip.waveform.size();
  return Tensor({n}, std::vector<double>(clip.waveform.begin(), clip.waveform.end()));
}

std::vector<char> prefix_mask(std::size_t n, std::size_t n_valid) {
  std::vector<char> mask(n, 0);
  std::fill_n(mask.begin(), std::min(n, n_valid), 1);
  return mask;
}

// Triangular filters on a linear frequency grid of n_freqs bins, row-major
// [n_mels x n_freqs].
std::vector<double> mel_filterbank(const MelOptions& opt, std::size_t n_freqs,
                                   int sample_rate) {
  const double m_lo = hz_to_mel(opt.fmin);
  const double m_hi = hz_to_mel(opt.fmax);
  std::vector<double> f_pts(opt.n_mels + 2);
  for (std::size_t i = 0; i < f_pts.size(); ++i) {
    const double m = m_lo + (m_hi - m_lo) * static_cast<double>(i) /
                                static_cast<double>(opt.n_mels + 1);
    f_pts[i] = mel_to_hz(m);
  }
  const double nyquist = sample_rate / 2.0;
  std::vector<double> fb(opt.n_mels * n_freqs, 0.0);
  for (std::size_t k = 0; k < n_freqs; ++k) {
    const double f = nyquist * static_cast<double>(k) / static_cast<double>(n_freqs - 1);
    for (std::size_t m = 0; m < opt.n_mels; ++m) {
      const double down = (f - f_pts[m]) / (f_pts[m + 1] - f_pts[m]);
      const double up = (f_pts[m + 2] - f) / (f_pts[m + 2] - f_pts[m + 1]);
      fb[m * n_freqs + k] = std::max(0.0, std::min(down, up));
    }
  }
  return fb;
}

Tensor init_param(ParameterStore& store, Rng& rng, const std::string& name, Shape shape,
                  double stddev) {
  const std::size_t n = shape_numel(shape);
  return store.add(name, kGroupEncoder, Tensor::parameter(std::move(shape),
                                                          normal_values(rng, n, stddev)));
}

Tensor init_const(ParameterStore& store, const std::string& name, Shape shape, double v) {
  const std::size_t n = shape_numel(shape);
  return store.add(name, kGroupEncoder,
                   Tensor::parameter(std::move(shape), std::vector<double>(n, v)));
}

}  // namespace

std::vector<double> sinusoid_patch_bank(std::size_t d_embed, std::size_t patch_samples,
                                        double fmax, int sample_rate) {
  const std::size_t pairs = (d_embed + 1) / 2;
  const double m_hi = hz_to_mel(fmax);
  std::vector<double> out(d_embed * patch_samples);
  for (std::size_t p = 0; p < pairs; ++p) {
    const double f =
        mel_to_hz(m_hi * static_cast<double>(p + 1) / static_cast<double>(pairs + 1));
    const double w = 2.0 * M_PI * f / static_cast<double>(sample_rate);
    for (std::size_t q = 0; q < 2 && 2 * p + q < d_embed; ++q) {
      double* row = out.data() + (2 * p + q) * patch_samples;
      double norm = 0.0;
      for (std::size_t i = 0; i < patch_samples; ++i) {
        const double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                                 static_cast<double>(patch_samples));
        const double phase = w * static_cast<double>(i);
        row[i] = hann * (q == 0 ? std::cos(phase) : std::sin(phase));
        norm += row[i] * row[i];
      }
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < patch_samples; ++i) row[i] /= norm;
    }
  }
  return out;
}

EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "raw") return EncoderKind::kRaw;
  if (name == "mel") return EncoderKind::kMel;
  if (name == "external") return EncoderKind::kExternal;
  fail(ErrorKind::kUsage, "unknown encoder kind '" + name + "' (expected raw, mel or external)");
}

std::string encoder_kind_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kRaw: return "raw";
    case EncoderKind::kMel: return "mel";
    case EncoderKind::kExternal: return "external";
  }
  return "raw";
}

std::size_t valid_token_count(std::size_t valid_len, std::size_t patch_samples) {
  return (valid_len + patch_samples - 1) / patch_samples;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_frequencies(const MelOptions& opt, int /*sample_rate*/) {
  const double m_lo = hz_to_mel(opt.fmin);
  const double m_hi = hz_to_mel(opt.fmax);
  std::vector<double> centers(opt.n_mels);
  for (std::size_t m = 0; m < opt.n_mels; ++m) {
    centers[m] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(m + 1) /
                                      static_cast<double>(opt.n_mels + 1));
  }
  return centers;
}

std::vector<double> log_mel_spectrogram(std::span<const float> wav, const MelOptions& opt,
                                        std::size_t* frames_out) {
  if (opt.win == 0 || opt.hop == 0 || opt.n_mels == 0) {
    fail(ErrorKind::kUsage, "mel options must be positive");
  }
  if (wav.size() < opt.win) {
    fail(ErrorKind::kData, "clip of " + std::to_string(wav.size()) +
                               " samples is shorter than the STFT window (" +
                               std::to_string(opt.win) + ")");
  }
  const std::size_t n_fft = opt.win;
  const std::size_t n_freqs = n_fft / 2 + 1;
  const std::size_t frames = (wav.size() - opt.win) / opt.hop + 1;

  std::vector<double> window(n_fft);
  for (std::size_t i = 0; i < n_fft; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                     static_cast<double>(n_fft));
  }
  std::vector<double> cos_t(n_freqs * n_fft), sin_t(n_freqs * n_fft);
  for (std::size_t k = 0; k < n_freqs; ++k) {
    for (std::size_t i = 0; i < n_fft; ++i) {
      const std::size_t phase = (k * i) % n_fft;
      const double a = 2.0 * M_PI * static_cast<double>(phase) / static_cast<double>(n_fft);
      cos_t[k * n_fft + i] = std::cos(a);
      sin_t[k * n_fft + i] = std::sin(a);
    }
  }
  const auto fb = mel_filterbank(opt, n_freqs, kTargetRate);

  std::vector<double> out(opt.n_mels * frames);
  std::vector<double> frame(n_fft), power(n_freqs);
  for (std::size_t t = 0; t < frames; ++t) {
    const float* src = wav.data() + t * opt.hop;
    for (std::size_t i = 0; i < n_fft; ++i) frame[i] = window[i] * static_cast<double>(src[i]);
    for (std::size_t k = 0; k < n_freqs; ++k) {
      const double* c = cos_t.data() + k * n_fft;
      const double* s = sin_t.data() + k * n_fft;
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i < n_fft; ++i) {
        re += frame[i] * c[i];
        im -= frame[i] * s[i];
      }
      power[k] = re * re + im * im;
    }
    for (std::size_t m = 0; m < opt.n_mels; ++m) {
      const double* w = fb.data() + m * n_freqs;
      double e = 0.0;
      for (std::size_t k = 0; k < n_freqs; ++k) e += w[k] * power[k];
      out[m * frames + t] = std::log(std::max(e, opt.log_floor));
    }
  }
  if (frames_out) *frames_out = frames;
  return out;
}

TokenSequence tokenize_raw(const AudioClip& clip, const RawTokenizerParams& params,
                           std::size_t patch_samples) {
  const std::size_t len = clip.waveform.size();
  if (patch_samples == 0 || len == 0 || len % patch_samples != 0) {
    fail(ErrorKind::kUsage, "clip length " + std::to_string(len) +
                                " is not a positive multiple of the patch size " +
                                std::to_string(patch_samples));
  }
  if (params.kernel.rank() != 2 || params.kernel.dim(1) != patch_samples) {
    shape_error("patch kernel " + shape_str(params.kernel.shape()) + " for patch size " +
                std::to_string(patch_samples));
  }
  const std::size_t n = len / patch_samples;
  if (n > params.positions.dim(0)) {
    fail(ErrorKind::kData, "clip has " + std::to_string(n) +
                               " patches but the positional table holds " +
                               std::to_string(params.positions.dim(0)));
  }
  Tensor e = ops::conv1d_nonoverlap(waveform_tensor(clip), params.kernel, patch_samples);
  TokenSequence seq;
  seq.tokens = ops::add(e, ops::slice_rows(params.positions, 0, n));
  seq.n_valid = std::min(n, valid_token_count(clip.valid_len, patch_samples));
  seq.mask = prefix_mask(n, seq.n_valid);
  seq.site = clip.site;
  return seq;
}

TokenSequence tokenize_mel(const AudioClip& clip, const MelTokenizerParams& params,
                           const MelOptions& opt) {
  std::size_t frames = 0;
  auto spec = log_mel_spectrogram(clip.waveform, opt, &frames);
  Tensor x({1, opt.n_mels, frames}, std::move(spec));
  Tensor h = ops::gelu(ops::conv2d_same(x, params.conv1_kernel, params.conv1_bias, 2, 2));
  h = ops::gelu(ops::conv2d_same(h, params.conv2_kernel, params.conv2_bias, 2, 2));
  Tensor e = ops::avgpool_freq(h);
  const std::size_t n = e.dim(0);
  if (n > params.positions.dim(0)) {
    fail(ErrorKind::kData, "clip has " + std::to_string(n) +
                               " mel tokens but the positional table holds " +
                               std::to_string(params.positions.dim(0)));
  }
  TokenSequence seq;
  seq.tokens = ops::add(e, ops::slice_rows(params.positions, 0, n));
  seq.n_valid = std::min(n, valid_token_count(clip.valid_len, kPatchSamples));
  seq.mask = prefix_mask(n, seq.n_valid);
  seq.site = clip.site;
  return seq;
}

TokenSequence project(const TokenSequence& seq, const ProjectionParams& params) {
  if (seq.tokens.rank() != 2 || seq.tokens.dim(0) != seq.mask.size()) {
    shape_error("token sequence " + shape_str(seq.tokens.shape()) + " with " +
                std::to_string(seq.mask.size()) + " mask entries");
  }
  if (params.weight.rank() != 2 || seq.tokens.dim(1) != params.weight.dim(0)) {
    shape_error("projection " + shape_str(params.weight.shape()) + " applied to tokens " +
                shape_str(seq.tokens.shape()));
  }
  TokenSequence out;
  Tensor h = ops::layernorm(seq.tokens, params.ln_gain, params.ln_bias);
  out.tokens = ops::gelu(ops::add_rowvec(ops::matmul(h, params.weight), params.bias));
  out.mask = seq.mask;
  out.site = seq.site;
  out.n_valid = seq.n_valid;
  return out;
}

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& dir) {
  EmbeddingStore store;
  store.dir_ = dir;
  std::ifstream in(dir / "index.tsv");
  if (!in) fail(ErrorKind::kIo, "cannot open embedding index " + (dir / "index.tsv").string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      fail(ErrorKind::kData, (dir / "index.tsv").string() + ":" + std::to_string(lineno) +
                                 ": expected 'clip_id<TAB>path'");
    }
    store.index_[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return store;
}

TokenSequence EmbeddingStore::load(const std::string& clip_id,
                                   std::size_t expected_width) const {
  const auto it = index_.find(clip_id);
  if (it == index_.end()) fail(ErrorKind::kData, "no stored embedding for clip '" + clip_id + "'");
  const auto path = dir_ / it->second;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  char magic[4];
  std::uint32_t rows = 0, cols = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  if (!in || std::memcmp(magic, kEmbedMagic, 4) != 0) {
    fail(ErrorKind::kData, path.string() + ": bad embedding header");
  }
  if (cols != expected_width) {
    fail(ErrorKind::kUsage, path.string() + ": embedding width " + std::to_string(cols) +
                                " does not match configured d_embed " +
                                std::to_string(expected_width));
  }
  if (rows == 0) fail(ErrorKind::kData, path.string() + ": empty embedding matrix");
  std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) fail(ErrorKind::kData, path.string() + ": truncated embedding data");
  TokenSequence seq;
  seq.tokens = Tensor({rows, cols}, std::vector<double>(buf.begin(), buf.end()));
  seq.mask.assign(rows, 1);
  seq.n_valid = rows;
  return seq;
}

void EmbeddingStore::write(const std::filesystem::path& dir, const std::string& clip_id,
                           std::size_t rows, std::size_t cols, std::span<const float> data) {
  if (data.size() != rows * cols) shape_error("embedding data does not match rows x cols");
  if (clip_id.find_first_of("\t\n") != std::string::npos) {
    fail(ErrorKind::kUsage, "clip id must not contain tabs or newlines");
  }
  std::filesystem::create_directories(dir);
  const std::string rel = clip_id + ".emb";
  std::ofstream out(dir / rel, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + (dir / rel).string());
  const auto r = static_cast<std::uint32_t>(rows);
  const auto c = static_cast<std::uint32_t>(cols);
  out.write(kEmbedMagic, 4);
  out.write(reinterpret_cast<const char*>(&r), 4);
  out.write(reinterpret_cast<const char*>(&c), 4);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  std::ofstream index(dir / "index.tsv", std::ios::app);
  index << clip_id << '\t' << rel << '\n';
  if (!out || !index) fail(ErrorKind::kIo, "short write to embedding store " + dir.string());
}

AcousticEncoder::AcousticEncoder(const EncoderConfig& config, ParameterStore& store, Rng& rng)
    : config_(config) {
  const std::size_t d = config.d_embed;
  const std::size_t c = config.cnn_channels;
  switch (config.kind) {
    case EncoderKind::kRaw:
      store.add("encoder.patch.kernel", kGroupEncoder,
                Tensor::parameter({d, config.patch_samples},
                                  sinusoid_patch_bank(d, config.patch_samples, config.mel.fmax,
                                                      kTargetRate)));
      init_param(store, rng, "encoder.positions", {kMaxPositions, d}, 0.02);
      break;
    case EncoderKind::kMel:
      init_param(store, rng, "encoder.conv1.kernel", {c, 1, 3, 3}, std::sqrt(2.0 / 9.0));
      init_const(store, "encoder.conv1.bias", {c}, 0.0);
      init_param(store, rng, "encoder.conv2.kernel", {d, c, 3, 3},
                 std::sqrt(2.0 / (9.0 * static_cast<double>(c))));
      init_const(store, "encoder.conv2.bias", {d}, 0.0);
      init_param(store, rng, "encoder.positions", {kMaxPositions, d}, 0.02);
      break;
    case EncoderKind::kExternal:
      break;
  }
  init_const(store, "encoder.proj.ln_gain", {d}, 1.0);
  init_const(store, "encoder.proj.ln_bias", {d}, 0.0);
  init_param(store, rng, "encoder.proj.weight", {d, config.d_proj},
             1.0 / std::sqrt(static_cast<double>(d)));
  init_const(store, "encoder.proj.bias", {config.d_proj}, 0.0);
  bind(store);
}

AcousticEncoder::AcousticEncoder(const EncoderConfig& config, const ParameterStore& store)
    : config_(config) {
  bind(store);
}

void AcousticEncoder::bind(const ParameterStore& store) {
  switch (config_.kind) {
    case EncoderKind::kRaw:
      raw_.kernel = store.get("encoder.patch.kernel");
      raw_.positions = store.get("encoder.positions");
      break;
    case EncoderKind::kMel:
      mel_.conv1_kernel = store.get("encoder.conv1.kernel");
      mel_.conv1_bias = store.get("encoder.conv1.bias");
      mel_.conv2_kernel = store.get("encoder.conv2.kernel");
      mel_.conv2_bias = store.get("encoder.conv2.bias");
      mel_.positions = store.get("encoder.positions");
      break;
    case EncoderKind::kExternal:
      break;
  }
  proj_.ln_gain = store.get("encoder.proj.ln_gain");
  proj_.ln_bias = store.get("encoder.proj.ln_bias");
  proj_.weight = store.get("encoder.proj.weight");
  proj_.bias = store.get("encoder.proj.bias");
  if (proj_.weight.dim(0) != config_.d_embed || proj_.weight.dim(1) != config_.d_proj) {
    shape_error("stored projection " + shape_str(proj_.weight.shape()) +
                " does not match d_embed " + std::to_string(config_.d_embed) +
                " / d_proj " + std::to_string(config_.d_proj));
  }
}

TokenSequence AcousticEncoder::embed(const AudioClip& clip) const {
  switch (config_.kind) {
    case EncoderKind::kRaw: return tokenize_raw(clip, raw_, config_.patch_samples);
    case EncoderKind::kMel: return tokenize_mel(clip, mel_, config_.mel);
    case EncoderKind::kExternal: break;
  }
  fail(ErrorKind::kUsage, "external encoders need a clip id, not a waveform");
}

TokenSequence AcousticEncoder::encode(const AudioClip& clip, const std::string& clip_id) const {
  if (config_.kind == EncoderKind::kExternal) {
    TokenSequence seq = external_.load(clip_id, config_.d_embed);
    seq.site = clip.site;
    return project(seq, proj_);
  }
  return project(embed(clip), proj_);
}

}  // namespace auscqa
