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

// Acoustic front-ends: raw patch tokenizer, log-mel CNN tokenizer, external
// embedding store, and the shared projection into the LM width.

#ifndef AUSCQA_ENCODERS_HPP_
#define AUSCQA_ENCODERS_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "auscqa/audio.hpp"
#include "auscqa/optim.hpp"
#include "auscqa/tensor.hpp"

namespace auscqa {

inline constexpr std::size_t kMaxPositions = 750;  // 30 s of 40 ms patches

// tokens is [N x width]; mask[n] is nonzero for real tokens, which always
// form the prefix [0, n_valid).
struct TokenSequence {
  Tensor tokens;
  std::vector<char> mask;
  std::string site;
  std::size_t n_valid = 0;

  std::size_t size() const { return mask.size(); }
};

enum class EncoderKind { kRaw, kMel, kExternal };

EncoderKind parse_encoder_kind(const std::string& name);
std::string encoder_kind_name(EncoderKind kind);

struct MelOptions {
  std::size_t n_mels = 80;
  std::size_t win = 400;
  std::size_t hop = 160;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;
};

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kRaw;
  std::size_t d_embed = 64;
  std::size_t d_proj = 128;
  std::size_t patch_samples = kPatchSamples;
  std::size_t cnn_channels = 32;
  MelOptions mel;
};

// Number of real tokens for a clip: patches holding at least one valid sample.
std::size_t valid_token_count(std::size_t valid_len, std::size_t patch_samples);

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Center frequency in Hz of each of the n_mels triangular filters.
std::vector<double> mel_center_frequencies(const MelOptions& opt, int sample_rate);

// Natural-log mel power spectrogram, row-major [n_mels x frames], with a
// periodic Hann window and no centering. frames = (len - win) / hop + 1.
std::vector<double> log_mel_spectrogram(std::span<const float> wav, const MelOptions& opt,
                                        std::size_t* frames_out);

// Initial patch kernel [d_embed x patch_samples]: unit-norm Hann-windowed
// cosine and sine rows in pairs, centred on mel-spaced frequencies in
// (0, fmax). The learnable filter bank starts out as a short-time spectrum.
std::vector<double> sinusoid_patch_bank(std::size_t d_embed, std::size_t patch_samples,
                                        double fmax, int sample_rate);

struct RawTokenizerParams {
  Tensor kernel;     // [d_embed x patch_samples]
  Tensor positions;  // [kMaxPositions x d_embed]
};

struct MelTokenizerParams {
  Tensor conv1_kernel;  // [channels x 1 x 3 x 3]
  Tensor conv1_bias;    // [channels]
  Tensor conv2_kernel;  // [d_embed x channels x 3 x 3]
  Tensor conv2_bias;    // [d_embed]
  Tensor positions;     // [kMaxPositions x d_embed]
};

struct ProjectionParams {
  Tensor ln_gain;  // [d_embed]
  Tensor ln_bias;  // [d_embed]
  Tensor weight;   // [d_embed x d_proj]
  Tensor bias;     // [d_proj]
};

// e_n = patch_n * kernel^T + p_n, positions restarting at 0 for every clip.
TokenSequence tokenize_raw(const AudioClip& clip, const RawTokenizerParams& params,
                           std::size_t patch_samples);

// Log-mel -> two stride-2 "same" 3x3 conv stages with GELU -> mean over the
// frequency axis -> + p_n. Yields ceil(ceil(frames / 2) / 2) tokens.
TokenSequence tokenize_mel(const AudioClip& clip, const MelTokenizerParams& params,
                           const MelOptions& opt);

// GELU(LayerNorm(e) W + b); mask and site pass through.
TokenSequence project(const TokenSequence& seq, const ProjectionParams& params);

// Precomputed embeddings, one file per clip plus an index.tsv of
// "clip_id<TAB>relative path" lines. Each file is
//   char[4] "AQEM" | u32 N | u32 d_embed | f32 data[N * d_embed] (row-major)
class EmbeddingStore {
 public:
  // An empty store; load() on it always fails with a missing-id error.
  EmbeddingStore() = default;
  static EmbeddingStore open(const std::filesystem::path& dir);

  bool contains(const std::string& clip_id) const { return index_.count(clip_id) > 0; }
  std::size_t size() const { return index_.size(); }

  // All tokens are real (mask all true); no positions are added.
  TokenSequence load(const std::string& clip_id, std::size_t expected_width) const;

  // Writes a matrix file and appends it to index.tsv.
  static void write(const std::filesystem::path& dir, const std::string& clip_id,
                    std::size_t rows, std::size_t cols, std::span<const float> data);

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> index_;
};

// Registers the parameters for `config` under the "encoder" group and keeps
// handles to them. Handles share storage with the store, so optimizer
// updates are visible without re-binding.
class AcousticEncoder {
 public:
  AcousticEncoder(const EncoderConfig& config, ParameterStore& store, Rng& rng);
  // Binds to parameters already present in `store` (e.g. from a checkpoint).
  AcousticEncoder(const EncoderConfig& config, const ParameterStore& store);

  const EncoderConfig& config() const { return config_; }

  // Unprojected e_n for raw and mel encoders.
  TokenSequence embed(const AudioClip& clip) const;
  // Projected tokens. For kExternal, `clip_id` selects the stored matrix.
  TokenSequence encode(const AudioClip& clip, const std::string& clip_id = {}) const;

  void set_store(EmbeddingStore store) { external_ = std::move(store); }

 private:
  void bind(const ParameterStore& store);

  EncoderConfig config_;
  RawTokenizerParams raw_;
  MelTokenizerParams mel_;
  ProjectionParams proj_;
  EmbeddingStore external_;
};

}  // namespace auscqa

#endif  // AUSCQA_ENCODERS_HPP_
