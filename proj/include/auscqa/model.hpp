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

// The audio QA model: acoustic encoder, Perceiver resampler and the gated
// cross-attention decoder, sharing one ParameterStore.

#ifndef AUSCQA_MODEL_HPP_
#define AUSCQA_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "auscqa/audio.hpp"
#include "auscqa/checkpoint.hpp"
#include "auscqa/data.hpp"
#include "auscqa/encoders.hpp"
#include "auscqa/lm.hpp"
#include "auscqa/resampler.hpp"
#include "auscqa/text.hpp"
#include "json.hpp"

namespace auscqa {

// Checkpoint "kind" tags.
inline constexpr const char* kKindTextLm = "text_lm";
inline constexpr const char* kKindAudioQa = "audio_qa";

nlohmann::json lm_config_to_json(const LMConfig& c);
LMConfig lm_config_from_json(const nlohmann::json& j);

struct ModelConfig {
  EncoderConfig encoder;
  ResamplerConfig resampler;
  LMConfig lm;
  // Clips are truncated to this many seconds before tokenizing.
  double max_seconds = 30.0;
  std::size_t max_new_tokens = 8;
  // Directory of precomputed embeddings for the external encoder.
  std::string embedding_dir;

  nlohmann::json to_json() const;
  // Unknown keys are usage errors; missing keys keep their defaults.
  static ModelConfig from_json(const nlohmann::json& j);
  void validate() const;
};

// Text-only decoder checkpoint produced by LM pretraining.
void save_text_lm(const std::filesystem::path& path, const LMConfig& config,
                  const TextVocab& vocab, const ParameterStore& store);

class AudioQAModel {
 public:
  // Fresh encoder, resampler and adapters around a pretrained text LM;
  // the LM group is copied and frozen.
  AudioQAModel(const ModelConfig& config, const Checkpoint& text_lm, std::uint64_t seed);
  // Restores a checkpoint written by save().
  explicit AudioQAModel(Checkpoint checkpoint);

  AudioQAModel(AudioQAModel&&) = default;
  AudioQAModel& operator=(AudioQAModel&&) = default;
  AudioQAModel(const AudioQAModel&) = delete;
  AudioQAModel& operator=(const AudioQAModel&) = delete;

  static AudioQAModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const ModelConfig& config() const { return config_; }
  const TextVocab& vocab() const { return vocab_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const FusionLM& lm() const { return *lm_; }

  // One latent bundle per patient; `clip_ids` is needed only by the
  // external encoder.
  LatentBundle encode_bag(std::span<const AudioClip> clips,
                          std::span<const std::string> clip_ids = {}) const;

  // Mean answer cross-entropy over the QA pairs, all conditioned on `z`.
  Tensor qa_loss(const LatentBundle& z, std::span<const std::string> sites,
                 std::span<const QAPair> qa) const;

  // Greedy answer text. With z == nullptr the decoder runs text-only.
  std::string answer(const LatentBundle* z, std::span<const std::string> sites,
                     const std::string& question, Prompt* prompt = nullptr) const;

  std::vector<double> gates() const { return lm_->gates(); }
  // Sets every alpha to 0, which makes the model ignore audio.
  void zero_gates();

 private:
  void bind();

  ModelConfig config_;
  TextVocab vocab_;
  ParameterStore store_;
  std::unique_ptr<AcousticEncoder> encoder_;
  std::unique_ptr<PerceiverResampler> resampler_;
  std::unique_ptr<FusionLM> lm_;
};

}  // namespace auscqa

#endif  // AUSCQA_MODEL_HPP_
