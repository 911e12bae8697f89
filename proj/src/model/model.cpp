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

#include "auscqa/model.hpp"

#include <algorithm>
#include <utility>

#include "auscqa/error.hpp"
#include "auscqa/ops.hpp"
#include "internal/json_util.hpp"

namespace auscqa {
namespace {

using nlohmann::json;

using internal::check_keys;
using internal::read;

json encoder_to_json(const EncoderConfig& c) {
  return {{"kind", encoder_kind_name(c.kind)},
          {"d_embed", c.d_embed},
          {"d_proj", c.d_proj},
          {"patch_samples", c.patch_samples},
          {"cnn_channels", c.cnn_channels},
          {"mel",
           {{"n_mels", c.mel.n_mels},
            {"win", c.mel.win},
            {"hop", c.mel.hop},
            {"fmin", c.mel.fmin},
            {"fmax", c.mel.fmax},
            {"log_floor", c.mel.log_floor}}}};
}

EncoderConfig encoder_from_json(const json& j) {
  check_keys(j, {"kind", "d_embed", "d_proj", "patch_samples", "cnn_channels", "mel"}, "encoder");
  EncoderConfig c;
  if (j.contains("kind")) c.kind = parse_encoder_kind(j.at("kind").get<std::string>());
  read(j, "d_embed", c.d_embed);
  read(j, "d_proj", c.d_proj);
  read(j, "patch_samples", c.patch_samples);
  read(j, "cnn_channels", c.cnn_channels);
  if (j.contains("mel")) {
    const json& m = j.at("mel");
    check_keys(m, {"n_mels", "win", "hop", "fmin", "fmax", "log_floor"}, "encoder.mel");
    read(m, "n_mels", c.mel.n_mels);
    read(m, "win", c.mel.win);
    read(m, "hop", c.mel.hop);
    read(m, "fmin", c.mel.fmin);
    read(m, "fmax", c.mel.fmax);
    read(m, "log_floor", c.mel.log_floor);
  }
  return c;
}

json resampler_to_json(const ResamplerConfig& c) {
  return {{"num_latents", c.num_latents},
          {"n_heads", c.n_heads},
          {"depth", c.depth},
          {"feedforward", c.feedforward},
          {"ffn_mult", c.ffn_mult}};
}

ResamplerConfig resampler_from_json(const json& j) {
  check_keys(j, {"num_latents", "n_heads", "depth", "feedforward", "ffn_mult"}, "resampler");
  ResamplerConfig c;
  read(j, "num_latents", c.num_latents);
  read(j, "n_heads", c.n_heads);
  read(j, "depth", c.depth);
  read(j, "feedforward", c.feedforward);
  read(j, "ffn_mult", c.ffn_mult);
  return c;
}

}  // namespace

json lm_config_to_json(const LMConfig& c) {
  return {{"n_layers", c.n_layers}, {"d_model", c.d_model},   {"n_heads", c.n_heads},
          {"d_ffn", c.d_ffn},       {"max_seq", c.max_seq}, {"cross_attn_every", c.cross_attn_every}};
}

LMConfig lm_config_from_json(const json& j) {
  check_keys(j, {"n_layers", "d_model", "n_heads", "d_ffn", "max_seq", "cross_attn_every"}, "lm");
  LMConfig c;
  try {
    read(j, "n_layers", c.n_layers);
    read(j, "d_model", c.d_model);
    read(j, "n_heads", c.n_heads);
    read(j, "d_ffn", c.d_ffn);
    read(j, "max_seq", c.max_seq);
    read(j, "cross_attn_every", c.cross_attn_every);
  } catch (const json::exception& e) {
    fail(ErrorKind::kUsage, std::string("bad lm config: ") + e.what());
  }
  return c;
}

json ModelConfig::to_json() const {
  return {{"encoder", encoder_to_json(encoder)},
          {"resampler", resampler_to_json(resampler)},
          {"lm", lm_config_to_json(lm)},
          {"max_seconds", max_seconds},
          {"max_new_tokens", max_new_tokens},
          {"embedding_dir", embedding_dir}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  check_keys(j, {"encoder", "resampler", "lm", "max_seconds", "max_new_tokens", "embedding_dir"},
             "model");
  ModelConfig c;
  try {
    if (j.contains("encoder")) c.encoder = encoder_from_json(j.at("encoder"));
    if (j.contains("resampler")) c.resampler = resampler_from_json(j.at("resampler"));
    if (j.contains("lm")) c.lm = lm_config_from_json(j.at("lm"));
    read(j, "max_seconds", c.max_seconds);
    read(j, "max_new_tokens", c.max_new_tokens);
    read(j, "embedding_dir", c.embedding_dir);
  } catch (const json::exception& e) {
    fail(ErrorKind::kUsage, std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (encoder.d_proj != lm.d_model) {
    fail(ErrorKind::kUsage, "encoder.d_proj (" + std::to_string(encoder.d_proj) +
                                ") must equal lm.d_model (" + std::to_string(lm.d_model) + ")");
  }
  if (lm.n_heads == 0 || lm.d_model % lm.n_heads != 0) {
    fail(ErrorKind::kUsage, "lm.d_model must be a positive multiple of lm.n_heads");
  }
  if (resampler.n_heads == 0 || lm.d_model % resampler.n_heads != 0) {
    fail(ErrorKind::kUsage, "lm.d_model must be a positive multiple of resampler.n_heads");
  }
  if (resampler.num_latents == 0) fail(ErrorKind::kUsage, "resampler.num_latents must be positive");
  if (!(max_seconds > 0.0)) fail(ErrorKind::kUsage, "max_seconds must be positive");
  if (lm.cross_attn_every == 0) fail(ErrorKind::kUsage, "lm.cross_attn_every must be positive");
  if (encoder.kind == EncoderKind::kExternal && embedding_dir.empty()) {
    fail(ErrorKind::kUsage, "the external encoder needs embedding_dir");
  }
}

void save_text_lm(const std::filesystem::path& path, const LMConfig& config,
                  const TextVocab& vocab, const ParameterStore& store) {
  save_checkpoint(path, {{"kind", kKindTextLm}, {"lm", lm_config_to_json(config)}}, vocab.words(),
                  store);
}

AudioQAModel::AudioQAModel(const ModelConfig& config, const Checkpoint& text_lm,
                           std::uint64_t seed)
    : config_(config), vocab_(TextVocab::from_words(text_lm.vocab)) {
  config_.validate();
  if (text_lm.config.value("kind", "") != kKindTextLm) {
    fail(ErrorKind::kData, "expected a pretrained text LM checkpoint");
  }
  const LMConfig stored = lm_config_from_json(text_lm.config.at("lm"));
  if (lm_config_to_json(stored) != lm_config_to_json(config_.lm)) {
    fail(ErrorKind::kUsage, "model lm config does not match the pretrained LM checkpoint: " +
                                lm_config_to_json(stored).dump());
  }
  for (const auto& p : text_lm.store.params()) {
    if (p.group != kGroupLm) continue;
    const auto v = p.tensor.values();
    store_.add(p.name, kGroupLm, Tensor::parameter(p.tensor.shape(), {v.begin(), v.end()}));
  }
  store_.set_frozen(kGroupLm, true);
  Rng rng(seed);
  AcousticEncoder(config_.encoder, store_, rng);
  PerceiverResampler(config_.resampler, config_.lm.d_model, store_, rng);
  FusionLM::add_cross_params(config_.lm, store_, rng);
  bind();
}

AudioQAModel::AudioQAModel(Checkpoint checkpoint)
    : vocab_(TextVocab::from_words(checkpoint.vocab)), store_(std::move(checkpoint.store)) {
  if (checkpoint.config.value("kind", "") != kKindAudioQa) {
    fail(ErrorKind::kData, "expected an audio QA checkpoint");
  }
  config_ = ModelConfig::from_json(checkpoint.config.at("model"));
  store_.set_frozen(kGroupLm, true);
  bind();
}

void AudioQAModel::bind() {
  encoder_ = std::make_unique<AcousticEncoder>(config_.encoder, std::as_const(store_));
  if (config_.encoder.kind == EncoderKind::kExternal) {
    encoder_->set_store(EmbeddingStore::open(config_.embedding_dir));
  }
  resampler_ = std::make_unique<PerceiverResampler>(config_.resampler, std::as_const(store_));
  lm_ = std::make_unique<FusionLM>(config_.lm, std::as_const(store_));
  if (!lm_->has_cross()) fail(ErrorKind::kData, "model has no cross-attention adapters");
  if (lm_->vocab_size() != vocab_.size()) {
    fail(ErrorKind::kData, "vocabulary size does not match the decoder head");
  }
}

AudioQAModel AudioQAModel::load(const std::filesystem::path& path) {
  return AudioQAModel(load_checkpoint(path));
}

void AudioQAModel::save(const std::filesystem::path& path) const {
  save_checkpoint(path, {{"kind", kKindAudioQa}, {"model", config_.to_json()}}, vocab_.words(),
                  store_);
}

LatentBundle AudioQAModel::encode_bag(std::span<const AudioClip> clips,
                                      std::span<const std::string> clip_ids) const {
  if (clips.empty()) fail(ErrorKind::kData, "patient bag has no clips");
  if (config_.encoder.kind == EncoderKind::kExternal && clip_ids.size() != clips.size()) {
    fail(ErrorKind::kUsage, "the external encoder needs one clip id per clip");
  }
  std::vector<TokenSequence> seqs;
  seqs.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    seqs.push_back(encoder_->encode(clips[i], clip_ids.empty() ? std::string() : clip_ids[i]));
  }
  return (*resampler_)(assemble_bag(seqs));
}

Tensor AudioQAModel::qa_loss(const LatentBundle& z, std::span<const std::string> sites,
                             std::span<const QAPair> qa) const {
  if (qa.empty()) fail(ErrorKind::kData, "patient has no QA pairs");
  const auto pair_loss = [&](const QAPair& pair) {
    const Prompt ex =
        assemble_example(vocab_, sites, pair.question, pair.answer, config_.lm.max_seq);
    return answer_loss(lm_->forward(ex.ids, &z.z), ex.ids, ex.answer_start);
  };
  Tensor total = pair_loss(qa[0]);
  for (std::size_t i = 1; i < qa.size(); ++i) total = ops::add(total, pair_loss(qa[i]));
  return ops::scale(total, 1.0 / static_cast<double>(qa.size()));
}

std::string AudioQAModel::answer(const LatentBundle* z, std::span<const std::string> sites,
                                 const std::string& question, Prompt* prompt) const {
  const Prompt p = assemble_prompt(vocab_, sites, question, config_.lm.max_seq);
  if (prompt != nullptr) *prompt = p;
  const auto out = generate(*lm_, p.ids, z ? &z->z : nullptr, config_.max_new_tokens);
  return vocab_.decode(out);
}

void AudioQAModel::zero_gates() {
  for (const auto& p : store_.params()) {
    const std::string& n = p.name;
    if (p.group == kGroupAdapter && n.size() > 6 && n.compare(n.size() - 6, 6, ".alpha") == 0) {
      Tensor t = p.tensor;  // shares storage with the store
      auto v = t.mutable_values();
      std::fill(v.begin(), v.end(), 0.0);
    }
  }
}

}  // namespace auscqa
