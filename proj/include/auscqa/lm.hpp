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

// Small pre-LN causal decoder with tanh-gated cross-attention adapters in
// front of its blocks.

#ifndef AUSCQA_LM_HPP_
#define AUSCQA_LM_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "auscqa/optim.hpp"
#include "auscqa/resampler.hpp"
#include "auscqa/tensor.hpp"

namespace auscqa {

struct LMConfig {
  std::size_t n_layers = 4;
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::size_t d_ffn = 512;
  std::size_t max_seq = 512;
  std::size_t cross_attn_every = 1;
};

struct DecoderLayerParams {
  Tensor ln1_gain, ln1_bias;
  AttentionParams attn;
  Tensor ln2_gain, ln2_bias;
  Tensor w1, b1, w2, b2;
};

struct GatedCrossParams {
  Tensor alpha;  // [1]
  Tensor ln_q_gain, ln_q_bias;
  Tensor ln_kv_gain, ln_kv_bias;
  AttentionParams attn;
  Tensor ln_ff_gain, ln_ff_bias;
  Tensor w1, b1, w2, b2;
};

// Multi-head self-attention with a causal mask; h is [T x D].
Tensor causal_self_attention(const Tensor& h, const AttentionParams& p, std::size_t n_heads);

// H += tanh(a) * CrossAttn(LN(H), LN(Z)); H += tanh(a) * FFN(LN(H)).
Tensor gated_cross_block(const Tensor& h, const Tensor& z, const GatedCrossParams& p,
                         std::size_t n_heads);

class FusionLM {
 public:
  // Registers the decoder ("lm" group) parameters.
  static void add_lm_params(const LMConfig& config, std::size_t vocab_size,
                            ParameterStore& store, Rng& rng);
  // Registers one gated cross block ("adapter" group) per cross_attn_every
  // layers, each with alpha = 0.
  static void add_cross_params(const LMConfig& config, ParameterStore& store, Rng& rng);

  // Binds to parameters in `store`; cross blocks are used when present.
  FusionLM(const LMConfig& config, const ParameterStore& store);

  const LMConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  bool has_cross() const { return !cross_.empty(); }

  // Logits [T x V]. With z == nullptr the cross blocks are skipped, which is
  // the text-only decoder.
  Tensor forward(std::span<const int> ids, const Tensor* z) const;

  // tanh(alpha) per cross block, in layer order.
  std::vector<double> gates() const;

 private:
  LMConfig config_;
  std::size_t vocab_size_ = 0;
  Tensor tok_emb_, pos_emb_;
  std::vector<DecoderLayerParams> layers_;
  std::vector<std::pair<std::size_t, GatedCrossParams>> cross_;  // (layer, params)
  Tensor ln_f_gain_, ln_f_bias_, head_;
};

// Mean cross-entropy of ids[answer_start..] given the preceding positions.
Tensor answer_loss(const Tensor& logits, std::span<const int> ids, std::size_t answer_start);
// Mean next-token cross-entropy over the whole sequence.
Tensor sequence_loss(const Tensor& logits, std::span<const int> ids);

// Greedy continuation of `prompt`; stops at EOS (not included), after
// `max_new` tokens, or at max_seq.
std::vector<int> generate(const FusionLM& lm, std::span<const int> prompt, const Tensor* z,
                          std::size_t max_new);

struct PretrainOptions {
  std::size_t epochs = 3;
  double learning_rate = 1e-3;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
};

// Trains a fresh text-only decoder on `sequences` (each BOS ... EOS) and
// returns its parameters with the "lm" group frozen.
ParameterStore pretrain_text_lm(std::span<const std::vector<int>> sequences,
                                const LMConfig& config, std::size_t vocab_size,
                                const PretrainOptions& options);

// exp(mean next-token cross-entropy) over the sequences, text-only.
double perplexity(const FusionLM& lm, std::span<const std::vector<int>> sequences);

}  // namespace auscqa

#endif  // AUSCQA_LM_HPP_
