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

// Multi-instance bag assembly and the latent-query cross-attention
// resampler that compresses a bag into K vectors.

#ifndef AUSCQA_RESAMPLER_HPP_
#define AUSCQA_RESAMPLER_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "auscqa/encoders.hpp"
#include "auscqa/optim.hpp"
#include "auscqa/tensor.hpp"

namespace auscqa {

// x is [(M * n_max) x D]; rows whose mask entry is 0 are exactly zero.
struct BagMatrix {
  Tensor x;
  std::vector<char> mask;
  std::vector<std::size_t> clip_offsets;
  std::size_t n_max = 0;
};

// Pads each clip to the longest one with zero rows and stacks them in order.
// Masked rows inside a clip are zeroed as well.
BagMatrix assemble_bag(std::span<const TokenSequence> seqs);

struct LatentBundle {
  Tensor z;  // [K x D]
  std::size_t k = 0;
};

struct ResamplerConfig {
  std::size_t num_latents = 64;
  std::size_t n_heads = 4;
  std::size_t depth = 1;
  bool feedforward = true;
  std::size_t ffn_mult = 4;
};

// Projection matrices are [D x D]; there are no biases.
struct AttentionParams {
  Tensor wq, wk, wv, wo;
};

struct ResamplerBlockParams {
  AttentionParams attn;
  Tensor ln_gain, ln_bias;  // [D]
  Tensor w1, b1;            // [D x F], [F]
  Tensor w2, b2;            // [F x D], [D]
};

struct ResamplerParams {
  Tensor latents;  // [K x D]
  std::vector<ResamplerBlockParams> blocks;
};

// Masked multi-head cross-attention: for each head h,
//   softmax(Q_h K_h^T / sqrt(D / heads)) V_h with Q = queries Wq,
// K = x Wk, V = x Wv; masked keys get -inf scores. Heads are concatenated
// and multiplied by Wo. Throws if every key is masked.
Tensor cross_attend(const Tensor& queries, const Tensor& x, std::span<const char> mask,
                    const AttentionParams& params, std::size_t n_heads);

// Block 0 replaces the latents with their attention readout; later blocks
// add it residually. With feedforward on, each block then applies
// Z += W2 gelu(W1 LN(Z) + b1) + b2.
LatentBundle resample(const BagMatrix& bag, const ResamplerParams& params,
                      const ResamplerConfig& config);

// Owns handles to the "adapter"-group parameters named resampler.*.
class PerceiverResampler {
 public:
  PerceiverResampler(const ResamplerConfig& config, std::size_t d_model,
                     ParameterStore& store, Rng& rng);
  PerceiverResampler(const ResamplerConfig& config, const ParameterStore& store);

  const ResamplerConfig& config() const { return config_; }
  const ResamplerParams& params() const { return params_; }
  LatentBundle operator()(const BagMatrix& bag) const { return resample(bag, params_, config_); }

 private:
  ResamplerConfig config_;
  ResamplerParams params_;
};

}  // namespace auscqa

#endif  // AUSCQA_RESAMPLER_HPP_
