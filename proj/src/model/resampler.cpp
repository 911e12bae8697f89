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

#include "auscqa/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "auscqa/error.hpp"
#include "auscqa/ops.hpp"

namespace auscqa {
namespace {

std::string block_name(std::size_t i, const char* leaf) {
  return "resampler.block" + std::to_string(i) + "." + leaf;
}

Tensor add_normal(ParameterStore& store, Rng& rng, const std::string& name, Shape shape,
                  double stddev) {
  const std::size_t n = shape_numel(shape);
  return store.add(name, kGroupAdapter,
                   Tensor::parameter(std::move(shape), normal_values(rng, n, stddev)));
}

Tensor add_const(ParameterStore& store, const std::string& name, Shape shape, double v) {
  const std::size_t n = shape_numel(shape);
  return store.add(name, kGroupAdapter,
                   Tensor::parameter(std::move(shape), std::vector<double>(n, v)));
}

}  // namespace

BagMatrix assemble_bag(std::span<const TokenSequence> seqs) {
  if (seqs.empty()) fail(ErrorKind::kData, "cannot assemble an empty bag");
  const std::size_t width = seqs[0].tokens.rank() == 2 ? seqs[0].tokens.dim(1) : 0;
  std::size_t n_max = 0;
  for (const auto& s : seqs) {
    if (s.tokens.rank() != 2 || s.tokens.dim(1) != width || s.tokens.dim(0) != s.mask.size()) {
      shape_error("bag clip tokens " + shape_str(s.tokens.shape()) + " (expected width " +
                  std::to_string(width) + ", " + std::to_string(s.mask.size()) + " rows)");
    }
    n_max = std::max(n_max, s.size());
  }
  if (n_max == 0) fail(ErrorKind::kData, "bag holds no tokens");

  BagMatrix bag;
  bag.n_max = n_max;
  std::vector<Tensor> parts;
  for (const auto& s : seqs) {
    bag.clip_offsets.push_back(bag.mask.size());
    const std::size_t n = s.size();
    std::vector<double> keep(n * width);
    for (std::size_t r = 0; r < n; ++r) {
      std::fill_n(keep.begin() + static_cast<std::ptrdiff_t>(r * width), width,
                  s.mask[r] ? 1.0 : 0.0);
    }
    parts.push_back(ops::mul(s.tokens, Tensor({n, width}, std::move(keep))));
    bag.mask.insert(bag.mask.end(), s.mask.begin(), s.mask.end());
    if (n < n_max) {
      parts.push_back(Tensor({n_max - n, width}));
      bag.mask.insert(bag.mask.end(), n_max - n, 0);
    }
  }
  bag.x = parts.size() == 1 ? parts[0] : ops::concat_rows(parts);
  return bag;
}

Tensor cross_attend(const Tensor& queries, const Tensor& x, std::span<const char> mask,
                    const AttentionParams& params, std::size_t n_heads) {
  if (x.rank() != 2 || mask.size() != x.dim(0)) {
    shape_error("attention keys " + shape_str(x.shape()) + " with " +
                std::to_string(mask.size()) + " mask entries");
  }
  if (std::none_of(mask.begin(), mask.end(), [](char m) { return m != 0; })) {
    fail(ErrorKind::kData, "every key in the bag is masked");
  }
  const std::size_t d = params.wq.dim(1);
  if (n_heads == 0 || d % n_heads != 0) {
    fail(ErrorKind::kUsage, "width " + std::to_string(d) + " is not divisible by " +
                                std::to_string(n_heads) + " heads");
  }
  const std::size_t dk = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  Tensor q = ops::matmul(queries, params.wq);
  Tensor k = ops::matmul(x, params.wk);
  Tensor v = ops::matmul(x, params.wv);
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    Tensor qh = n_heads == 1 ? q : ops::slice_cols(q, h * dk, dk);
    Tensor kh = n_heads == 1 ? k : ops::slice_cols(k, h * dk, dk);
    Tensor vh = n_heads == 1 ? v : ops::slice_cols(v, h * dk, dk);
    Tensor scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    Tensor probs = ops::softmax_lastdim(ops::mask_columns(scores, mask));
    heads.push_back(ops::matmul(probs, vh));
  }
  Tensor cat = n_heads == 1 ? heads[0] : ops::concat_cols(heads);
  return ops::matmul(cat, params.wo);
}

LatentBundle resample(const BagMatrix& bag, const ResamplerParams& params,
                      const ResamplerConfig& config) {
  if (params.blocks.empty()) fail(ErrorKind::kUsage, "resampler has no blocks");
  if (bag.x.rank() != 2 || bag.x.dim(1) != params.latents.dim(1)) {
    shape_error("bag " + shape_str(bag.x.shape()) + " vs latents " +
                shape_str(params.latents.shape()));
  }
  Tensor z = params.latents;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const auto& blk = params.blocks[b];
    Tensor read = cross_attend(z, bag.x, bag.mask, blk.attn, config.n_heads);
    z = b == 0 ? read : ops::add(z, read);
    if (config.feedforward) {
      Tensor h = ops::layernorm(z, blk.ln_gain, blk.ln_bias);
      h = ops::gelu(ops::add_rowvec(ops::matmul(h, blk.w1), blk.b1));
      z = ops::add(z, ops::add_rowvec(ops::matmul(h, blk.w2), blk.b2));
    }
  }
  return LatentBundle{z, z.dim(0)};
}

PerceiverResampler::PerceiverResampler(const ResamplerConfig& config, std::size_t d_model,
                                       ParameterStore& store, Rng& rng)
    : config_(config) {
  if (config.depth == 0 || config.num_latents == 0) {
    fail(ErrorKind::kUsage, "resampler depth and latent count must be positive");
  }
  const double sd = 1.0 / std::sqrt(static_cast<double>(d_model));
  const std::size_t f = config.ffn_mult * d_model;
  add_normal(store, rng, "resampler.latents", {config.num_latents, d_model}, 1.0);
  for (std::size_t b = 0; b < config.depth; ++b) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
      add_normal(store, rng, block_name(b, w), {d_model, d_model}, sd);
    }
    if (config.feedforward) {
      add_const(store, block_name(b, "ln_gain"), {d_model}, 1.0);
      add_const(store, block_name(b, "ln_bias"), {d_model}, 0.0);
      add_normal(store, rng, block_name(b, "w1"), {d_model, f}, sd);
      add_const(store, block_name(b, "b1"), {f}, 0.0);
      add_normal(store, rng, block_name(b, "w2"), {f, d_model},
                 1.0 / std::sqrt(static_cast<double>(f)));
      add_const(store, block_name(b, "b2"), {d_model}, 0.0);
    }
  }
  *this = PerceiverResampler(config, store);
}

PerceiverResampler::PerceiverResampler(const ResamplerConfig& config,
                                       const ParameterStore& store)
    : config_(config) {
  params_.latents = store.get("resampler.latents");
  if (params_.latents.dim(0) != config.num_latents) {
    shape_error("stored latents " + shape_str(params_.latents.shape()) + " for K=" +
                std::to_string(config.num_latents));
  }
  for (std::size_t b = 0; b < config.depth; ++b) {
    ResamplerBlockParams blk;
    blk.attn = {store.get(block_name(b, "wq")), store.get(block_name(b, "wk")),
                store.get(block_name(b, "wv")), store.get(block_name(b, "wo"))};
    if (config.feedforward) {
      blk.ln_gain = store.get(block_name(b, "ln_gain"));
      blk.ln_bias = store.get(block_name(b, "ln_bias"));
      blk.w1 = store.get(block_name(b, "w1"));
      blk.b1 = store.get(block_name(b, "b1"));
      blk.w2 = store.get(block_name(b, "w2"));
      blk.b2 = store.get(block_name(b, "b2"));
    }
    params_.blocks.push_back(std::move(blk));
  }
}

}  // namespace auscqa
