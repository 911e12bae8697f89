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

#include "auscqa/lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "auscqa/error.hpp"
#include "auscqa/ops.hpp"
#include "auscqa/text.hpp"

namespace auscqa {
namespace {

std::string layer_name(const char* prefix, std::size_t i, const char* leaf) {
  return std::string(prefix) + ".layer" + std::to_string(i) + "." + leaf;
}

class Registrar {
 public:
  Registrar(ParameterStore& store, Rng& rng, const char* group)
      : store_(store), rng_(rng), group_(group) {}
  void normal(const std::string& name, Shape shape, double sd) {
    const std::size_t n = shape_numel(shape);
    store_.add(name, group_, Tensor::parameter(std::move(shape), normal_values(rng_, n, sd)));
  }
  void constant(const std::string& name, Shape shape, double v) {
    const std::size_t n = shape_numel(shape);
    store_.add(name, group_, Tensor::parameter(std::move(shape), std::vector<double>(n, v)));
  }

 private:
  ParameterStore& store_;
  Rng& rng_;
  const char* group_;
};

AttentionParams get_attn(const ParameterStore& s, const char* prefix, std::size_t i) {
  return {s.get(layer_name(prefix, i, "attn.wq")), s.get(layer_name(prefix, i, "attn.wk")),
          s.get(layer_name(prefix, i, "attn.wv")), s.get(layer_name(prefix, i, "attn.wo"))};
}

Tensor ffn(const Tensor& h, const Tensor& w1, const Tensor& b1, const Tensor& w2,
           const Tensor& b2) {
  Tensor u = ops::gelu(ops::add_rowvec(ops::matmul(h, w1), b1));
  return ops::add_rowvec(ops::matmul(u, w2), b2);
}

void check_config(const LMConfig& c) {
  if (c.n_layers == 0 || c.d_model == 0 || c.n_heads == 0 || c.d_ffn == 0 || c.max_seq == 0) {
    fail(ErrorKind::kUsage, "LM sizes must be positive");
  }
  if (c.d_model % c.n_heads != 0) {
    fail(ErrorKind::kUsage, "d_model " + std::to_string(c.d_model) +
                                " is not divisible by n_heads " + std::to_string(c.n_heads));
  }
  if (c.cross_attn_every == 0) fail(ErrorKind::kUsage, "cross_attn_every must be positive");
}

}  // namespace

Tensor causal_self_attention(const Tensor& h, const AttentionParams& p, std::size_t n_heads) {
  const std::size_t d = p.wq.dim(1);
  const std::size_t dk = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  Tensor q = ops::matmul(h, p.wq);
  Tensor k = ops::matmul(h, p.wk);
  Tensor v = ops::matmul(h, p.wv);
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t i = 0; i < n_heads; ++i) {
    Tensor qh = n_heads == 1 ? q : ops::slice_cols(q, i * dk, dk);
    Tensor kh = n_heads == 1 ? k : ops::slice_cols(k, i * dk, dk);
    Tensor vh = n_heads == 1 ? v : ops::slice_cols(v, i * dk, dk);
    Tensor s = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    heads.push_back(ops::matmul(ops::softmax_lastdim(ops::mask_causal(s)), vh));
  }
  Tensor cat = n_heads == 1 ? heads[0] : ops::concat_cols(heads);
  return ops::matmul(cat, p.wo);
}

Tensor gated_cross_block(const Tensor& h, const Tensor& z, const GatedCrossParams& p,
                         std::size_t n_heads) {
  Tensor gate = ops::tanh(p.alpha);
  Tensor q = ops::layernorm(h, p.ln_q_gain, p.ln_q_bias);
  Tensor kv = ops::layernorm(z, p.ln_kv_gain, p.ln_kv_bias);
  const std::vector<char> all(z.dim(0), 1);
  Tensor out = ops::add(h, ops::scale_by(cross_attend(q, kv, all, p.attn, n_heads), gate));
  Tensor f = ffn(ops::layernorm(out, p.ln_ff_gain, p.ln_ff_bias), p.w1, p.b1, p.w2, p.b2);
  return ops::add(out, ops::scale_by(f, gate));
}

void FusionLM::add_lm_params(const LMConfig& c, std::size_t vocab_size, ParameterStore& store,
                             Rng& rng) {
  check_config(c);
  if (vocab_size <= static_cast<std::size_t>(kNumSpecials)) {
    fail(ErrorKind::kUsage, "vocabulary holds only special tokens");
  }
  Registrar r(store, rng, kGroupLm);
  const double sd = 1.0 / std::sqrt(static_cast<double>(c.d_model));
  const double sd_out = sd / std::sqrt(2.0 * static_cast<double>(c.n_layers));
  r.normal("lm.tok_emb", {vocab_size, c.d_model}, 0.1);
  r.normal("lm.pos_emb", {c.max_seq, c.d_model}, 0.02);
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    r.constant(layer_name("lm", i, "ln1_gain"), {c.d_model}, 1.0);
    r.constant(layer_name("lm", i, "ln1_bias"), {c.d_model}, 0.0);
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv"}) {
      r.normal(layer_name("lm", i, w), {c.d_model, c.d_model}, sd);
    }
    r.normal(layer_name("lm", i, "attn.wo"), {c.d_model, c.d_model}, sd_out);
    r.constant(layer_name("lm", i, "ln2_gain"), {c.d_model}, 1.0);
    r.constant(layer_name("lm", i, "ln2_bias"), {c.d_model}, 0.0);
    r.normal(layer_name("lm", i, "ffn.w1"), {c.d_model, c.d_ffn}, sd);
    r.constant(layer_name("lm", i, "ffn.b1"), {c.d_ffn}, 0.0);
    r.normal(layer_name("lm", i, "ffn.w2"), {c.d_ffn, c.d_model},
             1.0 / std::sqrt(static_cast<double>(c.d_ffn) * 2.0 * static_cast<double>(c.n_layers)));
    r.constant(layer_name("lm", i, "ffn.b2"), {c.d_model}, 0.0);
  }
  r.constant("lm.ln_f_gain", {c.d_model}, 1.0);
  r.constant("lm.ln_f_bias", {c.d_model}, 0.0);
  r.normal("lm.head", {c.d_model, vocab_size}, sd);
}

void FusionLM::add_cross_params(const LMConfig& c, ParameterStore& store, Rng& rng) {
  check_config(c);
  Registrar r(store, rng, kGroupAdapter);
  const double sd = 1.0 / std::sqrt(static_cast<double>(c.d_model));
  for (std::size_t i = 0; i < c.n_layers; i += c.cross_attn_every) {
    r.constant(layer_name("xattn", i, "alpha"), {1}, 0.0);
    for (const char* ln : {"ln_q", "ln_kv", "ln_ff"}) {
      r.constant(layer_name("xattn", i, (std::string(ln) + "_gain").c_str()), {c.d_model}, 1.0);
      r.constant(layer_name("xattn", i, (std::string(ln) + "_bias").c_str()), {c.d_model}, 0.0);
    }
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
      r.normal(layer_name("xattn", i, w), {c.d_model, c.d_model}, sd);
    }
    r.normal(layer_name("xattn", i, "ffn.w1"), {c.d_model, c.d_ffn}, sd);
    r.constant(layer_name("xattn", i, "ffn.b1"), {c.d_ffn}, 0.0);
    r.normal(layer_name("xattn", i, "ffn.w2"), {c.d_ffn, c.d_model},
             1.0 / std::sqrt(static_cast<double>(c.d_ffn)));
    r.constant(layer_name("xattn", i, "ffn.b2"), {c.d_model}, 0.0);
  }
}

FusionLM::FusionLM(const LMConfig& c, const ParameterStore& s) : config_(c) {
  check_config(c);
  tok_emb_ = s.get("lm.tok_emb");
  pos_emb_ = s.get("lm.pos_emb");
  vocab_size_ = tok_emb_.dim(0);
  if (tok_emb_.dim(1) != c.d_model || pos_emb_.dim(0) != c.max_seq) {
    shape_error("stored embeddings " + shape_str(tok_emb_.shape()) + " / " +
                shape_str(pos_emb_.shape()) + " do not match the LM config");
  }
  for (std::size_t i = 0; i < c.n_layers; ++i) {
    DecoderLayerParams l;
    l.ln1_gain = s.get(layer_name("lm", i, "ln1_gain"));
    l.ln1_bias = s.get(layer_name("lm", i, "ln1_bias"));
    l.attn = get_attn(s, "lm", i);
    l.ln2_gain = s.get(layer_name("lm", i, "ln2_gain"));
    l.ln2_bias = s.get(layer_name("lm", i, "ln2_bias"));
    l.w1 = s.get(layer_name("lm", i, "ffn.w1"));
    l.b1 = s.get(layer_name("lm", i, "ffn.b1"));
    l.w2 = s.get(layer_name("lm", i, "ffn.w2"));
    l.b2 = s.get(layer_name("lm", i, "ffn.b2"));
    layers_.push_back(std::move(l));
    if (i % c.cross_attn_every != 0 || !s.contains(layer_name("xattn", i, "alpha"))) continue;
    GatedCrossParams x;
    x.alpha = s.get(layer_name("xattn", i, "alpha"));
    x.ln_q_gain = s.get(layer_name("xattn", i, "ln_q_gain"));
    x.ln_q_bias = s.get(layer_name("xattn", i, "ln_q_bias"));
    x.ln_kv_gain = s.get(layer_name("xattn", i, "ln_kv_gain"));
    x.ln_kv_bias = s.get(layer_name("xattn", i, "ln_kv_bias"));
    x.attn = get_attn(s, "xattn", i);
    x.ln_ff_gain = s.get(layer_name("xattn", i, "ln_ff_gain"));
    x.ln_ff_bias = s.get(layer_name("xattn", i, "ln_ff_bias"));
    x.w1 = s.get(layer_name("xattn", i, "ffn.w1"));
    x.b1 = s.get(layer_name("xattn", i, "ffn.b1"));
    x.w2 = s.get(layer_name("xattn", i, "ffn.w2"));
    x.b2 = s.get(layer_name("xattn", i, "ffn.b2"));
    cross_.emplace_back(i, std::move(x));
  }
  ln_f_gain_ = s.get("lm.ln_f_gain");
  ln_f_bias_ = s.get("lm.ln_f_bias");
  head_ = s.get("lm.head");
}

Tensor FusionLM::forward(std::span<const int> ids, const Tensor* z) const {
  if (ids.empty()) fail(ErrorKind::kUsage, "empty token sequence");
  if (ids.size() > config_.max_seq) {
    fail(ErrorKind::kData, "sequence of " + std::to_string(ids.size()) +
                               " tokens exceeds max_seq " + std::to_string(config_.max_seq));
  }
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
      fail(ErrorKind::kUsage, "token id " + std::to_string(id) + " out of range");
    }
  }
  if (z && !cross_.empty() && (z->rank() != 2 || z->dim(1) != config_.d_model)) {
    shape_error("latents " + shape_str(z->shape()) + " for d_model " +
                std::to_string(config_.d_model));
  }
  Tensor h = ops::add(ops::gather_rows(tok_emb_, ids),
                      ops::slice_rows(pos_emb_, 0, ids.size()));
  auto next_cross = cross_.begin();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (next_cross != cross_.end() && next_cross->first == i) {
      if (z) h = gated_cross_block(h, *z, next_cross->second, config_.n_heads);
      ++next_cross;
    }
    const auto& l = layers_[i];
    h = ops::add(h, causal_self_attention(ops::layernorm(h, l.ln1_gain, l.ln1_bias), l.attn,
                                          config_.n_heads));
    h = ops::add(h, ffn(ops::layernorm(h, l.ln2_gain, l.ln2_bias), l.w1, l.b1, l.w2, l.b2));
  }
  return ops::matmul(ops::layernorm(h, ln_f_gain_, ln_f_bias_), head_);
}

std::vector<double> FusionLM::gates() const {
  std::vector<double> g;
  for (const auto& [layer, x] : cross_) g.push_back(std::tanh(x.alpha.item()));
  return g;
}

Tensor answer_loss(const Tensor& logits, std::span<const int> ids, std::size_t answer_start) {
  if (answer_start == 0 || answer_start >= ids.size() || logits.dim(0) != ids.size()) {
    fail(ErrorKind::kUsage, "answer span [" + std::to_string(answer_start) + ", " +
                                std::to_string(ids.size()) + ") is empty or misaligned");
  }
  std::vector<std::size_t> pos;
  std::vector<int> tgt;
  for (std::size_t t = answer_start; t < ids.size(); ++t) {
    if (ids[t] == kPadId) continue;
    pos.push_back(t - 1);
    tgt.push_back(ids[t]);
  }
  return ops::cross_entropy(logits, pos, tgt);
}

Tensor sequence_loss(const Tensor& logits, std::span<const int> ids) {
  return answer_loss(logits, ids, 1);
}

std::vector<int> generate(const FusionLM& lm, std::span<const int> prompt, const Tensor* z,
                          std::size_t max_new) {
  std::vector<int> seq(prompt.begin(), prompt.end());
  std::vector<int> out;
  while (out.size() < max_new && seq.size() < lm.config().max_seq) {
    Tensor logits = lm.forward(seq, z);
    const std::size_t v = logits.dim(1);
    const auto row = logits.values().subspan((seq.size() - 1) * v, v);
    const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == kEosId) break;
    out.push_back(best);
    seq.push_back(best);
  }
  return out;
}

ParameterStore pretrain_text_lm(std::span<const std::vector<int>> sequences,
                                const LMConfig& config, std::size_t vocab_size,
                                const PretrainOptions& options) {
  if (sequences.empty()) fail(ErrorKind::kData, "no pretraining sequences");
  ParameterStore store;
  Rng rng(options.seed);
  FusionLM::add_lm_params(config, vocab_size, store, rng);
  FusionLM lm(config, store);
  AdamW opt;
  auto groups = make_groups(store, {{kGroupLm, options.learning_rate}});
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, options.batch);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      store.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& ids = sequences[order[i]];
        Tensor loss = ops::scale(sequence_loss(lm.forward(ids, nullptr), ids),
                                 1.0 / static_cast<double>(end - start));
        backward(loss);
      }
      clip_grad_norm(groups, 1.0);
      opt.step(groups);
    }
  }
  store.zero_grad();
  store.set_frozen(kGroupLm, true);
  return store;
}

double perplexity(const FusionLM& lm, std::span<const std::vector<int>> sequences) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& ids : sequences) {
    const double n = static_cast<double>(ids.size() - 1);
    total += sequence_loss(lm.forward(ids, nullptr), ids).item() * n;
    count += ids.size() - 1;
  }
  if (count == 0) fail(ErrorKind::kData, "no tokens to score");
  return std::exp(total / static_cast<double>(count));
}

}  // namespace auscqa
