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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "auscqa/checkpoint.hpp"
#include "auscqa/error.hpp"
#include "auscqa/lm.hpp"
#include "auscqa/ops.hpp"
#include "auscqa/text.hpp"
#include "gradcheck.hpp"
#include "gtest/gtest.h"

namespace auscqa {
namespace {

namespace fs = std::filesystem;
using testing::grad_check;

std::vector<std::string> toy_corpus() {
  std::vector<std::string> lines;
  const std::vector<std::string> sites = {"av", "mv"};
  for (const char* q : {"is a murmur present?", "which site shows the abnormality?"}) {
    for (const char* a : {"yes", "no", "mitral", "aortic"}) {
      lines.push_back(prompt_text(sites, q) + " " + a);
    }
  }
  return lines;
}

LMConfig tiny_config() {
  LMConfig c;
  c.n_layers = 2;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ffn = 16;
  c.max_seq = 48;
  return c;
}

struct TinyModel {
  TextVocab vocab;
  ParameterStore store;
  LMConfig config;
};

TinyModel make_model(std::uint64_t seed, bool cross = true) {
  TinyModel m{TextVocab::build(toy_corpus()), {}, tiny_config()};
  Rng rng(seed);
  FusionLM::add_lm_params(m.config, m.vocab.size(), m.store, rng);
  if (cross) FusionLM::add_cross_params(m.config, m.store, rng);
  return m;
}

Tensor random_z(Rng& rng, std::size_t k, std::size_t d, double sd = 1.0) {
  return Tensor({k, d}, normal_values(rng, k * d, sd));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (std::memcmp(&a.values()[i], &b.values()[i], sizeof(double)) != 0) return false;
  return true;
}

TEST(VocabTest, MinFrequencyAndDeterminism) {
  std::vector<std::string> corpus = {"a a b"};
  auto v = TextVocab::build(corpus);
  EXPECT_NE(v.id("a"), kUnkId);
  EXPECT_EQ(v.id("b"), kUnkId);
  EXPECT_EQ(v.size(), 6u);
  auto v2 = TextVocab::build(corpus);
  EXPECT_EQ(v.words(), v2.words());
  EXPECT_EQ(v.id(kAudioToken), kAudioId);
  EXPECT_EQ(v.encode("<AUDIO> A"), (std::vector<int>{kAudioId, v.id("a")}));
  EXPECT_THROW(TextVocab::build(std::vector<std::string>{}), Error);
}

TEST(VocabTest, OrderingIsFrequencyThenLexicographic) {
  std::vector<std::string> corpus = {"c c b b a a a"};
  auto v = TextVocab::build(corpus);
  EXPECT_EQ(v.word(kNumSpecials), "a");
  EXPECT_EQ(v.word(kNumSpecials + 1), "b");
  EXPECT_EQ(v.word(kNumSpecials + 2), "c");
  EXPECT_EQ(TextVocab::from_words(v.words()).words(), v.words());
}

TEST(PromptTest, OneAudioTokenPerClipFollowedBySite) {
  auto vocab = TextVocab::build(toy_corpus());
  std::vector<std::string> sites = {"AV", "MV"};
  Prompt p = assemble_prompt(vocab, sites, "is a murmur present?", 64);
  EXPECT_EQ(p.ids.front(), kBosId);
  std::vector<std::size_t> audio_at;
  for (std::size_t i = 0; i < p.ids.size(); ++i)
    if (p.ids[i] == kAudioId) audio_at.push_back(i);
  ASSERT_EQ(audio_at.size(), 2u);
  EXPECT_EQ(p.ids[audio_at[0] + 1], vocab.id("av"));
  EXPECT_EQ(p.ids[audio_at[1] + 1], vocab.id("mv"));
  EXPECT_EQ(p.answer_start, p.ids.size());
  EXPECT_EQ(p.ids[p.answer_start - 1], vocab.id("answer:"));
  EXPECT_THROW(assemble_prompt(vocab, sites, "   ", 64), Error);
  EXPECT_THROW(assemble_prompt(vocab, sites, "is a murmur present?", 10), Error);
  EXPECT_THROW(assemble_prompt(vocab, std::vector<std::string>{}, "q", 64), Error);

  Prompt ex = assemble_example(vocab, sites, "is a murmur present?", "yes", 64);
  EXPECT_EQ(ex.answer_start, p.answer_start);
  EXPECT_EQ(ex.ids[ex.answer_start], vocab.id("yes"));
  EXPECT_EQ(ex.ids.back(), kEosId);
}

TEST(LossTest, UniformLogitsGiveLogVocab) {
  Tensor logits({3, 7});
  std::vector<int> ids = {1, 5, 6};
  EXPECT_NEAR(answer_loss(logits, ids, 1).item(), std::log(7.0), 1e-15);
}

TEST(LossTest, ConfidentCorrectLogitsGiveNearZero) {
  std::vector<double> v(3 * 4, 0.0);
  v[0 * 4 + 2] = 50.0;
  v[1 * 4 + 3] = 50.0;
  std::vector<int> ids = {1, 2, 3};
  EXPECT_LT(answer_loss(Tensor({3, 4}, v), ids, 1).item(), 1e-20);
}

TEST(LossTest, HandComputedTwoTokenAnswer) {
  // Row 0 targets id 1 with p = 2/4; row 1 targets id 2 with p = 3/5.
  Tensor logits({3, 3}, {0.0, std::log(2.0), 0.0, 0.0, 0.0, std::log(3.0), 0.0, 0.0, 0.0});
  std::vector<int> ids = {2, 1, 2};
  const double expect = (std::log(2.0) + std::log(5.0 / 3.0)) / 2.0;
  EXPECT_NEAR(answer_loss(logits, ids, 1).item(), expect, 1e-15);
  // Only the answer span counts.
  EXPECT_NEAR(answer_loss(logits, ids, 2).item(), std::log(5.0 / 3.0), 1e-15);
}

TEST(FusionLMTest, GateZeroIsBitIdenticalToTextOnly) {
  TinyModel m = make_model(1);
  FusionLM lm(m.config, m.store);
  ASSERT_TRUE(lm.has_cross());
  Rng rng(2);
  std::vector<std::string> sites = {"AV", "MV"};
  Prompt p = assemble_prompt(m.vocab, sites, "is a murmur present?", 48);
  Tensor text = lm.forward(p.ids, nullptr);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor z = random_z(rng, 3, 8, 10.0);
    EXPECT_TRUE(bit_equal(text, lm.forward(p.ids, &z)));
  }
  for (double g : lm.gates()) EXPECT_EQ(g, 0.0);
}

TEST(FusionLMTest, NonzeroGateUsesLatents) {
  TinyModel m = make_model(3);
  FusionLM lm(m.config, m.store);
  m.store.get("xattn.layer0.alpha").mutable_values()[0] = 0.5;
  Rng rng(4);
  std::vector<std::string> sites = {"AV"};
  Prompt p = assemble_prompt(m.vocab, sites, "is a murmur present?", 48);
  Tensor z1 = random_z(rng, 3, 8), z2 = random_z(rng, 3, 8);
  EXPECT_FALSE(bit_equal(lm.forward(p.ids, &z1), lm.forward(p.ids, &z2)));
  for (double g : lm.gates()) {
    EXPECT_GT(g, -1.0);
    EXPECT_LT(g, 1.0);
  }
}

TEST(FusionLMTest, CausalityHolds) {
  TinyModel m = make_model(5);
  m.store.get("xattn.layer1.alpha").mutable_values()[0] = -0.7;
  FusionLM lm(m.config, m.store);
  Rng rng(6);
  Tensor z = random_z(rng, 2, 8);
  std::vector<int> a = {1, 7, 8, 9, 10, 11};
  std::vector<int> b = a;
  b[4] = 12;
  b[5] = 6;
  Tensor la = lm.forward(a, &z), lb = lm.forward(b, &z);
  const std::size_t v = la.dim(1);
  for (std::size_t i = 0; i < 4 * v; ++i) EXPECT_EQ(la[i], lb[i]);
  bool changed = false;
  for (std::size_t i = 4 * v; i < 6 * v; ++i) changed |= la[i] != lb[i];
  EXPECT_TRUE(changed);
}

TEST(FusionLMTest, GradientsMatchFiniteDifferences) {
  TinyModel m = make_model(7);
  m.store.get("xattn.layer0.alpha").mutable_values()[0] = 0.4;
  m.store.get("xattn.layer1.alpha").mutable_values()[0] = -0.3;
  m.store.set_frozen(kGroupLm, false);
  FusionLM lm(m.config, m.store);
  Rng rng(8);
  Tensor z = Tensor::parameter({3, 8}, normal_values(rng, 24, 1.0));
  std::vector<std::string> sites = {"AV"};
  Prompt ex = assemble_example(m.vocab, sites, "is a murmur present?", "yes", 48);
  auto loss = [&] { return answer_loss(lm.forward(ex.ids, &z), ex.ids, ex.answer_start); };
  std::vector<Tensor> leaves = {z};
  for (const auto& p : m.store.params()) leaves.push_back(p.tensor);
  auto res = grad_check(loss, leaves, 16);
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST(GenerateTest, GreedyDecodingContracts) {
  TinyModel m = make_model(9);
  FusionLM lm(m.config, m.store);
  Rng rng(10);
  Tensor z = random_z(rng, 3, 8);
  std::vector<std::string> sites = {"MV"};
  Prompt p = assemble_prompt(m.vocab, sites, "which site shows the abnormality?", 48);
  EXPECT_TRUE(generate(lm, p.ids, &z, 0).empty());
  auto a = generate(lm, p.ids, &z, 5);
  EXPECT_EQ(a, generate(lm, p.ids, &z, 5));
  EXPECT_EQ(a, generate(lm, p.ids, nullptr, 5));
  EXPECT_LE(a.size(), 5u);
}

TEST(PretrainTest, LowersPerplexityAndFreezes) {
  auto vocab = TextVocab::build(toy_corpus());
  std::vector<std::vector<int>> seqs;
  for (const auto& line : toy_corpus()) {
    std::vector<int> ids = {kBosId};
    for (int i : vocab.encode(line)) ids.push_back(i);
    ids.push_back(kEosId);
    seqs.push_back(ids);
  }
  LMConfig c = tiny_config();
  PretrainOptions opt;
  opt.epochs = 0;
  ParameterStore init = pretrain_text_lm(seqs, c, vocab.size(), opt);
  opt.epochs = 15;
  ParameterStore trained = pretrain_text_lm(seqs, c, vocab.size(), opt);
  const double before = perplexity(FusionLM(c, init), seqs);
  const double after = perplexity(FusionLM(c, trained), seqs);
  EXPECT_LT(after, before);
  EXPECT_TRUE(trained.is_frozen(kGroupLm));
  for (const auto& p : trained.params()) EXPECT_FALSE(p.tensor.requires_grad()) << p.name;
}

TEST(CheckpointTest, RoundTripAndTamperDetection) {
  TinyModel m = make_model(11);
  m.store.set_frozen(kGroupLm, true);
  const fs::path path = fs::temp_directory_path() / "auscqa_lm_test.ckpt";
  nlohmann::json cfg = {{"d_model", 8}};
  save_checkpoint(path, cfg, m.vocab.words(), m.store);
  Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.config, cfg);
  EXPECT_EQ(ck.vocab, m.vocab.words());
  ASSERT_EQ(ck.store.params().size(), m.store.params().size());
  EXPECT_TRUE(ck.store.is_frozen(kGroupLm));
  EXPECT_FALSE(ck.store.is_frozen(kGroupAdapter));
  EXPECT_EQ(group_digest(ck.store, kGroupLm), group_digest(m.store, kGroupLm));
  EXPECT_EQ(group_digest(ck.store, kGroupAdapter), group_digest(m.store, kGroupAdapter));
  for (std::size_t i = 0; i < ck.store.params().size(); ++i) {
    EXPECT_EQ(ck.store.params()[i].name, m.store.params()[i].name);
    EXPECT_TRUE(bit_equal(ck.store.params()[i].tensor, m.store.params()[i].tensor));
  }

  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(static_cast<std::streamoff>(fs::file_size(path) - 100));
  f.put('\x7f');
  f.close();
  try {
    load_checkpoint(path);
    FAIL() << "expected a hash mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("hash mismatch"), std::string::npos);
  }
  fs::remove(path);
}

TEST(CheckpointTest, KnownDigest) {
  const std::string abc = "abc";
  std::vector<std::uint8_t> bytes(abc.begin(), abc.end());
  EXPECT_EQ(sha256_hex(bytes), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace auscqa
