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

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include "auscqa/encoders.hpp"
#include "auscqa/error.hpp"
#include "auscqa/ops.hpp"
#include "gradcheck.hpp"
#include "gtest/gtest.h"

namespace auscqa {
namespace {

namespace fs = std::filesystem;
using testing::grad_check;

AudioClip make_clip(std::size_t padded, std::size_t valid, double freq = 0.0) {
  AudioClip c;
  c.waveform.assign(padded, 0.0f);
  c.valid_len = valid;
  c.site = "AV";
  for (std::size_t i = 0; i < valid; ++i) {
    c.waveform[i] = static_cast<float>(
        freq > 0 ? std::sin(2.0 * M_PI * freq * static_cast<double>(i) / 16000.0)
                 : std::cos(0.37 * static_cast<double>(i)) * 0.8);
  }
  return c;
}

Tensor random_param(Rng& rng, Shape shape, double sd = 1.0) {
  const std::size_t n = shape_numel(shape);
  return Tensor::parameter(std::move(shape), normal_values(rng, n, sd));
}

TEST(RawTokenizerTest, ThirtySecondClipYields750Tokens) {
  ParameterStore store;
  Rng rng(1);
  EncoderConfig cfg;
  cfg.d_embed = 4;
  cfg.d_proj = 8;
  AcousticEncoder enc(cfg, store, rng);
  auto seq = enc.embed(make_clip(480000, 480000));
  EXPECT_EQ(seq.size(), 480000u / 640u);
  EXPECT_EQ(seq.n_valid, 750u);
  EXPECT_EQ(seq.tokens.shape(), (Shape{750, 4}));
  auto projected = enc.encode(make_clip(480000, 480000));
  EXPECT_EQ(projected.tokens.shape(), (Shape{750, 8}));
}

TEST(RawTokenizerTest, MaskMarksPatchesHoldingValidSamples) {
  RawTokenizerParams p{Tensor({2, 640}), Tensor({kMaxPositions, 2})};
  auto seq = tokenize_raw(make_clip(16640, 16160), p, 640);
  ASSERT_EQ(seq.size(), 26u);
  EXPECT_EQ(seq.n_valid, 26u);  // patch 25 holds samples 16000..16159
  auto seq2 = tokenize_raw(make_clip(16640, 16000), p, 640);
  EXPECT_EQ(seq2.n_valid, 25u);
  EXPECT_EQ(seq2.mask[24], 1);
  EXPECT_EQ(seq2.mask[25], 0);
  auto seq3 = tokenize_raw(make_clip(1280, 641), p, 640);
  EXPECT_EQ(seq3.n_valid, 2u);
}

TEST(RawTokenizerTest, ZeroInputsGiveZeroTokens) {
  Rng rng(2);
  RawTokenizerParams p{random_param(rng, {3, 640}), Tensor({kMaxPositions, 3})};
  AudioClip c;
  c.waveform.assign(1280, 0.0f);
  c.valid_len = 1280;
  auto seq = tokenize_raw(c, p, 640);
  for (double v : seq.tokens.values()) EXPECT_EQ(v, 0.0);
}

TEST(RawTokenizerTest, TokenIsPatchProjectionPlusPosition) {
  Rng rng(3);
  RawTokenizerParams p{random_param(rng, {3, 640}), random_param(rng, {kMaxPositions, 3})};
  AudioClip c = make_clip(1920, 1920);
  auto seq = tokenize_raw(c, p, 640);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 640; ++k) acc += c.waveform[n * 640 + k] * p.kernel[j * 640 + k];
      EXPECT_NEAR(seq.tokens[n * 3 + j], acc + p.positions[n * 3 + j], 1e-12);
    }
  }
}

TEST(RawTokenizerTest, Errors) {
  RawTokenizerParams p{Tensor({2, 640}), Tensor({kMaxPositions, 2})};
  EXPECT_THROW(tokenize_raw(make_clip(1000, 1000), p, 640), Error);
  try {
    tokenize_raw(make_clip(751 * 640, 751 * 640), p, 640);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
}

TEST(RawTokenizerTest, PositionsRestartForEveryClip) {
  ParameterStore store;
  Rng rng(4);
  EncoderConfig cfg;
  cfg.d_embed = 4;
  cfg.d_proj = 4;
  AcousticEncoder enc(cfg, store, rng);
  AudioClip a = make_clip(3200, 3000);
  AudioClip b = a;
  b.site = "MV";
  auto ta = enc.encode(a), tb = enc.encode(b);
  EXPECT_TRUE(std::equal(ta.tokens.values().begin(), ta.tokens.values().end(),
                         tb.tokens.values().begin()));
  EXPECT_EQ(ta.mask, tb.mask);
  for (const auto& p : store.params()) EXPECT_EQ(p.group, kGroupEncoder) << p.name;
}

// Independent HTK mel formulas for the filterbank oracle.
double oracle_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double oracle_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

TEST(MelTest, ScaleMatchesNaturalLogForm) {
  for (double f : {0.0, 100.0, 1000.0, 4000.0, 8000.0}) {
    EXPECT_NEAR(hz_to_mel(f), oracle_mel(f), 1e-5 * oracle_mel(f) + 1e-12);
    EXPECT_NEAR(mel_to_hz(hz_to_mel(f)), f, 1e-9);
  }
}

TEST(MelTest, SilenceHitsTheLogFloor) {
  MelOptions opt;
  std::vector<float> silence(4000, 0.0f);
  std::size_t frames = 0;
  auto s = log_mel_spectrogram(silence, opt, &frames);
  EXPECT_EQ(frames, (4000u - 400u) / 160u + 1u);
  for (double v : s) EXPECT_EQ(v, std::log(1e-10));
}

TEST(MelTest, PeakBinTracksToneFrequency) {
  MelOptions opt;
  const double m_hi = oracle_mel(8000.0);
  for (double tone : {500.0, 1000.0, 3000.0}) {
    AudioClip c = make_clip(16000, 16000, tone);
    std::size_t frames = 0;
    auto s = log_mel_spectrogram(c.waveform, opt, &frames);
    std::vector<double> avg(opt.n_mels, 0.0);
    for (std::size_t m = 0; m < opt.n_mels; ++m)
      for (std::size_t t = 0; t < frames; ++t) avg[m] += s[m * frames + t];
    const auto peak = static_cast<long>(std::max_element(avg.begin(), avg.end()) - avg.begin());
    long nearest = 0;
    double best = 1e30;
    for (std::size_t m = 0; m < opt.n_mels; ++m) {
      const double center = oracle_hz(m_hi * static_cast<double>(m + 1) / 81.0);
      if (std::abs(center - tone) < best) {
        best = std::abs(center - tone);
        nearest = static_cast<long>(m);
      }
    }
    EXPECT_LE(std::abs(peak - nearest), 1) << "tone " << tone;
  }
}

TEST(MelTest, SingleFrameMatchesDirectDft) {
  MelOptions opt;
  opt.n_mels = 4;
  AudioClip c = make_clip(400, 400);
  std::size_t frames = 0;
  auto s = log_mel_spectrogram(c.waveform, opt, &frames);
  ASSERT_EQ(frames, 1u);
  // Direct complex DFT of the windowed frame, then the triangular filters.
  std::vector<double> power(201);
  for (int k = 0; k <= 200; ++k) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < 400; ++i) {
      const double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / 400.0));
      acc += w * c.waveform[i] * std::polar(1.0, -2.0 * M_PI * k * i / 400.0);
    }
    power[k] = std::norm(acc);
  }
  const double top = oracle_mel(8000.0);
  for (int m = 0; m < 4; ++m) {
    const double lo = oracle_hz(top * m / 5.0), mid = oracle_hz(top * (m + 1) / 5.0),
                 hi = oracle_hz(top * (m + 2) / 5.0);
    double e = 0.0;
    for (int k = 0; k <= 200; ++k) {
      const double f = 40.0 * k;
      e += std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid))) * power[k];
    }
    EXPECT_NEAR(s[m], std::log(std::max(e, 1e-10)), 1e-6);
  }
}

TEST(MelTokenizerTest, ThirtySecondClipYields750Tokens) {
  ParameterStore store;
  Rng rng(5);
  EncoderConfig cfg;
  cfg.kind = EncoderKind::kMel;
  cfg.d_embed = 4;
  cfg.d_proj = 4;
  cfg.cnn_channels = 2;
  AcousticEncoder enc(cfg, store, rng);
  const std::size_t frames = (480000 - 400) / 160 + 1;
  const std::size_t expect = ((frames + 1) / 2 + 1) / 2;
  auto seq = enc.embed(make_clip(480000, 480000));
  EXPECT_EQ(expect, 750u);
  EXPECT_EQ(seq.size(), expect);
  EXPECT_EQ(seq.n_valid, 750u);
  auto short_seq = enc.embed(make_clip(16640, 16160));
  EXPECT_EQ(short_seq.size(), 26u);
  EXPECT_THROW(enc.embed(make_clip(399, 399)), Error);
}

TEST(ExternalStoreTest, PassthroughAndErrors) {
  const fs::path dir = fs::temp_directory_path() / "auscqa_embed_store_test";
  fs::remove_all(dir);
  std::vector<float> m(100 * 768);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<float>(i % 17) * 0.25f;
  EmbeddingStore::write(dir, "p1_av", 100, 768, m);
  auto store = EmbeddingStore::open(dir);
  auto seq = store.load("p1_av", 768);
  EXPECT_EQ(seq.size(), 100u);
  EXPECT_EQ(seq.tokens.shape(), (Shape{100, 768}));
  EXPECT_EQ(seq.tokens[5], m[5]);
  try {
    store.load("p1_av", 512);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUsage);
  }
  EXPECT_THROW(EmbeddingStore().load("p1_av", 768), Error);
  EXPECT_THROW(store.load("missing", 768), Error);
  fs::remove_all(dir);
}

TEST(ProjectionTest, ZeroWeightsGiveZeroTokens) {
  Rng rng(6);
  TokenSequence seq{random_param(rng, {5, 3}), {1, 1, 1, 0, 0}, "AV", 3};
  ProjectionParams p{Tensor({3}, {1, 1, 1}), Tensor({3}), Tensor({3, 4}), Tensor({4})};
  auto out = project(seq, p);
  EXPECT_EQ(out.tokens.shape(), (Shape{5, 4}));
  EXPECT_EQ(out.mask, seq.mask);
  EXPECT_EQ(out.n_valid, 3u);
  for (double v : out.tokens.values()) EXPECT_EQ(v, 0.0);
}

TEST(ProjectionTest, MatchesComposedOpsExactly) {
  Rng rng(7);
  TokenSequence seq{random_param(rng, {6, 4}), std::vector<char>(6, 1), "", 6};
  ProjectionParams p{random_param(rng, {4}), random_param(rng, {4}), random_param(rng, {4, 4}),
                     random_param(rng, {4})};
  auto out = project(seq, p);
  Tensor ref = ops::gelu(ops::add_rowvec(
      ops::matmul(ops::layernorm(seq.tokens, p.ln_gain, p.ln_bias), p.weight), p.bias));
  ASSERT_EQ(out.tokens.numel(), ref.numel());
  for (std::size_t i = 0; i < ref.numel(); ++i) EXPECT_EQ(out.tokens[i], ref[i]);
  EXPECT_THROW(project(TokenSequence{random_param(rng, {6, 5}), std::vector<char>(6, 1), "", 6}, p),
               Error);
}

TEST(ProjectionTest, GradientThroughRawChainMatchesFiniteDifferences) {
  Rng rng(8);
  RawTokenizerParams raw{random_param(rng, {3, 8}, 0.3), random_param(rng, {6, 3}, 0.1)};
  ProjectionParams p{random_param(rng, {3}), random_param(rng, {3}), random_param(rng, {3, 5}),
                     random_param(rng, {5})};
  Tensor w = random_param(rng, {4, 5});
  AudioClip c = make_clip(32, 30);
  auto loss = [&] { return ops::sum(ops::mul(project(tokenize_raw(c, raw, 8), p).tokens, w)); };
  auto res = grad_check(loss, {raw.kernel, raw.positions, p.ln_gain, p.ln_bias, p.weight, p.bias});
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST(ProjectionTest, GradientThroughMelChainMatchesFiniteDifferences) {
  Rng rng(9);
  MelTokenizerParams mel{random_param(rng, {2, 1, 3, 3}, 0.05), random_param(rng, {2}),
                         random_param(rng, {3, 2, 3, 3}, 0.3), random_param(rng, {3}),
                         random_param(rng, {10, 3}, 0.1)};
  ProjectionParams p{random_param(rng, {3}), random_param(rng, {3}), random_param(rng, {3, 4}),
                     random_param(rng, {4})};
  MelOptions opt;
  opt.n_mels = 8;
  Tensor w = random_param(rng, {2, 4});  // 6 frames -> 3 -> 2 tokens
  AudioClip c = make_clip(1280, 1280, 700.0);
  auto loss = [&] { return ops::sum(ops::mul(project(tokenize_mel(c, mel, opt), p).tokens, w)); };
  auto res = grad_check(loss, {mel.conv1_kernel, mel.conv1_bias, mel.conv2_kernel,
                               mel.conv2_bias, mel.positions, p.weight});
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

}  // namespace
}  // namespace auscqa
