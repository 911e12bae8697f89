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
#include <numeric>
#include <vector>

#include "auscqa/error.hpp"
#include "auscqa/ops.hpp"
#include "auscqa/resampler.hpp"
#include "gradcheck.hpp"
#include "gtest/gtest.h"
#include "resampler_oracle.hpp"

namespace auscqa {
namespace {

using testing::grad_check;

TokenSequence random_seq(Rng& rng, std::size_t n, std::size_t n_valid, std::size_t d) {
  TokenSequence s;
  s.tokens = Tensor({n, d}, normal_values(rng, n * d, 1.0));
  s.mask.assign(n, 0);
  std::fill_n(s.mask.begin(), n_valid, 1);
  s.n_valid = n_valid;
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(AssembleBagTest, SingleClipIsIdentity) {
  Rng rng(1);
  std::vector<TokenSequence> seqs = {random_seq(rng, 5, 5, 3)};
  BagMatrix bag = assemble_bag(seqs);
  EXPECT_EQ(bag.n_max, 5u);
  EXPECT_EQ(bag.clip_offsets, std::vector<std::size_t>{0});
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(bag.x[i], seqs[0].tokens[i]);
}

TEST(AssembleBagTest, PadsToLongestClip) {
  Rng rng(2);
  std::vector<TokenSequence> seqs = {random_seq(rng, 26, 26, 2), random_seq(rng, 750, 750, 2)};
  BagMatrix bag = assemble_bag(seqs);
  EXPECT_EQ(bag.x.shape(), (Shape{1500, 2}));
  EXPECT_EQ(bag.clip_offsets, (std::vector<std::size_t>{0, 750}));
  for (std::size_t r = 0; r < 1500; ++r) {
    const bool expect = r < 26 || r >= 750;
    EXPECT_EQ(bag.mask[r] != 0, expect) << r;
    if (!expect) {
      EXPECT_TRUE(bag.x[r * 2] == 0.0 && bag.x[r * 2 + 1] == 0.0);
    }
  }
}

TEST(AssembleBagTest, MaskedRowsAreExactlyZero) {
  Rng rng(3);
  std::vector<TokenSequence> seqs = {random_seq(rng, 4, 0, 3), random_seq(rng, 6, 2, 3)};
  BagMatrix bag = assemble_bag(seqs);
  for (std::size_t r = 0; r < bag.mask.size(); ++r) {
    if (bag.mask[r]) continue;
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(bag.x[r * 3 + c], 0.0);
  }
  EXPECT_EQ(std::count(bag.mask.begin(), bag.mask.end(), 1), 2);
}

TEST(AssembleBagTest, Errors) {
  Rng rng(4);
  EXPECT_THROW(assemble_bag(std::vector<TokenSequence>{}), Error);
  std::vector<TokenSequence> mixed = {random_seq(rng, 3, 3, 2), random_seq(rng, 3, 3, 4)};
  EXPECT_THROW(assemble_bag(mixed), Error);
}

ResamplerParams make_params(ParameterStore& store, const ResamplerConfig& cfg, std::size_t d,
                            std::uint64_t seed) {
  Rng rng(seed);
  return PerceiverResampler(cfg, d, store, rng).params();
}

TEST(ResampleTest, SingleValidRowGetsFullWeight) {
  Rng rng(5);
  ResamplerConfig cfg;
  cfg.num_latents = 3;
  cfg.feedforward = false;
  ParameterStore store;
  auto params = make_params(store, cfg, 8, 6);
  std::vector<TokenSequence> seqs = {random_seq(rng, 4, 1, 8)};
  BagMatrix bag = assemble_bag(seqs);
  Tensor z = resample(bag, params, cfg).z;
  Tensor row = ops::slice_rows(bag.x, 0, 1);
  Tensor expect = ops::matmul(ops::matmul(row, params.blocks[0].attn.wv), params.blocks[0].attn.wo);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(z[k * 8 + c], expect[c], 1e-12);
}

TEST(ResampleTest, DuplicatedRowEqualsSingleRow) {
  Rng rng(7);
  ResamplerConfig cfg;
  cfg.num_latents = 1;
  cfg.n_heads = 1;
  cfg.feedforward = false;
  ParameterStore store;
  auto params = make_params(store, cfg, 4, 8);
  TokenSequence one = random_seq(rng, 1, 1, 4);
  TokenSequence two;
  two.tokens = ops::concat_rows(std::vector<Tensor>{one.tokens, one.tokens});
  two.mask = {1, 1};
  two.n_valid = 2;
  Tensor a = resample(assemble_bag(std::vector<TokenSequence>{one}), params, cfg).z;
  Tensor b = resample(assemble_bag(std::vector<TokenSequence>{two}), params, cfg).z;
  EXPECT_LT(max_abs_diff(a, b), 1e-12);
}

TEST(ResampleTest, MatchesLoopOracle) {
  Rng rng(9);
  std::uniform_int_distribution<std::size_t> len(1, 32);
  for (bool ff : {false, true}) {
    for (std::size_t depth : {1u, 2u}) {
      for (std::size_t m : {1u, 2u, 4u}) {
        ResamplerConfig cfg;
        cfg.num_latents = 5;
        cfg.n_heads = 1;
        cfg.depth = depth;
        cfg.feedforward = ff;
        ParameterStore store;
        auto params = make_params(store, cfg, 6, 10 + m);
        std::vector<TokenSequence> seqs;
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t n = len(rng);
          seqs.push_back(random_seq(rng, n, std::uniform_int_distribution<std::size_t>(1, n)(rng), 6));
        }
        BagMatrix bag = assemble_bag(seqs);
        Tensor z = resample(bag, params, cfg).z;
        auto ref = testing::oracle_resample(bag.x, bag.mask, params, cfg);
        ASSERT_EQ(ref.size(), z.numel());
        for (std::size_t i = 0; i < ref.size(); ++i) {
          EXPECT_NEAR(z[i], ref[i], 1e-10) << "ff=" << ff << " depth=" << depth << " m=" << m;
        }
      }
    }
  }
}

TEST(ResampleTest, OutputShapeIndependentOfBagSize) {
  Rng rng(11);
  ResamplerConfig cfg;
  cfg.num_latents = 4;
  ParameterStore store;
  auto params = make_params(store, cfg, 8, 12);
  for (std::size_t m = 1; m <= 8; ++m) {
    for (std::size_t n : {1u, 37u, 750u}) {
      if (m * n > 2000) continue;
      std::vector<TokenSequence> seqs;
      for (std::size_t i = 0; i < m; ++i) seqs.push_back(random_seq(rng, n, n, 8));
      EXPECT_EQ(resample(assemble_bag(seqs), params, cfg).z.shape(), (Shape{4, 8}));
    }
  }
}

TEST(ResampleTest, AppendedPaddingLeavesLatentsUnchanged) {
  Rng rng(13);
  ResamplerConfig cfg;
  cfg.num_latents = 4;
  ParameterStore store;
  auto params = make_params(store, cfg, 8, 14);
  std::vector<TokenSequence> seqs = {random_seq(rng, 10, 7, 8), random_seq(rng, 6, 6, 8)};
  Tensor base = resample(assemble_bag(seqs), params, cfg).z;
  for (std::size_t which = 0; which < 2; ++which) {
    auto padded = seqs;
    TokenSequence extra = random_seq(rng, 9, 0, 8);  // nonzero content, all masked
    padded[which].tokens = ops::concat_rows(std::vector<Tensor>{padded[which].tokens, extra.tokens});
    padded[which].mask.insert(padded[which].mask.end(), 9, 0);
    EXPECT_LT(max_abs_diff(base, resample(assemble_bag(padded), params, cfg).z), 1e-10);
  }
}

TEST(ResampleTest, ClipOrderDoesNotMatter) {
  Rng rng(15);
  ResamplerConfig cfg;
  cfg.num_latents = 4;
  ParameterStore store;
  auto params = make_params(store, cfg, 8, 16);
  std::vector<TokenSequence> seqs = {random_seq(rng, 10, 7, 8), random_seq(rng, 6, 6, 8),
                                     random_seq(rng, 12, 3, 8)};
  Tensor base = resample(assemble_bag(seqs), params, cfg).z;
  std::vector<std::size_t> perm = {0, 1, 2};
  while (std::next_permutation(perm.begin(), perm.end())) {
    std::vector<TokenSequence> p;
    for (std::size_t i : perm) p.push_back(seqs[i]);
    EXPECT_LT(max_abs_diff(base, resample(assemble_bag(p), params, cfg).z), 1e-10);
  }
}

TEST(ResampleTest, FullyMaskedBagIsAnError) {
  Rng rng(17);
  ResamplerConfig cfg;
  cfg.num_latents = 2;
  ParameterStore store;
  auto params = make_params(store, cfg, 4, 18);
  std::vector<TokenSequence> seqs = {random_seq(rng, 3, 0, 4)};
  EXPECT_THROW(resample(assemble_bag(seqs), params, cfg), Error);
}

TEST(ResampleTest, GradientsMatchFiniteDifferences) {
  Rng rng(19);
  ResamplerConfig cfg;
  cfg.num_latents = 3;
  cfg.n_heads = 2;
  cfg.depth = 2;
  cfg.ffn_mult = 2;
  ParameterStore store;
  auto params = make_params(store, cfg, 4, 20);
  Tensor a = Tensor::parameter({5, 4}, normal_values(rng, 20, 1.0));
  Tensor b = Tensor::parameter({3, 4}, normal_values(rng, 12, 1.0));
  Tensor w = Tensor({3, 4}, normal_values(rng, 12, 1.0));
  auto loss = [&] {
    std::vector<TokenSequence> seqs = {TokenSequence{a, {1, 1, 1, 0, 0}, "", 3},
                                       TokenSequence{b, {1, 1, 1}, "", 3}};
    return ops::sum(ops::mul(resample(assemble_bag(seqs), params, cfg).z, w));
  };
  std::vector<Tensor> leaves = {a, b};
  for (const auto& p : store.params()) leaves.push_back(p.tensor);
  auto res = grad_check(loss, leaves);
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
  for (const auto& p : store.params()) EXPECT_EQ(p.group, kGroupAdapter) << p.name;
}

}  // namespace
}  // namespace auscqa
