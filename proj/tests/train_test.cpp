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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "auscqa/error.hpp"
#include "auscqa/synth.hpp"
#include "auscqa/train.hpp"

namespace auscqa {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("auscqa_train_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<PatientRecord> fake_records(std::size_t n, const std::string& tag) {
  std::vector<PatientRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    PatientRecord r;
    r.patient_id = tag + "_" + std::to_string(i);
    r.dataset = tag;
    r.clips.push_back({"x.wav", "AV"});
    r.qa.push_back({"is a murmur present?", "yes", QAKind::kBinary});
    out.push_back(r);
  }
  return out;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.encoder.d_embed = 8;
  c.model.encoder.d_proj = 16;
  c.model.resampler.num_latents = 4;
  c.model.resampler.n_heads = 2;
  c.model.lm.n_layers = 1;
  c.model.lm.d_model = 16;
  c.model.lm.n_heads = 2;
  c.model.lm.d_ffn = 32;
  c.model.lm.max_seq = 64;
  c.model.max_seconds = 2.0;
  c.model.max_new_tokens = 3;
  c.lr_encoder = 1e-3;
  c.lr_adapter = 1e-3;
  c.micro_batch = 2;
  c.accum_steps = 2;
  c.epochs = 1;
  c.max_steps = 2;
  c.lm_epochs = 2;
  c.seed = 5;
  return c;
}

// A small synthetic corpus shared by the end-to-end tests.
struct Corpus {
  fs::path root;
  std::vector<PatientRecord> records;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus out;
    out.root = temp_dir("corpus");
    SynthSpec s;
    s.n_patients = 12;
    s.min_clips = 1;
    s.max_clips = 2;
    s.min_clip_seconds = 2.0;
    s.max_clip_seconds = 2.0;
    s.event_seconds = 1.0;
    s.sample_rates = {16000};
    s.seed = 3;
    generate(s, out.root);
    out.records = read_manifest(out.root / "manifest.jsonl");
    return out;
  }();
  return c;
}

std::vector<double> group_values(const ParameterStore& store, const std::string& group) {
  std::vector<double> out;
  for (const auto& p : store.params()) {
    if (p.group != group) continue;
    const auto v = p.tensor.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

TEST(SplitTest, RatiosAreHonouredAndSplitsAreDisjoint) {
  const auto recs = fake_records(100, "a");
  const SplitManifest s = make_splits(recs, {}, 1);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.val.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
  std::set<std::string> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 100u);
}

TEST(SplitTest, SeedDeterminesAssignment) {
  const auto recs = fake_records(50, "a");
  const SplitManifest a = make_splits(recs, {}, 9);
  const SplitManifest b = make_splits(recs, {}, 9);
  const SplitManifest c = make_splits(recs, {}, 10);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_NE(a.test, c.test);
  EXPECT_EQ(SplitManifest::from_json(a.to_json()).to_json(), a.to_json());
}

TEST(SplitTest, StratifiedPerTagAndErrors) {
  auto recs = fake_records(20, "a");
  const auto more = fake_records(10, "b");
  recs.insert(recs.end(), more.begin(), more.end());
  const SplitManifest s = make_splits(recs, {}, 1);
  std::size_t b_test = 0;
  for (const auto& id : s.test) b_test += s.dataset_of.at(id) == "b";
  EXPECT_EQ(b_test, 1u);
  EXPECT_EQ(s.test.size(), 3u);

  EXPECT_THROW(make_splits(fake_records(2, "a"), {}, 1), Error);
  try {
    make_splits(recs, {0.5, 0.5, 0.5}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUsage);
  }
}

TEST(SamplerTest, BalancedDrawsEqualiseTags) {
  std::vector<std::string> tags(10, "small");
  tags.insert(tags.end(), 1000, "large");
  BalancedSampler sampler(tags, 4);
  std::size_t small = 0;
  const std::size_t n = 20000;
  for (std::size_t i = 0; i < n; ++i) small += tags[sampler.next()] == "small";
  EXPECT_NEAR(static_cast<double>(small) / n, 0.5, 0.02);
}

TEST(SamplerTest, UnbalancedFollowsPopulation) {
  std::vector<std::string> tags(10, "small");
  tags.insert(tags.end(), 1000, "large");
  BalancedSampler sampler(tags, 4, false);
  std::size_t small = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) small += tags[sampler.next()] == "small";
  EXPECT_EQ(small, 10u);  // one full pass visits every item once
}

TEST(SamplerTest, SingleTagVisitsEveryItemPerPassAndIsSeeded) {
  const std::vector<std::string> tags(7, "only");
  BalancedSampler a(tags, 2), b(tags, 2);
  std::set<std::size_t> seen;
  for (int i = 0; i < 7; ++i) {
    const std::size_t x = a.next();
    EXPECT_EQ(x, b.next());
    seen.insert(x);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_THROW(BalancedSampler({}, 1), Error);
}

TEST(TrainConfigTest, JsonRoundTripAndStrictKeys) {
  const TrainConfig c = tiny_config();
  EXPECT_EQ(TrainConfig::from_json(c.to_json()).to_json(), c.to_json());
  auto j = c.to_json();
  j["learning_rate"] = 1.0;
  EXPECT_THROW(TrainConfig::from_json(j), Error);
  j = c.to_json();
  j["micro_batch"] = 0;
  EXPECT_THROW(TrainConfig::from_json(j), Error);
}

TEST(TrainTest, PretrainBuildsVocabFromTrainSplit) {
  const TrainConfig c = tiny_config();
  const Checkpoint lm = pretrain_lm(c, corpus().records);
  EXPECT_EQ(lm.config.at("kind"), kKindTextLm);
  const TextVocab v = TextVocab::from_words(lm.vocab);
  EXPECT_GT(v.size(), 5u);
  EXPECT_TRUE(lm.store.is_frozen(kGroupLm));
}

TEST(TrainTest, AccumulationMatchesLargerMicroBatch) {
  const auto& recs = corpus().records;
  TrainConfig a = tiny_config();
  a.max_steps = 1;
  TrainConfig b = a;
  b.micro_batch = 4;
  b.accum_steps = 1;
  const Checkpoint lm = pretrain_lm(a, recs);
  const ClipCache cache(recs, corpus().root, a.model.max_seconds);
  const fs::path da = temp_dir("accum_a"), db = temp_dir("accum_b");
  train(a, recs, cache, lm, da);
  train(b, recs, cache, lm, db);
  const auto va = group_values(AudioQAModel::load(da / "last.ckpt").store(), kGroupAdapter);
  const auto vb = group_values(AudioQAModel::load(db / "last.ckpt").store(), kGroupAdapter);
  ASSERT_EQ(va.size(), vb.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) worst = std::max(worst, std::abs(va[i] - vb[i]));
  EXPECT_LE(worst, 1e-10);
}

TEST(TrainTest, DeterministicFrozenAndLogged) {
  const auto& recs = corpus().records;
  const TrainConfig c = tiny_config();
  const Checkpoint lm = pretrain_lm(c, recs);
  const ClipCache cache(recs, corpus().root, c.model.max_seconds);
  const fs::path d1 = temp_dir("det_1"), d2 = temp_dir("det_2");
  std::size_t callbacks = 0;
  const TrainResult r1 = train(c, recs, cache, lm, d1, [&](const nlohmann::json&) { ++callbacks; });
  const TrainResult r2 = train(c, recs, cache, lm, d2);
  EXPECT_EQ(r1.steps, 2u);
  EXPECT_EQ(callbacks, r1.log.size());
  ASSERT_EQ(r1.log.size(), r2.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i) EXPECT_EQ(r1.log[i], r2.log[i]);
  const auto& first = r1.log.front();
  for (const char* key : {"step", "epoch", "split", "loss", "lr", "gate_means"}) {
    EXPECT_TRUE(first.contains(key)) << key;
  }
  EXPECT_EQ(first.at("lr").at("encoder"), c.lr_encoder);

  const AudioQAModel m1 = AudioQAModel::load(d1 / "last.ckpt");
  const AudioQAModel m2 = AudioQAModel::load(d2 / "last.ckpt");
  EXPECT_EQ(group_values(m1.store(), kGroupAdapter), group_values(m2.store(), kGroupAdapter));
  EXPECT_EQ(group_digest(m1.store(), kGroupLm), group_digest(lm.store, kGroupLm));
  EXPECT_NE(group_digest(m1.store(), kGroupAdapter),
            group_digest(AudioQAModel(c.model, lm, 0).store(), kGroupAdapter));
  for (const char* f : {"config.json", "splits.json", "metrics.jsonl", "best.ckpt"}) {
    EXPECT_TRUE(fs::exists(d1 / f)) << f;
  }
}

TEST(TrainTest, ExperimentAndAblationReuse) {
  const auto& recs = corpus().records;
  TrainConfig c = tiny_config();
  c.max_steps = 1;
  const Checkpoint lm = pretrain_lm(c, recs);
  const fs::path out = temp_dir("ablate");
  const std::vector<double> secs = {1.0, 2.0};
  const auto rows = ablate_context(c, recs, corpus().root, lm, secs, out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].reused);
  EXPECT_TRUE(fs::exists(out / "ctx_1s" / "report.json"));
  EXPECT_TRUE(fs::exists(out / "ctx_2s" / "baseline_predictions.jsonl"));
  const auto again = ablate_context(c, recs, corpus().root, lm, secs, out);
  ASSERT_EQ(again.size(), 2u);
  EXPECT_TRUE(again[0].reused);
  EXPECT_TRUE(again[1].reused);
  EXPECT_EQ(again[1].report.to_json(), rows[1].report.to_json());
  EXPECT_NE(ablation_table(rows).find("ctx_2s"), std::string::npos);
  EXPECT_EQ(ablation_json(rows).size(), 2u);
}

TEST(PredictTest, ProducesOnePredictionPerQuestion) {
  const auto& recs = corpus().records;
  const TrainConfig c = tiny_config();
  const Checkpoint lm = pretrain_lm(c, recs);
  const AudioQAModel model(c.model, lm, 1);
  const ClipCache cache(recs, corpus().root, c.model.max_seconds);
  const auto preds = predict(model, recs, cache);
  std::size_t n = 0;
  for (const auto& r : recs) n += r.qa.size();
  EXPECT_EQ(preds.size(), n);
  EXPECT_THROW(cache.clips("nobody"), Error);
}

}  // namespace
}  // namespace auscqa
