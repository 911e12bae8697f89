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
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>

#include "auscqa/data.hpp"
#include "auscqa/error.hpp"
#include "auscqa/synth.hpp"

namespace auscqa {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("auscqa_synth_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SynthSpec small_spec() {
  SynthSpec s;
  s.n_patients = 6;
  s.min_clips = 1;
  s.max_clips = 3;
  s.min_clip_seconds = 2.0;
  s.max_clip_seconds = 3.0;
  s.event_seconds = 1.0;
  s.seed = 11;
  return s;
}

// Power in [lo, hi] Hz by direct DFT over integer-resolution bins.
double band_power(const std::vector<double>& x, std::size_t start, std::size_t len, int rate,
                  double lo, double hi) {
  const double df = static_cast<double>(rate) / static_cast<double>(len);
  double total = 0.0;
  for (auto k = static_cast<std::size_t>(std::ceil(lo / df)); k * df <= hi; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * i % len) / len;
      re += x[start + i] * std::cos(a);
      im += x[start + i] * std::sin(a);
    }
    total += re * re + im * im;
  }
  return total;
}

TEST(SynthTest, NoEventsMeansAllHealthy) {
  SynthSpec s = small_spec();
  s.murmur_fraction = 0.0;
  s.n_patients = 20;
  const auto res = plan_corpus(s);
  ASSERT_EQ(res.truth.size(), 20u);
  for (std::size_t i = 0; i < res.truth.size(); ++i) {
    EXPECT_EQ(res.truth[i].condition(), "healthy");
    EXPECT_EQ(res.records[i].qa[0].answer, "no");
    EXPECT_EQ(res.records[i].qa[1].answer, "none");
  }
}

TEST(SynthTest, ExactMurmurCountAndOneEventClip) {
  SynthSpec s = small_spec();
  s.n_patients = 40;
  const auto res = plan_corpus(s);
  std::size_t murmur = 0;
  for (const auto& t : res.truth) {
    std::size_t events = 0;
    for (const auto& c : t.clips) {
      events += c.event == EventKind::kMurmur;
      if (c.event == EventKind::kMurmur) {
        EXPECT_GE(c.onset, 0.0);
        EXPECT_LT(c.onset, c.seconds);
        EXPECT_LE(c.onset + c.duration, c.seconds + 1e-12);
      }
    }
    EXPECT_LE(events, 1u);
    murmur += events;
  }
  EXPECT_EQ(murmur, 20u);
}

TEST(SynthTest, ClipCountsAndDatasetTags) {
  SynthSpec s = small_spec();
  s.n_patients = 50;
  s.min_clips = 3;
  s.max_clips = 5;
  s.sil_fraction = 0.2;
  const auto res = plan_corpus(s);
  std::size_t sil = 0;
  for (const auto& r : res.records) {
    ASSERT_GE(r.clips.size(), 1u);
    if (r.dataset == s.sil_tag) {
      ++sil;
      EXPECT_EQ(r.clips.size(), 1u);
    } else {
      EXPECT_EQ(r.dataset, s.mil_tag);
      EXPECT_GE(r.clips.size(), 3u);
      EXPECT_LE(r.clips.size(), 5u);
    }
  }
  EXPECT_EQ(sil, 10u);
}

TEST(SynthTest, TemplateFill) {
  GroundTruth t;
  t.patient_id = "x";
  t.dataset = "d";
  t.clips = {{"a.wav", "AV", EventKind::kNone, 0, 0, 30, 16000},
             {"b.wav", "MV", EventKind::kMurmur, 3, 2, 30, 16000}};
  SynthSpec s;
  const auto qa = derive_qa(t, default_templates(s));
  ASSERT_EQ(qa.size(), 2u);
  EXPECT_EQ(qa[0].answer, "yes");
  EXPECT_EQ(qa[0].kind, QAKind::kBinary);
  EXPECT_EQ(qa[1].answer, "mitral");
  EXPECT_EQ(qa[1].kind, QAKind::kOpen);
  EXPECT_EQ(t.condition(), "murmur");

  t.clips[1].event = EventKind::kNone;
  const auto healthy = derive_qa(t, default_templates(s));
  EXPECT_EQ(healthy[0].answer, "no");
  EXPECT_EQ(healthy[1].answer, "none");
}

TEST(SynthTest, QaCountEqualsTemplateCount) {
  SynthSpec s = small_spec();
  s.crackle_prob = 0.3;
  const auto templates = default_templates(s);
  ASSERT_EQ(templates.size(), 3u);
  for (const auto& r : plan_corpus(s).records) EXPECT_EQ(r.qa.size(), templates.size());
}

TEST(SynthTest, MurmurSubBandsTileTheBand) {
  for (std::size_t n : {1u, 4u}) {
    double prev = kMurmurLowHz;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [lo, hi] = murmur_band(i, n);
      EXPECT_DOUBLE_EQ(lo, prev);
      EXPECT_GT(hi, lo);
      prev = hi;
    }
    EXPECT_DOUBLE_EQ(prev, kMurmurHighHz);
  }
  EXPECT_THROW(murmur_band(4, 4), Error);
}

TEST(SynthTest, MurmurBandPowerExceedsNoEventClip) {
  SynthSpec s = small_spec();
  s.n_patients = 8;
  const auto res = plan_corpus(s);
  std::size_t checked = 0;
  for (std::size_t p = 0; p < res.truth.size(); ++p) {
    for (std::size_t c = 0; c < res.truth[p].clips.size(); ++c) {
      const auto& ct = res.truth[p].clips[c];
      if (ct.event != EventKind::kMurmur) continue;
      GroundTruth quiet = res.truth[p];
      quiet.clips[c].event = EventKind::kNone;
      const auto with = render_clip(s, res.truth[p], c, p);
      const auto without = render_clip(s, quiet, c, p);
      const auto start = static_cast<std::size_t>(std::llround(ct.onset * ct.sample_rate));
      const auto len = static_cast<std::size_t>(std::llround(ct.duration * ct.sample_rate));
      if (len < static_cast<std::size_t>(ct.sample_rate / 4)) continue;
      const double pw = band_power(with, start, len, ct.sample_rate, kMurmurLowHz, kMurmurHighHz);
      const double po =
          band_power(without, start, len, ct.sample_rate, kMurmurLowHz, kMurmurHighHz);
      EXPECT_GE(10.0 * std::log10(pw / po), s.snr_db - 3.0) << res.truth[p].patient_id;
      ++checked;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(SynthTest, GenerateIsByteIdenticalUnderSeed) {
  const SynthSpec s = small_spec();
  const fs::path a = temp_dir("a"), b = temp_dir("b");
  const auto ra = generate(s, a);
  generate(s, b);
  for (const auto& r : ra.records) {
    for (const auto& c : r.clips) {
      const auto da = slurp(a / c.path);
      ASSERT_FALSE(da.empty());
      EXPECT_EQ(da, slurp(b / c.path)) << c.path;
    }
  }
  EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
  EXPECT_EQ(slurp(a / "truth.jsonl"), slurp(b / "truth.jsonl"));

  SynthSpec other = s;
  other.seed = s.seed + 1;
  const fs::path c = temp_dir("c");
  generate(other, c);
  EXPECT_NE(slurp(a / ra.records[0].clips[0].path), slurp(c / ra.records[0].clips[0].path));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST(SynthTest, ManifestRoundTripsThroughIngestion) {
  const SynthSpec s = small_spec();
  const fs::path dir = temp_dir("ingest");
  const auto res = generate(s, dir);
  const auto records = read_manifest(dir / "manifest.jsonl");
  ASSERT_EQ(records.size(), res.records.size());
  const auto truth = read_truth(dir / "truth.jsonl");
  ASSERT_EQ(truth.size(), res.truth.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].patient_id, res.records[i].patient_id);
    EXPECT_EQ(truth[i].condition(), res.truth[i].condition());
    ASSERT_EQ(records[i].qa.size(), res.records[i].qa.size());
    for (std::size_t q = 0; q < records[i].qa.size(); ++q) {
      EXPECT_EQ(records[i].qa[q].answer, res.records[i].qa[q].answer);
    }
    const auto clips = load_patient_clips(records[i], dir, 30.0);
    ASSERT_EQ(clips.size(), records[i].clips.size());
    for (std::size_t c = 0; c < clips.size(); ++c) {
      EXPECT_EQ(clips[c].waveform.size(), (clips[c].valid_len + 639) / 640 * 640);
      EXPECT_NEAR(static_cast<double>(clips[c].valid_len),
                  res.truth[i].clips[c].seconds * 16000.0, 1.0);
    }
  }
  fs::remove_all(dir);
}

TEST(SynthTest, SpecJsonRoundTripAndValidation) {
  SynthSpec s = small_spec();
  s.sites = {"AV", "MV"};
  const SynthSpec back = SynthSpec::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
  EXPECT_THROW(SynthSpec::from_json({{"bogus", 1}}), Error);
  EXPECT_THROW(SynthSpec::from_json({{"min_clips", 4}, {"max_clips", 2}}), Error);
  EXPECT_THROW(SynthSpec::from_json({{"sample_rates", {96000}}}), Error);
  EXPECT_THROW(SynthSpec::from_json({{"murmur_fraction", 1.5}}), Error);
}

TEST(ManifestTest, RejectsMalformedRecords) {
  const fs::path dir = temp_dir("bad");
  const auto write = [&](const std::string& text) {
    std::ofstream(dir / "m.jsonl") << text;
    return dir / "m.jsonl";
  };
  const std::string ok =
      R"({"patient_id":"a","dataset":"d","clips":[{"path":"x.wav","site":"AV"}],)"
      R"("qa":[{"question":"q","answer":"yes","kind":"binary"}]})";
  EXPECT_EQ(read_manifest(write(ok + "\n")).size(), 1u);
  EXPECT_THROW(read_manifest(write(ok + "\n" + ok + "\n")), Error);  // duplicate id
  EXPECT_THROW(read_manifest(write("{not json}\n")), Error);
  EXPECT_THROW(read_manifest(write("")), Error);
  EXPECT_THROW(read_manifest(write(
                   R"({"patient_id":"a","dataset":"d","clips":[],"qa":[]})")),
               Error);
  EXPECT_THROW(read_manifest(write(
                   R"({"patient_id":"a","dataset":"d","clips":[{"path":"x","site":"AV"}],)"
                   R"("qa":[{"question":"q","answer":"maybe","kind":"binary"}]})")),
               Error);
  EXPECT_THROW(read_manifest(dir / "missing.jsonl"), Error);
  const auto recs = read_manifest(write(ok));
  EXPECT_THROW(load_patient_clips(recs[0], dir, 30.0), Error);
  fs::remove_all(dir);
}

TEST(ManifestTest, SiteNames) {
  EXPECT_EQ(site_long_name("AV"), "aortic");
  EXPECT_EQ(site_long_name("pv"), "pulmonic");
  EXPECT_EQ(site_long_name("TV"), "tricuspid");
  EXPECT_EQ(site_long_name("MV"), "mitral");
  EXPECT_EQ(site_long_name("Lung"), "lung");
}

}  // namespace
}  // namespace auscqa
