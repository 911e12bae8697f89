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

// Synthetic auscultation corpora with planted events.
//
// Each clip is pink background noise. A murmur is a band-limited noise
// burst inside 150-400 Hz; the band is split into one sub-band per site
// so the event spectrum identifies the site. A crackle is a train of
// short decaying impulses. Event onsets are uniform over the clip.
// Output layout under the target directory:
//   manifest.jsonl   patient records (see data.hpp)
//   truth.jsonl      per-patient ground truth
//   clips/*.wav      PCM-16 mono

#ifndef AUSCQA_SYNTH_HPP_
#define AUSCQA_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "auscqa/data.hpp"
#include "json.hpp"

namespace auscqa {

inline constexpr double kMurmurLowHz = 150.0;
inline constexpr double kMurmurHighHz = 400.0;

enum class EventKind { kNone, kMurmur, kCrackle };

std::string event_kind_name(EventKind kind);

struct SynthSpec {
  std::size_t n_patients = 200;
  // Fraction of patients generated single-clip under `sil_tag`; the rest
  // are multi-clip under `mil_tag`.
  double sil_fraction = 0.0;
  std::string mil_tag = "synth_mil";
  std::string sil_tag = "synth_sil";
  std::size_t min_clips = 3;
  std::size_t max_clips = 9;
  double min_clip_seconds = 30.0;
  double max_clip_seconds = 30.0;
  std::vector<std::string> sites = {"AV", "PV", "TV", "MV"};
  std::vector<int> sample_rates = {16000, 8000};
  // Exactly round(n * murmur_fraction) patients carry one murmur clip.
  double murmur_fraction = 0.5;
  // Independent per-clip probability of a crackle train.
  double crackle_prob = 0.0;
  double snr_db = 6.0;
  double event_seconds = 2.0;
  double background_rms = 0.05;
  std::uint64_t seed = 7;

  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
  void validate() const;
};

struct ClipTruth {
  std::string path;
  std::string site;
  EventKind event = EventKind::kNone;
  double onset = 0.0;
  double duration = 0.0;
  double seconds = 0.0;
  int sample_rate = 0;
};

struct GroundTruth {
  std::string patient_id;
  std::string dataset;
  std::vector<ClipTruth> clips;

  bool has(EventKind kind) const;
  // "healthy", "murmur", "crackle" or "murmur+crackle".
  std::string condition() const;
  // Site of the murmur clip, else of the first crackle clip, else "".
  std::string abnormal_site() const;
};

enum class QAField { kMurmurPresent, kAbnormalSite, kCracklePresent };

struct QATemplate {
  std::string question;
  QAKind kind;
  QAField field;
};

// Murmur presence and abnormal site; crackle presence is added when the
// spec can plant crackles.
std::vector<QATemplate> default_templates(const SynthSpec& spec);

std::vector<QAPair> derive_qa(const GroundTruth& truth, const std::vector<QATemplate>& templates);

// Murmur sub-band of the given site index.
std::pair<double, double> murmur_band(std::size_t site_index, std::size_t n_sites);

struct SynthResult {
  std::vector<PatientRecord> records;
  std::vector<GroundTruth> truth;
};

// Planned corpus without audio; deterministic under spec.seed.
SynthResult plan_corpus(const SynthSpec& spec);

// Renders one clip of the plan to mono samples at its sample rate.
std::vector<double> render_clip(const SynthSpec& spec, const GroundTruth& truth,
                                std::size_t clip_index, std::size_t patient_index);

// Plans, renders and writes the corpus.
SynthResult generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

nlohmann::json truth_to_json(const GroundTruth& t);
GroundTruth truth_from_json(const nlohmann::json& j);
std::vector<GroundTruth> read_truth(const std::filesystem::path& path);

}  // namespace auscqa

#endif  // AUSCQA_SYNTH_HPP_
