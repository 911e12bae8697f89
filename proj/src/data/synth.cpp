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

#include "auscqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "auscqa/error.hpp"
#include "auscqa/wav.hpp"

namespace auscqa {
namespace {

using nlohmann::json;

constexpr int kSinusoidsPerMurmur = 48;
constexpr double kRampSeconds = 0.05;
constexpr double kCracklesPerSecond = 8.0;
constexpr double kCrackleDecaySeconds = 0.004;

// Distinct streams per purpose so adding draws to one never shifts another.
enum Stream : std::uint32_t { kStreamLabels = 1, kStreamPlan = 2, kStreamAudio = 3 };

std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream, std::size_t a = 0,
                           std::size_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

EventKind parse_event_kind(const std::string& s) {
  if (s == "none") return EventKind::kNone;
  if (s == "murmur") return EventKind::kMurmur;
  if (s == "crackle") return EventKind::kCrackle;
  fail(ErrorKind::kData, "unknown event kind '" + s + "'");
}

std::size_t site_index(const SynthSpec& spec, const std::string& site) {
  const auto it = std::find(spec.sites.begin(), spec.sites.end(), site);
  if (it == spec.sites.end()) fail(ErrorKind::kData, "site '" + site + "' not in spec");
  return static_cast<std::size_t>(it - spec.sites.begin());
}

// Unit-peak raised-cosine ramps at both ends of [0, n).
double envelope(std::size_t i, std::size_t n, std::size_t ramp) {
  if (ramp == 0) return 1.0;
  const std::size_t edge = std::min(i, n - 1 - i);
  if (edge >= ramp) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(edge) /
                              static_cast<double>(ramp));
}

void add_murmur(std::vector<double>& x, int rate, std::size_t start, std::size_t len,
                std::pair<double, double> band, double target_rms, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(band.first, band.second);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> f(kSinusoidsPerMurmur), ph(kSinusoidsPerMurmur);
  for (int k = 0; k < kSinusoidsPerMurmur; ++k) {
    f[k] = freq(rng);
    ph[k] = phase(rng);
  }
  std::vector<double> burst(len, 0.0);
  const std::size_t ramp = static_cast<std::size_t>(kRampSeconds * rate);
  double energy = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) / rate;
    double s = 0.0;
    for (int k = 0; k < kSinusoidsPerMurmur; ++k) s += std::sin(2.0 * std::numbers::pi * f[k] * t + ph[k]);
    burst[i] = s * envelope(i, len, ramp);
    energy += burst[i] * burst[i];
  }
  if (energy <= 0.0) return;
  const double gain = target_rms / std::sqrt(energy / static_cast<double>(len));
  for (std::size_t i = 0; i < len; ++i) x[start + i] += gain * burst[i];
}

void add_crackles(std::vector<double>& x, int rate, std::size_t start, std::size_t len,
                  double amplitude, std::mt19937_64& rng) {
  std::exponential_distribution<double> gap(kCracklesPerSecond);
  std::uniform_real_distribution<double> sign(-1.0, 1.0);
  const std::size_t decay_len = static_cast<std::size_t>(8 * kCrackleDecaySeconds * rate);
  double t = gap(rng);
  while (true) {
    const std::size_t at = start + static_cast<std::size_t>(t * rate);
    if (at >= start + len) break;
    const double a = amplitude * (sign(rng) < 0 ? -1.0 : 1.0);
    for (std::size_t i = 0; i < decay_len && at + i < start + len; ++i) {
      const double tau = static_cast<double>(i) / rate;
      x[at + i] += a * std::exp(-tau / kCrackleDecaySeconds) *
                   std::cos(2.0 * std::numbers::pi * 600.0 * tau);
    }
    t += gap(rng);
  }
}

}  // namespace

std::string event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::kNone: return "none";
    case EventKind::kMurmur: return "murmur";
    case EventKind::kCrackle: return "crackle";
  }
  return "none";
}

json SynthSpec::to_json() const {
  return {{"n_patients", n_patients},
          {"sil_fraction", sil_fraction},
          {"mil_tag", mil_tag},
          {"sil_tag", sil_tag},
          {"min_clips", min_clips},
          {"max_clips", max_clips},
          {"min_clip_seconds", min_clip_seconds},
          {"max_clip_seconds", max_clip_seconds},
          {"sites", sites},
          {"sample_rates", sample_rates},
          {"murmur_fraction", murmur_fraction},
          {"crackle_prob", crackle_prob},
          {"snr_db", snr_db},
          {"event_seconds", event_seconds},
          {"background_rms", background_rms},
          {"seed", seed}};
}

SynthSpec SynthSpec::from_json(const json& j) {
  SynthSpec s;
  static const std::vector<std::string> kKeys = {
      "n_patients", "sil_fraction", "mil_tag", "sil_tag", "min_clips", "max_clips",
      "min_clip_seconds", "max_clip_seconds", "sites", "sample_rates", "murmur_fraction",
      "crackle_prob", "snr_db", "event_seconds", "background_rms", "seed"};
  if (!j.is_object()) fail(ErrorKind::kUsage, "synth spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      fail(ErrorKind::kUsage, "unknown synth spec key '" + key + "'");
    }
  }
  try {
    s.n_patients = j.value("n_patients", s.n_patients);
    s.sil_fraction = j.value("sil_fraction", s.sil_fraction);
    s.mil_tag = j.value("mil_tag", s.mil_tag);
    s.sil_tag = j.value("sil_tag", s.sil_tag);
    s.min_clips = j.value("min_clips", s.min_clips);
    s.max_clips = j.value("max_clips", s.max_clips);
    s.min_clip_seconds = j.value("min_clip_seconds", s.min_clip_seconds);
    s.max_clip_seconds = j.value("max_clip_seconds", s.max_clip_seconds);
    s.sites = j.value("sites", s.sites);
    s.sample_rates = j.value("sample_rates", s.sample_rates);
    s.murmur_fraction = j.value("murmur_fraction", s.murmur_fraction);
    s.crackle_prob = j.value("crackle_prob", s.crackle_prob);
    s.snr_db = j.value("snr_db", s.snr_db);
    s.event_seconds = j.value("event_seconds", s.event_seconds);
    s.background_rms = j.value("background_rms", s.background_rms);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    fail(ErrorKind::kUsage, std::string("bad synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

void SynthSpec::validate() const {
  if (n_patients == 0) fail(ErrorKind::kUsage, "synth: n_patients must be positive");
  if (sites.empty()) fail(ErrorKind::kUsage, "synth: at least one site is required");
  if (min_clips == 0 || max_clips < min_clips) {
    fail(ErrorKind::kUsage, "synth: need 1 <= min_clips <= max_clips");
  }
  if (!(min_clip_seconds > 0.0) || max_clip_seconds < min_clip_seconds) {
    fail(ErrorKind::kUsage, "synth: need 0 < min_clip_seconds <= max_clip_seconds");
  }
  if (!(event_seconds > 0.0)) fail(ErrorKind::kUsage, "synth: event_seconds must be positive");
  if (sample_rates.empty()) fail(ErrorKind::kUsage, "synth: sample_rates is empty");
  for (int r : sample_rates) {
    if (r < kMinSampleRate || r > kMaxSampleRate) {
      fail(ErrorKind::kUsage, "synth: unsupported sample rate " + std::to_string(r));
    }
  }
  const auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(sil_fraction) || !unit(murmur_fraction) || !unit(crackle_prob)) {
    fail(ErrorKind::kUsage, "synth: fractions and probabilities must lie in [0, 1]");
  }
  if (!(background_rms > 0.0)) fail(ErrorKind::kUsage, "synth: background_rms must be positive");
  if (mil_tag.empty() || sil_tag.empty() || mil_tag == sil_tag) {
    fail(ErrorKind::kUsage, "synth: dataset tags must be non-empty and distinct");
  }
}

bool GroundTruth::has(EventKind kind) const {
  return std::any_of(clips.begin(), clips.end(), [&](const ClipTruth& c) { return c.event == kind; });
}

std::string GroundTruth::condition() const {
  const bool m = has(EventKind::kMurmur), c = has(EventKind::kCrackle);
  if (m && c) return "murmur+crackle";
  if (m) return "murmur";
  if (c) return "crackle";
  return "healthy";
}

std::string GroundTruth::abnormal_site() const {
  for (EventKind kind : {EventKind::kMurmur, EventKind::kCrackle}) {
    for (const auto& c : clips)
      if (c.event == kind) return c.site;
  }
  return "";
}

std::vector<QATemplate> default_templates(const SynthSpec& spec) {
  std::vector<QATemplate> t = {
      {"is a murmur present?", QAKind::kBinary, QAField::kMurmurPresent},
      {"which site shows the abnormality?", QAKind::kOpen, QAField::kAbnormalSite},
  };
  if (spec.crackle_prob > 0.0) {
    t.push_back({"are crackles present?", QAKind::kBinary, QAField::kCracklePresent});
  }
  return t;
}

std::vector<QAPair> derive_qa(const GroundTruth& truth, const std::vector<QATemplate>& templates) {
  std::vector<QAPair> out;
  out.reserve(templates.size());
  for (const auto& t : templates) {
    std::string answer;
    switch (t.field) {
      case QAField::kMurmurPresent: answer = truth.has(EventKind::kMurmur) ? "yes" : "no"; break;
      case QAField::kCracklePresent: answer = truth.has(EventKind::kCrackle) ? "yes" : "no"; break;
      case QAField::kAbnormalSite: {
        const std::string site = truth.abnormal_site();
        answer = site.empty() ? "none" : site_long_name(site);
        break;
      }
    }
    out.push_back({t.question, answer, t.kind});
  }
  return out;
}

std::pair<double, double> murmur_band(std::size_t site_index, std::size_t n_sites) {
  if (n_sites == 0 || site_index >= n_sites) fail(ErrorKind::kUsage, "murmur_band: bad site index");
  const double width = (kMurmurHighHz - kMurmurLowHz) / static_cast<double>(n_sites);
  return {kMurmurLowHz + width * site_index, kMurmurLowHz + width * (site_index + 1)};
}

SynthResult plan_corpus(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_patients;

  // Exact label counts via a seeded permutation of patient indices.
  auto label_rng = stream_rng(spec.seed, kStreamLabels);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), label_rng);
  const auto n_murmur = static_cast<std::size_t>(std::llround(spec.murmur_fraction * n));
  const auto n_sil = static_cast<std::size_t>(std::llround(spec.sil_fraction * n));
  std::vector<char> murmur(n, 0), sil(n, 0);
  for (std::size_t i = 0; i < n_murmur; ++i) murmur[order[i]] = 1;
  std::shuffle(order.begin(), order.end(), label_rng);
  for (std::size_t i = 0; i < n_sil; ++i) sil[order[i]] = 1;

  const auto templates = default_templates(spec);
  SynthResult res;
  res.records.reserve(n);
  res.truth.reserve(n);
  for (std::size_t p = 0; p < n; ++p) {
    auto rng = stream_rng(spec.seed, kStreamPlan, p);
    char pid[32];
    std::snprintf(pid, sizeof(pid), "p%05zu", p);
    GroundTruth t;
    t.patient_id = pid;
    t.dataset = sil[p] ? spec.sil_tag : spec.mil_tag;
    const std::size_t n_clips =
        sil[p] ? 1
               : std::uniform_int_distribution<std::size_t>(spec.min_clips, spec.max_clips)(rng);
    const std::size_t site_offset =
        std::uniform_int_distribution<std::size_t>(0, spec.sites.size() - 1)(rng);
    std::uniform_real_distribution<double> secs(spec.min_clip_seconds, spec.max_clip_seconds);
    std::uniform_int_distribution<std::size_t> rate_pick(0, spec.sample_rates.size() - 1);
    for (std::size_t c = 0; c < n_clips; ++c) {
      ClipTruth ct;
      ct.site = spec.sites[(site_offset + c) % spec.sites.size()];
      ct.seconds = spec.min_clip_seconds == spec.max_clip_seconds ? spec.min_clip_seconds : secs(rng);
      ct.sample_rate = spec.sample_rates[rate_pick(rng)];
      char name[64];
      std::snprintf(name, sizeof(name), "clips/%s_c%zu_%s.wav", pid, c, ct.site.c_str());
      ct.path = name;
      t.clips.push_back(std::move(ct));
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (murmur[p]) {
      auto& ct = t.clips[std::uniform_int_distribution<std::size_t>(0, n_clips - 1)(rng)];
      ct.event = EventKind::kMurmur;
      ct.onset = unit(rng) * ct.seconds;
      ct.duration = std::min(spec.event_seconds, ct.seconds - ct.onset);
    }
    for (auto& ct : t.clips) {
      // Always draw so the stream does not depend on crackle_prob == 0.
      const double u = unit(rng), onset = unit(rng) * ct.seconds;
      if (ct.event == EventKind::kNone && u < spec.crackle_prob) {
        ct.event = EventKind::kCrackle;
        ct.onset = onset;
        ct.duration = std::min(spec.event_seconds, ct.seconds - onset);
      }
    }
    PatientRecord r;
    r.patient_id = t.patient_id;
    r.dataset = t.dataset;
    for (const auto& ct : t.clips) r.clips.push_back({ct.path, ct.site});
    r.qa = derive_qa(t, templates);
    res.records.push_back(std::move(r));
    res.truth.push_back(std::move(t));
  }
  return res;
}

std::vector<double> render_clip(const SynthSpec& spec, const GroundTruth& truth,
                                std::size_t clip_index, std::size_t patient_index) {
  const ClipTruth& ct = truth.clips.at(clip_index);
  const int rate = ct.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(ct.seconds * rate));
  auto rng = stream_rng(spec.seed, kStreamAudio, patient_index, clip_index);

  // Pink background (Paul Kellet's economy filter), scaled to the target RMS.
  std::normal_distribution<double> white(0.0, 1.0);
  std::vector<double> x(n);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = white(rng);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    x[i] = b0 + b1 + b2 + w * 0.1848;
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double scale = spec.background_rms / std::sqrt(var / static_cast<double>(n));
  for (double& v : x) v = (v - mean) * scale;

  if (ct.event != EventKind::kNone) {
    const auto start = std::min(n, static_cast<std::size_t>(std::llround(ct.onset * rate)));
    const auto len = std::min(n - start, static_cast<std::size_t>(std::llround(ct.duration * rate)));
    const double target = spec.background_rms * std::pow(10.0, spec.snr_db / 20.0);
    if (len > 0 && ct.event == EventKind::kMurmur) {
      add_murmur(x, rate, start, len, murmur_band(site_index(spec, ct.site), spec.sites.size()),
                 target, rng);
    } else if (len > 0) {
      add_crackles(x, rate, start, len, 4.0 * target, rng);
    }
  }
  for (double& v : x) v = std::clamp(v, -1.0, 32767.0 / 32768.0);
  return x;
}

SynthResult generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  SynthResult res = plan_corpus(spec);
  std::filesystem::create_directories(out_dir / "clips");
  for (std::size_t p = 0; p < res.truth.size(); ++p) {
    const auto& t = res.truth[p];
    for (std::size_t c = 0; c < t.clips.size(); ++c) {
      RawRecording rec;
      rec.sample_rate = t.clips[c].sample_rate;
      rec.channels.push_back(render_clip(spec, t, c, p));
      write_wav(out_dir / t.clips[c].path, rec, WavEncoding::kPcm16);
    }
  }
  write_manifest(out_dir / "manifest.jsonl", res.records);
  std::ofstream truth(out_dir / "truth.jsonl");
  if (!truth) fail(ErrorKind::kIo, "cannot write " + (out_dir / "truth.jsonl").string());
  for (const auto& t : res.truth) truth << truth_to_json(t).dump() << '\n';
  std::ofstream spec_out(out_dir / "synth_spec.json");
  spec_out << spec.to_json().dump(2) << '\n';
  if (!truth || !spec_out) fail(ErrorKind::kIo, "short write under " + out_dir.string());
  return res;
}

json truth_to_json(const GroundTruth& t) {
  json clips = json::array();
  for (const auto& c : t.clips) {
    clips.push_back({{"path", c.path},
                     {"site", c.site},
                     {"event", event_kind_name(c.event)},
                     {"onset", c.onset},
                     {"duration", c.duration},
                     {"seconds", c.seconds},
                     {"sample_rate", c.sample_rate}});
  }
  return {{"patient_id", t.patient_id},
          {"dataset", t.dataset},
          {"condition", t.condition()},
          {"abnormal_site", t.abnormal_site()},
          {"clips", clips}};
}

GroundTruth truth_from_json(const json& j) {
  GroundTruth t;
  try {
    t.patient_id = j.at("patient_id").get<std::string>();
    t.dataset = j.at("dataset").get<std::string>();
    for (const auto& c : j.at("clips")) {
      ClipTruth ct;
      ct.path = c.at("path").get<std::string>();
      ct.site = c.at("site").get<std::string>();
      ct.event = parse_event_kind(c.at("event").get<std::string>());
      ct.onset = c.at("onset").get<double>();
      ct.duration = c.at("duration").get<double>();
      ct.seconds = c.at("seconds").get<double>();
      ct.sample_rate = c.at("sample_rate").get<int>();
      t.clips.push_back(std::move(ct));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, std::string("bad truth record: ") + e.what());
  }
  return t;
}

std::vector<GroundTruth> read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<GroundTruth> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(truth_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace auscqa
