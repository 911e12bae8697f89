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

// Recording preprocessing: mono mixdown, resampling to 16 kHz, head
// truncation, z-score normalization and zero padding to whole patches.

#ifndef AUSCQA_AUDIO_HPP_
#define AUSCQA_AUDIO_HPP_

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "auscqa/wav.hpp"

namespace auscqa {

inline constexpr int kTargetRate = 16000;
inline constexpr std::size_t kPatchSamples = 640;  // 40 ms at 16 kHz
inline constexpr double kDefaultMaxSeconds = 30.0;
inline constexpr double kNormalizeEps = 1e-8;

// A preprocessed mono recording at 16 kHz. waveform.size() is a multiple of
// kPatchSamples and every sample at or beyond valid_len is exactly 0.
struct AudioClip {
  std::vector<float> waveform;
  std::size_t valid_len = 0;
  std::string site;
  std::string patient_id;
};

// Arithmetic mean across channels.
RawRecording to_mono(const RawRecording& rec);

// Windowed-sinc polyphase resampling (Kaiser window, 64 taps per phase) of a
// mono recording to 16 kHz. Output length is round(len * 16000 / rate). A
// 16 kHz input is returned unchanged.
RawRecording resample_16k(const RawRecording& rec);

// Keeps the first max_seconds * 16000 samples, z-scores them with
// (x - mean) / (std + 1e-8), then zero-pads to the next multiple of 640.
AudioClip normalize_pad(const RawRecording& rec, double max_seconds);

// load_wav -> to_mono -> resample_16k -> normalize_pad.
AudioClip preprocess_file(const std::filesystem::path& wav, const std::string& site,
                          const std::string& patient_id, double max_seconds);

// Clip file layout (little-endian):
//   char[4] magic "AQCL" | u32 version (1) | u64 valid_len | u64 length |
//   u32 site byte count | site bytes (UTF-8) | f64 samples[length]
void write_clip(const std::filesystem::path& path, const AudioClip& clip);
AudioClip read_clip(const std::filesystem::path& path);

}  // namespace auscqa

#endif  // AUSCQA_AUDIO_HPP_
