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

// RIFF/WAVE reading and writing (PCM-16 and IEEE float32).

#ifndef AUSCQA_WAV_HPP_
#define AUSCQA_WAV_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace auscqa {

inline constexpr int kMinSampleRate = 4000;
inline constexpr int kMaxSampleRate = 48000;

struct RawRecording {
  // channels[c][i]; PCM-16 is scaled by 1/32768 into [-1, 1).
  std::vector<std::vector<double>> channels;
  int sample_rate = 0;
  std::string source_path;

  std::size_t num_channels() const { return channels.size(); }
  std::size_t num_frames() const { return channels.empty() ? 0 : channels[0].size(); }
};

enum class WavEncoding { kPcm16, kFloat32 };

RawRecording decode_wav(std::span<const std::uint8_t> bytes, const std::string& source);
RawRecording load_wav(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav(const RawRecording& rec, WavEncoding encoding);
void write_wav(const std::filesystem::path& path, const RawRecording& rec,
               WavEncoding encoding);

}  // namespace auscqa

#endif  // AUSCQA_WAV_HPP_
