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

#include "auscqa/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "auscqa/error.hpp"

namespace auscqa {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV codec assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  template <typename T>
  T read() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string tag() {
    need(4);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      fail(ErrorKind::kData, source_ + ": truncated WAV header");
    }
  }
  std::span<const std::uint8_t> bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

RawRecording decode_wav(std::span<const std::uint8_t> bytes, const std::string& source) {
  Reader r(bytes, source);
  if (r.tag() != "RIFF") fail(ErrorKind::kData, source + ": not a RIFF file");
  r.read<std::uint32_t>();
  if (r.tag() != "WAVE") fail(ErrorKind::kData, source + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const std::string id = r.tag();
    const std::uint32_t size = r.read<std::uint32_t>();
    if (id == "fmt ") {
      if (size < 16) fail(ErrorKind::kData, source + ": short fmt chunk");
      const std::size_t start = r.pos();
      format = r.read<std::uint16_t>();
      channels = r.read<std::uint16_t>();
      rate = r.read<std::uint32_t>();
      r.read<std::uint32_t>();  // byte rate
      r.read<std::uint16_t>();  // block align
      bits = r.read<std::uint16_t>();
      if (format == kFormatExtensible) {
        if (size < 40) fail(ErrorKind::kData, source + ": short extensible fmt chunk");
        r.skip(8);  // cbSize, valid bits, channel mask
        format = r.read<std::uint16_t>();  // leading bytes of the subformat GUID
      }
      r.skip(size - (r.pos() - start) + (size & 1u));
      have_fmt = true;
      continue;
    }
    if (id != "data") {
      r.skip(std::min<std::size_t>(size + (size & 1u), r.remaining()));
      continue;
    }
    if (!have_fmt) fail(ErrorKind::kData, source + ": data chunk before fmt chunk");
    if (channels == 0) fail(ErrorKind::kData, source + ": zero channels");
    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32) {
      fail(ErrorKind::kData, source + ": unsupported codec (format " +
                                 std::to_string(format) + ", " +
                                 std::to_string(bits) + " bits)");
    }
    if (rate < static_cast<std::uint32_t>(kMinSampleRate) ||
        rate > static_cast<std::uint32_t>(kMaxSampleRate)) {
      fail(ErrorKind::kData, source + ": sample rate " + std::to_string(rate) +
                                 " outside [4000, 48000]");
    }
    if (size > r.remaining()) fail(ErrorKind::kData, source + ": truncated data chunk");
    const std::size_t frame_bytes = channels * (bits / 8u);
    const std::size_t frames = size / frame_bytes;
    if (frames == 0) fail(ErrorKind::kData, source + ": zero-length payload");

    RawRecording rec;
    rec.sample_rate = static_cast<int>(rate);
    rec.source_path = source;
    rec.channels.assign(channels, std::vector<double>(frames));
    for (std::size_t i = 0; i < frames; ++i) {
      for (std::size_t c = 0; c < channels; ++c) {
        if (pcm16) {
          rec.channels[c][i] = static_cast<double>(r.read<std::int16_t>()) / 32768.0;
        } else {
          rec.channels[c][i] = static_cast<double>(r.read<float>());
        }
      }
    }
    return rec;
  }
  fail(ErrorKind::kData, source + ": no data chunk");
}

RawRecording load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

std::vector<std::uint8_t> encode_wav(const RawRecording& rec, WavEncoding encoding) {
  const std::uint16_t channels = static_cast<std::uint16_t>(rec.num_channels());
  if (channels == 0) fail(ErrorKind::kUsage, "encode_wav: no channels");
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t block = channels * bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(rec.num_frames() * block);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put<std::uint32_t>(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat);
  put<std::uint16_t>(out, channels);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rec.sample_rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rec.sample_rate) * block);
  put<std::uint16_t>(out, block);
  put<std::uint16_t>(out, bits);
  put_tag(out, "data");
  put<std::uint32_t>(out, data_size);
  for (std::size_t i = 0; i < rec.num_frames(); ++i) {
    for (const auto& ch : rec.channels) {
      if (encoding == WavEncoding::kPcm16) {
        const double s = std::clamp(ch[i], -1.0, 32767.0 / 32768.0);
        put<std::int16_t>(out, static_cast<std::int16_t>(std::lround(s * 32768.0)));
      } else {
        put<float>(out, static_cast<float>(ch[i]));
      }
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const RawRecording& rec,
               WavEncoding encoding) {
  const auto bytes = encode_wav(rec, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

}  // namespace auscqa
