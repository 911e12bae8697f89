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

#include "auscqa/checkpoint.hpp"

#include <openssl/sha.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "auscqa/error.hpp"

namespace auscqa {
namespace {

constexpr char kMagic[8] = {'A', 'U', 'S', 'C', 'Q', 'A', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void append(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

std::string to_hex(const unsigned char* d, std::size_t n) {
  static const char* kDigits = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    s[2 * i] = kDigits[d[i] >> 4];
    s[2 * i + 1] = kDigits[d[i] & 15];
  }
  return s;
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(bytes.data(), bytes.size(), digest);
  return to_hex(digest, sizeof(digest));
}

std::string group_digest(const ParameterStore& store, const std::string& group) {
  std::vector<std::uint8_t> buf;
  for (const auto& p : store.params()) {
    if (p.group != group) continue;
    buf.insert(buf.end(), p.name.begin(), p.name.end());
    buf.push_back(0);
    for (std::size_t d : p.tensor.shape()) append<std::uint64_t>(buf, d);
    for (double v : p.tensor.values()) append(buf, v);
  }
  return sha256_hex(buf);
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     std::span<const std::string> vocab, const ParameterStore& store) {
  nlohmann::json header;
  header["config"] = config;
  header["vocab"] = std::vector<std::string>(vocab.begin(), vocab.end());
  nlohmann::json frozen = nlohmann::json::array();
  for (const auto& g : store.group_names())
    if (store.is_frozen(g)) frozen.push_back(g);
  header["frozen"] = frozen;
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : store.params()) {
    tensors.push_back({{"name", p.name},
                       {"group", p.group},
                       {"shape", p.tensor.shape()},
                       {"offset", offset}});
    offset += p.tensor.numel();
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::vector<std::uint8_t> buf(kMagic, kMagic + 8);
  append(buf, kVersion);
  append<std::uint64_t>(buf, text.size());
  buf.insert(buf.end(), text.begin(), text.end());
  buf.reserve(buf.size() + offset * sizeof(double) + SHA256_DIGEST_LENGTH);
  for (const auto& p : store.params())
    for (double v : p.tensor.values()) append(buf, v);
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(buf.data(), buf.size(), digest);
  buf.insert(buf.end(), digest, digest + SHA256_DIGEST_LENGTH);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) fail(ErrorKind::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint " + name);
  const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
  const std::size_t fixed = 8 + 4 + 8;
  if (buf.size() < fixed + SHA256_DIGEST_LENGTH || std::memcmp(buf.data(), kMagic, 8) != 0) {
    fail(ErrorKind::kData, name + ": not a checkpoint file");
  }
  const std::size_t body = buf.size() - SHA256_DIGEST_LENGTH;
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(buf.data(), body, digest);
  if (std::memcmp(digest, buf.data() + body, SHA256_DIGEST_LENGTH) != 0) {
    fail(ErrorKind::kData, name + ": checkpoint hash mismatch (file is corrupt or modified)");
  }
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  std::memcpy(&version, buf.data() + 8, 4);
  std::memcpy(&header_len, buf.data() + 12, 8);
  if (version != kVersion) {
    fail(ErrorKind::kData, name + ": unsupported checkpoint version " + std::to_string(version));
  }
  if (header_len > body - fixed) fail(ErrorKind::kData, name + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.begin() + fixed,
                                   buf.begin() + static_cast<std::ptrdiff_t>(fixed + header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, name + ": bad checkpoint header: " + e.what());
  }
  const std::uint8_t* data = buf.data() + fixed + header_len;
  const std::size_t n_doubles = (body - fixed - header_len) / sizeof(double);

  Checkpoint ck;
  try {
    ck.config = header.at("config");
    ck.vocab = header.at("vocab").get<std::vector<std::string>>();
    for (const auto& t : header.at("tensors")) {
      const auto shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const std::size_t n = shape_numel(shape);
      if (offset + n > n_doubles) fail(ErrorKind::kData, name + ": tensor data out of range");
      std::vector<double> values(n);
      std::memcpy(values.data(), data + offset * sizeof(double), n * sizeof(double));
      ck.store.add(t.at("name").get<std::string>(), t.at("group").get<std::string>(),
                   Tensor::parameter(shape, std::move(values)));
    }
    for (const auto& g : header.at("frozen")) ck.store.set_frozen(g.get<std::string>(), true);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, name + ": bad checkpoint header: " + e.what());
  }
  return ck;
}

}  // namespace auscqa
