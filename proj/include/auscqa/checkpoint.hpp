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

// Checkpoint container and content hashing.
//
// Layout (little-endian):
//   char[8] magic "AUSCQACK" | u32 version (1) | u64 header bytes |
//   header JSON (UTF-8) | f64 tensor data | u8[32] SHA-256 of all
//   preceding bytes
// The header holds "config", "vocab" (id-ordered words), "frozen" (group
// names) and "tensors": [{name, group, shape, offset}] where offset counts
// doubles from the start of the data section.

#ifndef AUSCQA_CHECKPOINT_HPP_
#define AUSCQA_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "auscqa/optim.hpp"
#include "json.hpp"

namespace auscqa {

struct Checkpoint {
  nlohmann::json config;
  std::vector<std::string> vocab;
  ParameterStore store;
};

// Writes to a temporary sibling and renames, so readers never see a
// partial file.
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     std::span<const std::string> vocab, const ParameterStore& store);

// Fails with a data error on a bad magic, truncation or hash mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

// SHA-256 over the names, shapes and raw values of every tensor in `group`,
// in registration order.
std::string group_digest(const ParameterStore& store, const std::string& group);

}  // namespace auscqa

#endif  // AUSCQA_CHECKPOINT_HPP_
