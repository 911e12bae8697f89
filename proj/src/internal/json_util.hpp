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

// Strict JSON config helpers shared by the config readers.

#ifndef AUSCQA_INTERNAL_JSON_UTIL_HPP_
#define AUSCQA_INTERNAL_JSON_UTIL_HPP_

#include <algorithm>
#include <initializer_list>
#include <string>

#include "auscqa/error.hpp"
#include "json.hpp"

namespace auscqa::internal {

// Fails with a usage error on keys outside `allowed`.
inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
  if (!j.is_object()) fail(ErrorKind::kUsage, ctx + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(ErrorKind::kUsage, "unknown " + ctx + " key '" + key + "'");
    }
  }
}

// Overwrites `out` only when `key` is present.
template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace auscqa::internal

#endif  // AUSCQA_INTERNAL_JSON_UTIL_HPP_
