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

// Patient manifests: one JSON object per line,
//   {"patient_id", "dataset", "clips": [{"path", "site"}],
//    "qa": [{"question", "answer", "kind": "binary" | "open"}]}
// Clip paths are relative to the manifest's directory unless absolute.

#ifndef AUSCQA_DATA_HPP_
#define AUSCQA_DATA_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "auscqa/audio.hpp"

namespace auscqa {

enum class QAKind { kBinary, kOpen };

QAKind parse_qa_kind(const std::string& s);
std::string qa_kind_name(QAKind kind);

struct QAPair {
  std::string question;
  std::string answer;
  QAKind kind = QAKind::kOpen;
};

struct ClipRef {
  std::string path;
  std::string site;
};

struct PatientRecord {
  std::string patient_id;
  std::string dataset;
  std::vector<ClipRef> clips;
  std::vector<QAPair> qa;
};

// Validates the schema: non-empty ids, at least one clip, binary answers
// of "yes" or "no", unique patient ids.
std::vector<PatientRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const PatientRecord> records);

// Resolves a clip path against `root` (the manifest directory or a data
// root override).
std::filesystem::path resolve_clip(const std::filesystem::path& root, const std::string& path);

// Stable identifier for a clip: its file stem.
std::string clip_id(const ClipRef& clip);

// Decodes and preprocesses every clip of a patient.
std::vector<AudioClip> load_patient_clips(const PatientRecord& rec,
                                          const std::filesystem::path& root,
                                          double max_seconds);

// Long clinical names used in answers ("AV" -> "aortic"); unknown labels
// are lowercased.
std::string site_long_name(const std::string& site);

}  // namespace auscqa

#endif  // AUSCQA_DATA_HPP_
