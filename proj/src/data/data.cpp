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

#include "auscqa/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "auscqa/error.hpp"
#include "json.hpp"

namespace auscqa {

using nlohmann::json;

QAKind parse_qa_kind(const std::string& s) {
  if (s == "binary") return QAKind::kBinary;
  if (s == "open") return QAKind::kOpen;
  fail(ErrorKind::kData, "unknown QA kind '" + s + "' (expected binary or open)");
}

std::string qa_kind_name(QAKind kind) { return kind == QAKind::kBinary ? "binary" : "open"; }

std::vector<PatientRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open manifest " + path.string());
  std::vector<PatientRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      PatientRecord r;
      r.patient_id = j.at("patient_id").get<std::string>();
      r.dataset = j.at("dataset").get<std::string>();
      for (const auto& c : j.at("clips")) {
        r.clips.push_back({c.at("path").get<std::string>(), c.at("site").get<std::string>()});
      }
      for (const auto& q : j.at("qa")) {
        QAPair p{q.at("question").get<std::string>(), q.at("answer").get<std::string>(),
                 parse_qa_kind(q.at("kind").get<std::string>())};
        if (p.kind == QAKind::kBinary && p.answer != "yes" && p.answer != "no") {
          fail(ErrorKind::kData, where + ": binary answer must be yes or no, got '" +
                                     p.answer + "'");
        }
        r.qa.push_back(std::move(p));
      }
      if (r.patient_id.empty() || r.dataset.empty()) {
        fail(ErrorKind::kData, where + ": empty patient_id or dataset");
      }
      if (r.clips.empty()) fail(ErrorKind::kData, where + ": patient has no clips");
      if (!seen.insert(r.patient_id).second) {
        fail(ErrorKind::kData, where + ": duplicate patient_id " + r.patient_id);
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, where + ": " + e.what());
    }
  }
  if (out.empty()) fail(ErrorKind::kData, path.string() + ": manifest holds no patients");
  return out;
}

void write_manifest(const std::filesystem::path& path, std::span<const PatientRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& r : records) {
    json clips = json::array(), qa = json::array();
    for (const auto& c : r.clips) clips.push_back({{"path", c.path}, {"site", c.site}});
    for (const auto& q : r.qa) {
      qa.push_back({{"question", q.question}, {"answer", q.answer}, {"kind", qa_kind_name(q.kind)}});
    }
    out << json{{"patient_id", r.patient_id}, {"dataset", r.dataset}, {"clips", clips}, {"qa", qa}}
               .dump()
        << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

std::filesystem::path resolve_clip(const std::filesystem::path& root, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : root / p;
}

std::string clip_id(const ClipRef& clip) {
  return std::filesystem::path(clip.path).stem().string();
}

std::vector<AudioClip> load_patient_clips(const PatientRecord& rec,
                                          const std::filesystem::path& root,
                                          double max_seconds) {
  std::vector<AudioClip> clips;
  clips.reserve(rec.clips.size());
  for (const auto& c : rec.clips) {
    const auto path = resolve_clip(root, c.path);
    if (!std::filesystem::exists(path)) {
      fail(ErrorKind::kData, "missing clip file " + path.string() + " for patient " +
                                 rec.patient_id);
    }
    clips.push_back(preprocess_file(path, c.site, rec.patient_id, max_seconds));
  }
  return clips;
}

std::string site_long_name(const std::string& site) {
  std::string s = site;
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  if (s == "AV") return "aortic";
  if (s == "PV") return "pulmonic";
  if (s == "TV") return "tricuspid";
  if (s == "MV") return "mitral";
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

}  // namespace auscqa
