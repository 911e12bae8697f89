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

#include <cstdio>
#include <fstream>
#include <map>

#include "auscqa/error.hpp"
#include "auscqa/eval.hpp"

namespace auscqa {
namespace {

using nlohmann::json;

// Running sums for one row; rates are formed at the end from pooled counts.
struct Accumulator {
  std::size_t n = 0, n_open = 0, contains = 0;
  BinaryCounts binary;
  double rouge = 0.0, meteor = 0.0, embed = 0.0;

  void add(const Accumulator& o) {
    n += o.n;
    n_open += o.n_open;
    contains += o.contains;
    binary.add(o.binary);
    rouge += o.rouge;
    meteor += o.meteor;
    embed += o.embed;
  }

  MetricRow finish(const std::string& tag) const {
    MetricRow r;
    r.dataset = tag;
    r.n = n;
    r.n_binary = binary.total();
    r.n_open = n_open;
    r.binary = binary_metrics_from_counts(binary);
    if (n_open > 0) {
      const double d = static_cast<double>(n_open);
      r.contains_match = static_cast<double>(contains) / d;
      r.rouge_l = rouge / d;
      r.meteor = meteor / d;
      r.embed_score = embed / d;
    }
    return r;
  }
};

json row_json(const MetricRow& r) {
  json j = {{"dataset", r.dataset}, {"n", r.n}, {"n_binary", r.n_binary}, {"n_open", r.n_open}};
  if (r.n_binary > 0) {
    const auto& c = r.binary.counts;
    j["binary"] = {{"accuracy", r.binary.accuracy},
                   {"f1_macro", r.binary.f1_macro},
                   {"sensitivity", r.binary.sensitivity},
                   {"specificity", r.binary.specificity},
                   {"zero_division", r.binary.zero_division},
                   {"counts",
                    {{"yes_yes", c.yy}, {"yes_no", c.yn}, {"yes_none", c.yu},
                     {"no_yes", c.ny}, {"no_no", c.nn}, {"no_none", c.nu}}}};
  }
  if (r.n_open > 0) {
    j["open"] = {{"contains_match", r.contains_match},
                 {"rouge_l_f1", r.rouge_l},
                 {"meteor", r.meteor},
                 {"embed_score_f1", r.embed_score}};
  }
  return j;
}

std::string cell(bool present, double v) {
  if (!present) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

MetricReport evaluate(std::span<const Prediction> preds, const TokenEmbedder* embedder) {
  if (preds.empty()) fail(ErrorKind::kData, "evaluate: no predictions");
  std::map<std::string, Accumulator> by_tag;
  for (const auto& p : preds) {
    Accumulator& a = by_tag[p.dataset];
    ++a.n;
    if (p.kind == QAKind::kBinary) {
      a.binary.add(binary_metrics({&p, 1}).counts);
    } else {
      ++a.n_open;
      a.contains += contains_match(p.gold, p.hyp) ? 1 : 0;
      a.rouge += rouge_l_f1(p.gold, p.hyp);
      a.meteor += meteor(p.gold, p.hyp);
      a.embed += embed_score(p.gold, p.hyp, embedder);
    }
  }
  MetricReport report;
  Accumulator total;
  for (const auto& [tag, acc] : by_tag) {
    total.add(acc);
    report.per_dataset.push_back(acc.finish(tag));
  }
  report.overall = total.finish("overall");
  return report;
}

json MetricReport::to_json() const {
  json rows = json::array();
  for (const auto& r : per_dataset) rows.push_back(row_json(r));
  return {{"overall", row_json(overall)}, {"per_dataset", rows}};
}

std::string MetricReport::to_table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %6s %8s %8s %8s %8s %8s %8s %8s %8s\n", "dataset", "n",
                "acc", "f1", "sens", "spec", "contain", "rougeL", "meteor", "embed");
  out += line;
  const auto emit = [&](const MetricRow& r) {
    const bool b = r.n_binary > 0, o = r.n_open > 0;
    std::snprintf(line, sizeof(line), "%-16s %6zu %8s %8s %8s %8s %8s %8s %8s %8s\n",
                  r.dataset.c_str(), r.n, cell(b, r.binary.accuracy).c_str(),
                  cell(b, r.binary.f1_macro).c_str(), cell(b, r.binary.sensitivity).c_str(),
                  cell(b, r.binary.specificity).c_str(), cell(o, r.contains_match).c_str(),
                  cell(o, r.rouge_l).c_str(), cell(o, r.meteor).c_str(),
                  cell(o, r.embed_score).c_str());
    out += line;
  };
  for (const auto& r : per_dataset) emit(r);
  emit(overall);
  return out;
}

json prediction_to_json(const Prediction& p) {
  return {{"patient_id", p.patient_id}, {"dataset", p.dataset}, {"kind", qa_kind_name(p.kind)},
          {"question", p.question},     {"gold", p.gold},       {"hyp", p.hyp}};
}

Prediction prediction_from_json(const json& j) {
  Prediction p;
  try {
    p.patient_id = j.at("patient_id").get<std::string>();
    p.dataset = j.at("dataset").get<std::string>();
    p.kind = parse_qa_kind(j.at("kind").get<std::string>());
    p.question = j.at("question").get<std::string>();
    p.gold = j.at("gold").get<std::string>();
    p.hyp = j.at("hyp").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, std::string("bad prediction record: ") + e.what());
  }
  return p;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open predictions " + path.string());
  std::vector<Prediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(prediction_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& p : preds) out << prediction_to_json(p).dump() << '\n';
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

}  // namespace auscqa
