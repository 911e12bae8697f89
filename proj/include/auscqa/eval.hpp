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

// QA metrics. All text metrics operate on normalize_text() tokens.

#ifndef AUSCQA_EVAL_HPP_
#define AUSCQA_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auscqa/data.hpp"
#include "json.hpp"

namespace auscqa {

// Lowercase, ASCII punctuation removed, whitespace collapsed and trimmed.
std::string normalize_text(std::string_view s);
std::vector<std::string> normalized_tokens(std::string_view s);

// normalize(gold) is a substring of normalize(hyp). Empty gold is a data
// error.
bool contains_match(std::string_view gold, std::string_view hyp);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
// Token LCS F1 (beta 1); 0 when either side is empty.
double rouge_l_f1(std::string_view gold, std::string_view hyp);

// Porter (1980) suffix stripper; words of length <= 2 are returned as is.
std::string porter_stem(std::string_view word);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

struct MeteorDetail {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

// Exact then stem unigram alignment. Within a stage each hypothesis token,
// left to right, takes the unmatched gold token that extends the previous
// alignment if one exists, else the leftmost one.
MeteorDetail meteor_detail(std::string_view gold, std::string_view hyp,
                           const MeteorParams& params = {});
double meteor(std::string_view gold, std::string_view hyp, const MeteorParams& params = {});

class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual std::size_t dim() const = 0;
  // Unit-norm vector for a normalized token.
  virtual std::vector<double> embed(const std::string& token) const = 0;
};

// Seeded random unit vectors keyed by token text (FNV-1a hash mixed with
// the seed).
class HashEmbedder final : public TokenEmbedder {
 public:
  explicit HashEmbedder(std::size_t dim = 64, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(const std::string& token) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Greedy max-cosine precision/recall F1 over token embeddings; 0 when a
// side is empty or either direction is non-positive. A null embedder is a
// usage error.
double embed_score(std::string_view gold, std::string_view hyp, const TokenEmbedder* embedder);

// First normalized token that is "yes" or "no".
std::optional<bool> extract_yes_no(std::string_view text);

struct BinaryCounts {
  // gold_pred: y = yes, n = no, u = neither.
  std::size_t yy = 0, yn = 0, yu = 0, ny = 0, nn = 0, nu = 0;
  std::size_t total() const { return yy + yn + yu + ny + nn + nu; }
  void add(const BinaryCounts& o);
};

struct BinaryMetrics {
  BinaryCounts counts;
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  // Set when any ratio had a zero denominator and was reported as 0.
  bool zero_division = false;
};

BinaryMetrics binary_metrics_from_counts(const BinaryCounts& c);

struct Prediction {
  std::string patient_id;
  std::string dataset;
  QAKind kind = QAKind::kOpen;
  std::string question;
  std::string gold;
  std::string hyp;
};

// Gold of a binary prediction must normalize to yes or no.
BinaryMetrics binary_metrics(std::span<const Prediction> preds);

struct MetricRow {
  std::string dataset;
  std::size_t n = 0;
  std::size_t n_binary = 0;
  std::size_t n_open = 0;
  BinaryMetrics binary;
  double contains_match = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double embed_score = 0.0;
};

// Overall row pools counts across datasets; per-dataset rows are sorted
// by tag.
struct MetricReport {
  MetricRow overall;
  std::vector<MetricRow> per_dataset;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

MetricReport evaluate(std::span<const Prediction> preds, const TokenEmbedder* embedder);

nlohmann::json prediction_to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds);

}  // namespace auscqa

#endif  // AUSCQA_EVAL_HPP_
